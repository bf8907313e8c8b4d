// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace nqes {

using Real = double;
using Complex = std::complex<Real>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using RealVector = Vector<Real>;
using RealMatrix = Matrix<Real>;
using ComplexVector = Vector<Complex>;
using ComplexMatrix = Matrix<Complex>;

inline constexpr Real kPi = 3.14159265358979323846264338327950288;

// Error taxonomy. The CLI maps each family onto a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operands with mismatched sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition on a value was violated (odd n, asymmetric J, ...).
class ConstraintError : public Error {
 public:
  using Error::Error;
};

// Request exceeds what a routine is built to handle (e.g. dense ED beyond its size cap).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, singular matrices, unstable crystals.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// An iterative method ran out of budget.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Malformed or inconsistent experiment configuration / file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConstraintError(what);
}

// SplitMix64 finaliser; used to derive independent RNG streams from
// (seed, stream index) without depending on thread scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

// Uniform double in [0, 1) from the top 53 bits of a 64-bit engine draw.
template <typename Engine>
Real uniform01(Engine& eng) {
  return static_cast<Real>(eng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) (Lemire's multiply-shift; bias is below 2^-64 * n).
template <typename Engine>
std::uint32_t uniform_index(Engine& eng, std::uint32_t n) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(eng()) * n;
  return static_cast<std::uint32_t>(prod >> 64);
}

}  // namespace nqes
