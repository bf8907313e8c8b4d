// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Exact diagonalization in the full 2^n Z basis (basis index bit i == spin i).
// Every supported Hamiltonian is real symmetric in this basis, so real
// arithmetic is used throughout.

#pragma once

#include "nqes/core.hpp"
#include "nqes/spin_models.hpp"

#include <cstdint>

namespace nqes {

struct SpectrumResult {
  int n = 0;
  int k = 0;
  RealVector energies;   // ascending
  RealMatrix vectors;    // 2^n x k, column j belongs to energies[j]
  RealVector residuals;  // ||H v - E v|| per pair
  int iterations = 0;    // matrix-vector products (Lanczos only)
};

inline constexpr int kDenseMaxSpins = 12;
inline constexpr int kLanczosMaxSpins = 20;

// Dense 2^n x 2^n matrix assembled from diag_energy + connections.
RealMatrix dense_matrix(const Hamiltonian& h);

// y = H x without storing H.
void apply_hamiltonian(const Hamiltonian& h, const RealVector& diag, const RealVector& x, RealVector& y);
RealVector diagonal_elements(const Hamiltonian& h);

SpectrumResult dense_spectrum(const Hamiltonian& h, int k);

struct LanczosOptions {
  Real tol = 1e-10;        // residual tolerance relative to max(1, |E|)
  int max_restarts = 500;
  int basis_size = 0;      // 0: max(2k + 24, 40)
  std::uint64_t seed = 1;  // start vector
};

// Thick-restart Lanczos with full reorthogonalization.
SpectrumResult lanczos_spectrum(const Hamiltonian& h, int k, const LanczosOptions& opt = {});

// Picks dense for n <= kDenseMaxSpins, Lanczos otherwise.
SpectrumResult ground_spectrum(const Hamiltonian& h, int k);

// <sigma_axis^i sigma_axis^j> for axis in {'x', 'y', 'z'}.
Real exact_correlation(const ComplexVector& v, int i, int j, char axis);
Real exact_correlation(const RealVector& v, int i, int j, char axis);

// <v|O|v> / <v|v>.
Real exact_expectation(const RealVector& v, const Hamiltonian& op);

}  // namespace nqes
