// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Bit-packed spin configurations and two-body spin Hamiltonians.
//
// Encoding: bit i == 0 is spin up (s_i = +1), bit i == 1 is spin down (s_i = -1).
// A Hamiltonian is stored densely as
//
//   H = c0 + sum_{i<j} [cx_ij X_i X_j + cy_ij Y_i Y_j + cz_ij Z_i Z_j]
//          + sum_i [hx_i X_i + hz_i Z_i]
//
// which covers every model used here (all of them are real in the Z basis).

#pragma once

#include "nqes/core.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nqes {

class SpinConfig {
 public:
  static constexpr int kMaxSpins = 512;
  static constexpr int kWords = kMaxSpins / 64;

  SpinConfig() = default;
  explicit SpinConfig(int n);

  // "01100" -> spins (+1, -1, -1, +1, +1); character i is spin i.
  static SpinConfig from_string(std::string_view bits);
  // Bit i of `index` becomes spin i. Requires n <= 64.
  static SpinConfig from_index(int n, std::uint64_t index);

  int size() const { return n_; }
  bool bit(int i) const { return (words_[i >> 6] >> (i & 63)) & 1ULL; }
  int spin(int i) const { return bit(i) ? -1 : 1; }
  void flip(int i) { words_[i >> 6] ^= 1ULL << (i & 63); }
  void set(int i, bool down) {
    if (bit(i) != down) flip(i);
  }

  std::uint64_t index() const;
  int popcount() const;
  std::string to_string() const;

  // Cyclic rotation inside n bits: result bit i == this bit (i + 1) mod n.
  SpinConfig rotated() const;

  std::span<const std::uint64_t> words() const { return {words_.data(), num_words()}; }

  SpinConfig operator^(const SpinConfig& o) const;
  bool operator==(const SpinConfig& o) const = default;

 private:
  std::size_t num_words() const { return static_cast<std::size_t>((n_ + 63) / 64); }

  int n_ = 0;
  std::array<std::uint64_t, kWords> words_{};
};

// Up to two spins flipped by one off-diagonal term.
struct FlipSet {
  std::array<int, 2> sites{};
  int count = 0;

  std::span<const int> span() const { return {sites.data(), static_cast<std::size_t>(count)}; }
};

struct Connection {
  SpinConfig target;
  Complex amplitude;
};

class Hamiltonian {
 public:
  Hamiltonian() = default;
  Hamiltonian(RealMatrix cx, RealMatrix cy, RealMatrix cz, RealVector hx, RealVector hz,
              Real constant = 0.0, std::string name = "custom");

  static Hamiltonian zero(int n, std::string name = "custom");

  int size() const { return n_; }
  const std::string& name() const { return name_; }
  const RealMatrix& cx() const { return cx_; }
  const RealMatrix& cy() const { return cy_; }
  const RealMatrix& cz() const { return cz_; }
  const RealVector& hx() const { return hx_; }
  const RealVector& hz() const { return hz_; }
  Real constant() const { return constant_; }

  // Set when cz is a uniform nearest-neighbour ring c * sum_i Z_i Z_{i+1}
  // (bond multiplicity included) and nothing else sits on the ZZ channel.
  std::optional<Real> ring_coupling() const { return ring_coupling_; }

  // Upper bound on the number of connections emitted per configuration.
  std::size_t max_connections() const { return x_sites_.size() + flip_pairs_.size(); }

  // <S|H|S>.
  Real diag_energy(const SpinConfig& s) const;
  // Reference O(n^2) summation; the oracle for the bitwise path.
  Real diag_energy_naive(const SpinConfig& s) const;

  // Calls f(const FlipSet&, Real amplitude) for every S' != S with <S'|H|S> != 0.
  template <typename F>
  void for_each_connection(const SpinConfig& s, F&& f) const;

  std::vector<Connection> connections(const SpinConfig& s) const;

  Hamiltonian operator+(const Hamiltonian& o) const;
  Hamiltonian scaled(Real factor) const;

 private:
  struct FlipPair {
    int i, j;
    Real antiparallel;  // cx + cy
    Real parallel;      // cx - cy
  };
  struct ZPair {
    int i, j;
    Real c;
  };

  void index_terms();

  int n_ = 0;
  std::string name_;
  RealMatrix cx_, cy_, cz_;
  RealVector hx_, hz_;
  Real constant_ = 0.0;

  std::vector<int> x_sites_;
  std::vector<FlipPair> flip_pairs_;
  std::vector<ZPair> z_pairs_;
  std::vector<int> z_sites_;
  std::optional<Real> ring_coupling_;
};

template <typename F>
void Hamiltonian::for_each_connection(const SpinConfig& s, F&& f) const {
  require_dims(s.size() == n_, "connections: configuration size does not match Hamiltonian");
  FlipSet fs;
  fs.count = 1;
  for (int i : x_sites_) {
    fs.sites[0] = i;
    f(static_cast<const FlipSet&>(fs), hx_[i]);
  }
  fs.count = 2;
  for (const auto& p : flip_pairs_) {
    const Real amp = s.bit(p.i) != s.bit(p.j) ? p.antiparallel : p.parallel;
    if (amp == 0.0) continue;
    fs.sites = {p.i, p.j};
    f(static_cast<const FlipSet&>(fs), amp);
  }
}

inline Real diag_energy(const SpinConfig& s, const Hamiltonian& h) { return h.diag_energy(s); }
inline std::vector<Connection> connections(const SpinConfig& s, const Hamiltonian& h) {
  return h.connections(s);
}

// -- Model constructors ------------------------------------------------------

// -sum_i Z_i Z_{i+1} + h sum_i X_i.
Hamiltonian build_tfim(int n, Real h, bool periodic = true);
// sum_i (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1}), periodic, n even.
Hamiltonian build_afh(int n);
// sum_i (-X_i X_{i+1} - Y_i Y_{i+1} + Z_i Z_{i+1}), periodic, n even.
Hamiltonian build_xxz(int n);
// sum_{i<j} (XX + YY + ZZ) / d_ij^2 with chord distance d_ij = (n/pi)|sin(pi(i-j)/n)|.
Hamiltonian build_haldane_shastry(int n);
// sum_{i!=j} J_ij Z_i Z_j - h sum_i X_i, i.e. cz = 2J. The longitudinal field
// 2 sum_j J_ij Z_i is only added when `longitudinal` is set.
Hamiltonian build_longrange_ising(const RealMatrix& J, Real h, bool longitudinal = false);

Real chord_distance(int n, int i, int j);

// Closed-form Haldane-Shastry level for magnon number m (ground: m = n/2).
Real hs_exact_energy(int n, int m);

// Single-site / two-site observables in the same representation.
Hamiltonian zz_operator(int n, int i, int j);
Hamiltonian xx_operator(int n, int i, int j);
Hamiltonian z_operator(int n, int i);
Hamiltonian x_operator(int n, int i);
Hamiltonian identity_operator(int n);

}  // namespace nqes
