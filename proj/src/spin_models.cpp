// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqes/spin_models.hpp"

#include <cmath>
#include <utility>

namespace nqes {

SpinConfig::SpinConfig(int n) : n_(n) {
  if (n < 1 || n > kMaxSpins) {
    throw CapacityError("SpinConfig: spin count must lie in [1, 512], got " + std::to_string(n));
  }
}

SpinConfig SpinConfig::from_string(std::string_view bits) {
  SpinConfig s(static_cast<int>(bits.size()));
  for (int i = 0; i < s.n_; ++i) {
    if (bits[i] == '1') {
      s.flip(i);
    } else if (bits[i] != '0') {
      throw ConfigError("SpinConfig: expected only '0'/'1' characters");
    }
  }
  return s;
}

SpinConfig SpinConfig::from_index(int n, std::uint64_t index) {
  if (n > 64) throw CapacityError("SpinConfig::from_index supports at most 64 spins");
  SpinConfig s(n);
  s.words_[0] = n == 64 ? index : (index & ((1ULL << n) - 1));
  return s;
}

std::uint64_t SpinConfig::index() const {
  if (n_ > 64) throw CapacityError("SpinConfig::index supports at most 64 spins");
  return words_[0];
}

int SpinConfig::popcount() const {
  int c = 0;
  for (auto w : words()) c += std::popcount(w);
  return c;
}

std::string SpinConfig::to_string() const {
  std::string out(static_cast<std::size_t>(n_), '0');
  for (int i = 0; i < n_; ++i) out[i] = bit(i) ? '1' : '0';
  return out;
}

SpinConfig SpinConfig::rotated() const {
  SpinConfig r(n_);
  const std::size_t nw = num_words();
  for (std::size_t w = 0; w < nw; ++w) {
    std::uint64_t v = words_[w] >> 1;
    if (w + 1 < nw) v |= words_[w + 1] << 63;
    r.words_[w] = v;
  }
  // Old bit 0 wraps to position n-1; the shift above left that slot zero.
  if (bit(0)) r.flip(n_ - 1);
  return r;
}

SpinConfig SpinConfig::operator^(const SpinConfig& o) const {
  require_dims(n_ == o.n_, "SpinConfig xor: size mismatch");
  SpinConfig r(n_);
  for (std::size_t w = 0; w < num_words(); ++w) r.words_[w] = words_[w] ^ o.words_[w];
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void check_coupling(const RealMatrix& c, int n, const char* what) {
  require_dims(c.rows() == n && c.cols() == n, std::string(what) + " must be n x n");
  for (int i = 0; i < n; ++i) {
    require(c(i, i) == 0.0, std::string(what) + " must have zero diagonal");
    for (int j = i + 1; j < n; ++j) {
      require(c(i, j) == c(j, i), std::string(what) + " must be symmetric");
    }
  }
}

}  // namespace

Hamiltonian::Hamiltonian(RealMatrix cx, RealMatrix cy, RealMatrix cz, RealVector hx, RealVector hz,
                         Real constant, std::string name)
    : n_(static_cast<int>(hx.size())),
      name_(std::move(name)),
      cx_(std::move(cx)),
      cy_(std::move(cy)),
      cz_(std::move(cz)),
      hx_(std::move(hx)),
      hz_(std::move(hz)),
      constant_(constant) {
  if (n_ < 1 || n_ > SpinConfig::kMaxSpins) throw CapacityError("Hamiltonian: bad spin count");
  require_dims(hz_.size() == n_, "Hamiltonian: hz length must equal n");
  check_coupling(cx_, n_, "cx");
  check_coupling(cy_, n_, "cy");
  check_coupling(cz_, n_, "cz");
  index_terms();
}

Hamiltonian Hamiltonian::zero(int n, std::string name) {
  return Hamiltonian(RealMatrix::Zero(n, n), RealMatrix::Zero(n, n), RealMatrix::Zero(n, n),
                     RealVector::Zero(n), RealVector::Zero(n), 0.0, std::move(name));
}

void Hamiltonian::index_terms() {
  x_sites_.clear();
  z_sites_.clear();
  flip_pairs_.clear();
  z_pairs_.clear();
  for (int i = 0; i < n_; ++i) {
    if (hx_[i] != 0.0) x_sites_.push_back(i);
    if (hz_[i] != 0.0) z_sites_.push_back(i);
    for (int j = i + 1; j < n_; ++j) {
      const Real a = cx_(i, j) + cy_(i, j);
      const Real p = cx_(i, j) - cy_(i, j);
      if (a != 0.0 || p != 0.0) flip_pairs_.push_back({i, j, a, p});
      if (cz_(i, j) != 0.0) z_pairs_.push_back({i, j, cz_(i, j)});
    }
  }

  // Detect c * sum_i Z_i Z_{i+1} on a ring. For n == 2 both ring bonds land on
  // the same pair, so the expected entry is 2c.
  ring_coupling_.reset();
  if (n_ >= 2 && !z_pairs_.empty()) {
    RealMatrix ring = RealMatrix::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) {
      const int j = (i + 1) % n_;
      ring(i, j) += 1.0;
      ring(j, i) += 1.0;
    }
    const Real c = n_ == 2 ? cz_(0, 1) / 2.0 : cz_(0, 1);
    if (c != 0.0 && cz_ == c * ring) ring_coupling_ = c;
  }
}

Real Hamiltonian::diag_energy(const SpinConfig& s) const {
  require_dims(s.size() == n_, "diag_energy: configuration size does not match Hamiltonian");
  Real e = constant_;
  if (ring_coupling_) {
    // sum over ring bonds of s_i s_{i+1} = n - 2 * #antiparallel bonds.
    const int broken = (s ^ s.rotated()).popcount();
    e += *ring_coupling_ * static_cast<Real>(n_ - 2 * broken);
  } else {
    for (const auto& p : z_pairs_) e += s.bit(p.i) == s.bit(p.j) ? p.c : -p.c;
  }
  for (int i : z_sites_) e += s.bit(i) ? -hz_[i] : hz_[i];
  return e;
}

Real Hamiltonian::diag_energy_naive(const SpinConfig& s) const {
  require_dims(s.size() == n_, "diag_energy: configuration size does not match Hamiltonian");
  Real e = constant_;
  for (int i = 0; i < n_; ++i) {
    e += hz_[i] * s.spin(i);
    for (int j = i + 1; j < n_; ++j) e += cz_(i, j) * s.spin(i) * s.spin(j);
  }
  return e;
}

std::vector<Connection> Hamiltonian::connections(const SpinConfig& s) const {
  std::vector<Connection> out;
  out.reserve(max_connections());
  for_each_connection(s, [&](const FlipSet& fs, Real amp) {
    SpinConfig t = s;
    for (int i : fs.span()) t.flip(i);
    out.push_back({t, Complex(amp, 0.0)});
  });
  return out;
}

Hamiltonian Hamiltonian::operator+(const Hamiltonian& o) const {
  require_dims(n_ == o.n_, "Hamiltonian sum: size mismatch");
  return Hamiltonian(cx_ + o.cx_, cy_ + o.cy_, cz_ + o.cz_, hx_ + o.hx_, hz_ + o.hz_,
                     constant_ + o.constant_, name_ + "+" + o.name_);
}

Hamiltonian Hamiltonian::scaled(Real f) const {
  return Hamiltonian(f * cx_, f * cy_, f * cz_, f * hx_, f * hz_, f * constant_, name_);
}

// ---------------------------------------------------------------------------

namespace {

RealMatrix ring_bonds(int n, bool periodic) {
  RealMatrix b = RealMatrix::Zero(n, n);
  const int bonds = periodic ? n : n - 1;
  for (int i = 0; i < bonds; ++i) {
    const int j = (i + 1) % n;
    b(i, j) += 1.0;
    b(j, i) += 1.0;
  }
  return b;
}

void require_even_chain(int n, const char* model) {
  if (n < 4 || n % 2 != 0) {
    throw ConstraintError(std::string(model) + ": requires an even chain length n >= 4");
  }
}

}  // namespace

Hamiltonian build_tfim(int n, Real h, bool periodic) {
  require(n >= 2, "tfim: n must be at least 2");
  const RealMatrix zero = RealMatrix::Zero(n, n);
  return Hamiltonian(zero, zero, -ring_bonds(n, periodic), RealVector::Constant(n, h),
                     RealVector::Zero(n), 0.0, "tfim");
}

Hamiltonian build_afh(int n) {
  require_even_chain(n, "afh");
  const RealMatrix b = ring_bonds(n, true);
  return Hamiltonian(b, b, b, RealVector::Zero(n), RealVector::Zero(n), 0.0, "afh");
}

Hamiltonian build_xxz(int n) {
  require_even_chain(n, "xxz");
  const RealMatrix b = ring_bonds(n, true);
  return Hamiltonian(-b, -b, b, RealVector::Zero(n), RealVector::Zero(n), 0.0, "xxz");
}

Real chord_distance(int n, int i, int j) {
  return (static_cast<Real>(n) / kPi) * std::abs(std::sin(kPi * static_cast<Real>(i - j) / n));
}

Hamiltonian build_haldane_shastry(int n) {
  require(n >= 4, "haldane_shastry: n must be at least 4");
  RealMatrix c = RealMatrix::Zero(n, n);
  // Couplings depend only on |i - j| mod n; evaluate once per distance so the
  // matrix is exactly symmetric and translation invariant.
  RealVector by_distance(n);
  for (int d = 1; d < n; ++d) {
    const Real chord = chord_distance(n, d, 0);
    by_distance[d] = 1.0 / (chord * chord);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      c(i, j) = c(j, i) = by_distance[std::min(j - i, n - (j - i))];
    }
  }
  return Hamiltonian(c, c, c, RealVector::Zero(n), RealVector::Zero(n), 0.0, "haldane_shastry");
}

Hamiltonian build_longrange_ising(const RealMatrix& J, Real h, bool longitudinal) {
  const auto n = static_cast<int>(J.rows());
  require_dims(J.cols() == n, "longrange_ising: J must be square");
  for (int i = 0; i < n; ++i) {
    require(J(i, i) == 0.0, "longrange_ising: J must have zero diagonal");
    for (int j = i + 1; j < n; ++j) require(J(i, j) == J(j, i), "longrange_ising: J must be symmetric");
  }
  const RealMatrix zero = RealMatrix::Zero(n, n);
  RealVector hz = RealVector::Zero(n);
  if (longitudinal) hz = 2.0 * J.rowwise().sum();
  return Hamiltonian(zero, zero, 2.0 * J, RealVector::Constant(n, -h), hz, 0.0, "longrange_ising");
}

Real hs_exact_energy(int n, int m) {
  require(n >= 2 && n % 2 == 0, "hs_exact_energy: n must be even");
  require(m >= 0 && m <= n / 2, "hs_exact_energy: m must lie in [0, n/2]");
  const Real nn = static_cast<Real>(n);
  const Real mu = 2.0 * m / nn;
  return nn * (1.0 / 6.0 - mu / 2.0 + mu * mu * mu / 6.0 - (1.0 + 4.0 * mu) / (6.0 * nn * nn)) * kPi * kPi;
}

Hamiltonian zz_operator(int n, int i, int j) {
  require(i != j, "zz_operator: sites must differ");
  RealMatrix cz = RealMatrix::Zero(n, n);
  cz(i, j) = cz(j, i) = 1.0;
  const RealMatrix zero = RealMatrix::Zero(n, n);
  return Hamiltonian(zero, zero, cz, RealVector::Zero(n), RealVector::Zero(n), 0.0, "zz");
}

Hamiltonian xx_operator(int n, int i, int j) {
  require(i != j, "xx_operator: sites must differ");
  RealMatrix cx = RealMatrix::Zero(n, n);
  cx(i, j) = cx(j, i) = 1.0;
  const RealMatrix zero = RealMatrix::Zero(n, n);
  return Hamiltonian(cx, zero, zero, RealVector::Zero(n), RealVector::Zero(n), 0.0, "xx");
}

Hamiltonian z_operator(int n, int i) {
  RealVector hz = RealVector::Zero(n);
  hz[i] = 1.0;
  const RealMatrix zero = RealMatrix::Zero(n, n);
  return Hamiltonian(zero, zero, zero, RealVector::Zero(n), hz, 0.0, "z");
}

Hamiltonian x_operator(int n, int i) {
  RealVector hx = RealVector::Zero(n);
  hx[i] = 1.0;
  const RealMatrix zero = RealMatrix::Zero(n, n);
  return Hamiltonian(zero, zero, zero, hx, RealVector::Zero(n), 0.0, "x");
}

Hamiltonian identity_operator(int n) {
  const RealMatrix zero = RealMatrix::Zero(n, n);
  return Hamiltonian(zero, zero, zero, RealVector::Zero(n), RealVector::Zero(n), 1.0, "identity");
}

}  // namespace nqes
