// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Complex restricted Boltzmann machine wavefunction
//
//   psi(S) = exp(sum_i a_i s_i) * prod_j 2 cosh(theta_j),
//   theta_j = b_j + sum_i w_ij s_i,
//
// evaluated in the log domain. The per-configuration cache holds theta and
// tanh(theta) so that single- and double-flip ratios cost O(M).

#pragma once

#include "nqes/core.hpp"
#include "nqes/spin_models.hpp"

#include <random>
#include <span>

namespace nqes {

using RowMajorComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RbmParams {
  int n = 0;
  int m = 0;
  ComplexVector a;
  ComplexVector b;
  RowMajorComplexMatrix w;  // n x m

  RbmParams() = default;
  RbmParams(int n_visible, int n_hidden);

  std::size_t size() const { return static_cast<std::size_t>(n + m + n * m); }

  // Flattened as (a, b, w row-major).
  ComplexVector flatten() const;
  static RbmParams unflatten(int n_visible, int n_hidden, const ComplexVector& flat);

  bool all_finite() const;
  bool operator==(const RbmParams& o) const;
};

// a ~ N(0, 1/n), b ~ N(0, 1/m), w ~ N(0, 1/(n m)); each variance is the total
// complex variance, split equally between real and imaginary parts.
RbmParams init_params(int n, int m, std::mt19937_64& rng);

// a_i -= i*pi/2 on even (1-based) sites, i.e. psi -> (prod_{even i} sigma_z^i) psi
// up to a global phase.
RbmParams apply_even_site_z(const RbmParams& p);

// log(2 cosh z) without overflow for any finite z.
Complex log2cosh(Complex z);

// Direct evaluation of log psi (no cache).
Complex log_psi(const RbmParams& p, const SpinConfig& s);

class Rbm {
 public:
  struct Cache {
    ComplexVector theta;
    ComplexVector tanh_theta;
    Complex log_psi{};
    int flips_since_refresh = 0;
  };

  explicit Rbm(RbmParams params, int refresh_interval = 1000);

  const RbmParams& params() const { return p_; }
  int num_visible() const { return p_.n; }
  int num_hidden() const { return p_.m; }
  std::size_t num_params() const { return p_.size(); }
  int refresh_interval() const { return refresh_interval_; }

  Cache make_cache(const SpinConfig& s) const;
  void refresh(Cache& c, const SpinConfig& s) const;

  Complex log_psi(const SpinConfig& s) const { return nqes::log_psi(p_, s); }

  // psi(S with `flips` inverted) / psi(S).
  Complex ratio(const Cache& c, const SpinConfig& s, std::span<const int> flips) const;
  Complex ratio_flip(const Cache& c, const SpinConfig& s, int i) const {
    return ratio(c, s, std::span<const int>(&i, 1));
  }
  Complex log_psi_after(const Cache& c, const SpinConfig& s, std::span<const int> flips) const {
    return c.log_psi + std::log(ratio(c, s, flips));
  }

  // Advance the cache across a flip of spin i; `s` is the configuration before the flip.
  void update_cache_flip(Cache& c, const SpinConfig& s, int i) const;

  // d log psi / dW in flattened parameter order.
  void derivatives(const Cache& c, const SpinConfig& s, Eigen::Ref<ComplexVector> out) const;
  // out += weight * d log psi / dW.
  void accumulate_derivatives(const Cache& c, const SpinConfig& s, Complex weight,
                              Eigen::Ref<ComplexVector> out) const;

 private:
  RbmParams p_;
  int refresh_interval_;
  // exp(+-2 a_i) and exp(+-2 w_ij): flip factors without transcendental calls.
  ComplexVector e2a_, e2a_inv_;
  RowMajorComplexMatrix e2w_, e2w_inv_;
};

}  // namespace nqes
