// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nqes/core.hpp"
#include "nqes/spin_models.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace nqes {

// A wavefunction given by its full amplitude table (index bit i == spin i).
// It has no variational parameters. Zero amplitudes have log_psi = -inf;
// ratio() out of such a configuration is not finite, so the ensemble falls
// back to log_psi_after() whenever the base amplitude vanishes.
class TableWavefunction {
 public:
  struct Cache {
    std::uint64_t index = 0;
    Complex log_psi{};
  };

  explicit TableWavefunction(ComplexVector amplitudes) : amp_(std::move(amplitudes)) {
    const auto dim = static_cast<std::uint64_t>(amp_.size());
    n_ = 0;
    while ((1ULL << n_) < dim) ++n_;
    if (n_ < 1 || (1ULL << n_) != dim) throw DimensionError("TableWavefunction: length must be 2^n with n >= 1");
    if (amp_.cwiseAbs().maxCoeff() == 0.0) throw ConstraintError("TableWavefunction: amplitude table is zero");
    log_amp_.resize(amp_.size());
    for (Eigen::Index k = 0; k < amp_.size(); ++k) log_amp_[k] = safe_log(amp_[k]);
  }

  int num_visible() const { return n_; }
  std::size_t num_params() const { return 0; }
  const ComplexVector& amplitudes() const { return amp_; }

  Cache make_cache(const SpinConfig& s) const {
    require_dims(s.size() == n_, "TableWavefunction: configuration size mismatch");
    return {s.index(), log_amp_[static_cast<Eigen::Index>(s.index())]};
  }

  Complex log_psi(const SpinConfig& s) const { return log_amp_[static_cast<Eigen::Index>(s.index())]; }

  Complex ratio(const Cache& c, const SpinConfig&, std::span<const int> flips) const {
    return amp_[static_cast<Eigen::Index>(c.index ^ mask(flips))] / amp_[static_cast<Eigen::Index>(c.index)];
  }
  Complex ratio_flip(const Cache& c, const SpinConfig& s, int i) const {
    return ratio(c, s, std::span<const int>(&i, 1));
  }

  Complex log_psi_after(const Cache& c, const SpinConfig&, std::span<const int> flips) const {
    return log_amp_[static_cast<Eigen::Index>(c.index ^ mask(flips))];
  }

  void update_cache_flip(Cache& c, const SpinConfig&, int i) const {
    c.index ^= 1ULL << i;
    c.log_psi = log_amp_[static_cast<Eigen::Index>(c.index)];
  }

  void accumulate_derivatives(const Cache&, const SpinConfig&, Complex, Eigen::Ref<ComplexVector>) const {}

 private:
  static std::uint64_t mask(std::span<const int> flips) {
    std::uint64_t m = 0;
    for (int i : flips) m ^= 1ULL << i;
    return m;
  }
  static Complex safe_log(Complex z) {
    if (z == 0.0) return {-std::numeric_limits<Real>::infinity(), 0.0};
    return std::log(z);
  }

  int n_ = 0;
  ComplexVector amp_;
  ComplexVector log_amp_;
};

inline TableWavefunction table_wavefunction(const ComplexVector& v) { return TableWavefunction(v); }
inline TableWavefunction table_wavefunction(const RealVector& v) {
  return TableWavefunction(v.cast<Complex>());
}

}  // namespace nqes
