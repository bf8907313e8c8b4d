// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nqes/core.hpp"
#include "nqes/spin_models.hpp"

#include <concepts>
#include <span>

namespace nqes {

// What the determinant ensemble needs from a single-state wavefunction.
template <typename W>
concept Wavefunction = requires(const W& w, typename W::Cache& cache, const typename W::Cache& ccache,
                                const SpinConfig& s, std::span<const int> flips, int i,
                                Eigen::Ref<ComplexVector> out, Complex weight) {
  { w.num_visible() } -> std::convertible_to<int>;
  { w.num_params() } -> std::convertible_to<std::size_t>;
  { w.make_cache(s) } -> std::same_as<typename W::Cache>;
  { ccache.log_psi } -> std::convertible_to<Complex>;
  { w.ratio(ccache, s, flips) } -> std::same_as<Complex>;
  { w.log_psi_after(ccache, s, flips) } -> std::same_as<Complex>;
  w.update_cache_flip(cache, s, i);
  w.accumulate_derivatives(ccache, s, weight, out);
};

}  // namespace nqes
