// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Spectral post-processing of sampled local-energy and local-operator matrices.
//
// The sampled mean E = <Psi^-1 H Psi> is similar to diag(E_0, ..., E_{K-1})
// when the networks span the low-lying eigenspace. `transform` U satisfies
// U E U^-1 = diag(energies); its rows are left eigenvectors. State-resolved
// expectations of an operator are diag(U <Psi^-1 O Psi> U^-1).

#pragma once

#include "nqes/core.hpp"
#include "nqes/sampler.hpp"

#include <string>
#include <vector>

namespace nqes {

inline constexpr Real kIllConditioned = 1e8;

struct SpectralReport {
  RealVector energies;         // ascending real parts
  RealVector imag_residuals;   // |imaginary parts|, same order
  RealVector stderr;           // zeros unless computed from a batch
  ComplexMatrix transform;     // U
  ComplexMatrix right_vectors; // U^-1, columns are right eigenvectors
  Real transform_cond = 1.0;
  bool schur_fallback = false;
  std::vector<std::string> warnings;
};

struct StateValues {
  RealVector values;
  RealVector imag_residuals;
  RealVector stderr;
  bool ill_conditioned = false;
};

struct GapEstimate {
  Real value = 0.0;
  Real stderr = 0.0;
};

SpectralReport diagonalize_energy_matrix(const ComplexMatrix& e_loc_mean);

StateValues state_resolved_expectation(const ComplexMatrix& o_loc_mean, const SpectralReport& report);

GapEstimate gap(const SpectralReport& report);

// Sample groups used for error bars: chains if there are at least two,
// otherwise up to 10 contiguous blocks.
std::vector<std::vector<int>> jackknife_groups(const SampleBatch& batch);

// Diagonalizes the batch mean and attaches jackknife standard errors. Weighted
// (exhaustive) batches carry no sampling error.
SpectralReport spectral_report(const SampleBatch& batch);

// State-resolved expectations of every recorded observable, with jackknife
// standard errors computed consistently with `spectral_report`.
std::vector<StateValues> observable_report(const SampleBatch& batch);

std::string pair_observable_name(char axis, int i, int j);
std::string site_observable_name(char axis, int i);

struct CorrelationMap {
  RealMatrix value;
  RealMatrix stderr;
};

// <s_a^i s_a^j> for one state, assembled from the `pair_observable_name`
// observables of the batch. Missing pairs raise a ConfigError.
CorrelationMap correlation_map(const SampleBatch& batch, const std::vector<StateValues>& values, char axis,
                               int state, int n);

}  // namespace nqes
