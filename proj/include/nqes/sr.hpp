// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Stochastic reconfiguration:
//
//   W <- W - gamma (C + lambda I)^-1 F,
//   F_l  = <E D_l*> - <E><D_l*>,            E = Tr E_loc,
//   C_ll' = <D_l* D_l'> - <D_l*><D_l'>,
//
// with (C + lambda I) v applied from the P x L sample matrix D in two passes,
// never forming C.

#pragma once

#include "nqes/core.hpp"
#include "nqes/minres_qlp.hpp"
#include "nqes/rbm.hpp"
#include "nqes/sampler.hpp"

#include <optional>
#include <vector>

namespace nqes {

struct SrConfig {
  Real learning_rate = 0.02;
  Real lr_decay_steps = 0.0;   // gamma(p) = max(lr_min, gamma0 exp(-p / steps)); 0 disables
  Real lr_min = 0.0;
  Real diag_shift = 1e-3;      // lambda
  Real diag_shift_decay = 1.0; // lambda(p) = max(lambda_min, lambda0 decay^p)
  Real diag_shift_min = 1e-3;
  Real krylov_tol = 1e-6;
  int krylov_max_iter = 200;
  std::optional<Real> max_update_norm;
  int max_retries = 3;         // lambda doublings after a solver failure

  Real learning_rate_at(int p) const;
  Real diag_shift_at(int p) const;
};

// Scratch reused across iterations; every vector has length L or P.
struct SrWorkspace {
  ComplexVector mean_d;   // <D>
  ComplexVector force;    // F
  ComplexVector t;        // P-length scratch for D v
  RealVector w;           // normalized sample weights
};

// <D> and the normalized weights for `batch`, stored in `ws`.
void prepare_workspace(const SampleBatch& batch, SrWorkspace& ws);

ComplexVector forces(const SampleBatch& batch);
void forces(const SampleBatch& batch, SrWorkspace& ws);

// out = (C + lambda I) v. Requires prepare_workspace(batch, ws).
void cov_matvec(const SampleBatch& batch, const SrWorkspace& ws, const ComplexVector& v, Real lambda,
                ComplexVector& out, ComplexVector& t);
ComplexVector cov_matvec(const SampleBatch& batch, const ComplexVector& v, Real lambda);

// Dense C + lambda I, for small calibration cases only.
ComplexMatrix dense_covariance(const SampleBatch& batch, Real lambda);

struct SrStepInfo {
  Real learning_rate = 0.0;
  Real diag_shift = 0.0;   // lambda actually used
  int krylov_iters = 0;
  Real residual = 0.0;     // relative residual of the Krylov solve
  int solver_flag = 0;
  bool converged = false;
  bool skipped = false;
  int retries = 0;
  Real update_norm = 0.0;
  bool clipped = false;
};

// Natural-gradient direction gamma(p) v with (C + lambda I) v = F. On a
// solver abort lambda is doubled and the solve retried up to max_retries
// times; if all fail the step is skipped and the returned update is zero.
ComplexVector sr_update(const SampleBatch& batch, const SrConfig& cfg, int p, SrWorkspace& ws, SrStepInfo& info);

// Applies W <- W - update to a list of networks (network-major blocks).
std::vector<RbmParams> apply_update(const std::vector<RbmParams>& params, const ComplexVector& update);

std::vector<RbmParams> sr_step(const std::vector<RbmParams>& params, const SampleBatch& batch, const SrConfig& cfg,
                               int p, SrStepInfo* info = nullptr);

}  // namespace nqes
