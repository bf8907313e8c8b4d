// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqes/sr.hpp"

#include <algorithm>
#include <cmath>

namespace nqes {

Real SrConfig::learning_rate_at(int p) const {
  if (lr_decay_steps <= 0.0) return learning_rate;
  return std::max(lr_min, learning_rate * std::exp(-static_cast<Real>(p) / lr_decay_steps));
}

Real SrConfig::diag_shift_at(int p) const {
  if (diag_shift_decay == 1.0) return diag_shift;
  return std::max(diag_shift_min, diag_shift * std::pow(diag_shift_decay, static_cast<Real>(p)));
}

void prepare_workspace(const SampleBatch& batch, SrWorkspace& ws) {
  require(batch.count >= 2, "sr: need at least two samples");
  require_dims(batch.derivs.rows() == batch.count, "sr: batch has no derivative rows");
  ws.w = batch.normalized_weights();
  ws.mean_d.noalias() = batch.derivs.transpose() * ws.w.cast<Complex>();
  ws.t.resize(batch.count);
}

void forces(const SampleBatch& batch, SrWorkspace& ws) {
  prepare_workspace(batch, ws);
  const ComplexVector e = batch.trace_energies();
  const Complex mean_e = (ws.w.cast<Complex>().array() * e.array()).sum();
  // F = D^H diag(w) (E - <E>), which equals <E D*> - <E><D*>.
  ws.t = ws.w.cast<Complex>().cwiseProduct(e.array().matrix() - ComplexVector::Constant(batch.count, mean_e));
  ws.force.noalias() = batch.derivs.adjoint() * ws.t;
}

ComplexVector forces(const SampleBatch& batch) {
  SrWorkspace ws;
  forces(batch, ws);
  return ws.force;
}

void cov_matvec(const SampleBatch& batch, const SrWorkspace& ws, const ComplexVector& v, Real lambda,
                ComplexVector& out, ComplexVector& t) {
  require_dims(v.size() == batch.derivs.cols(), "cov_matvec: vector length");
  // Pass 1: t_s = w_s (D_s . v - <D> . v).
  t.noalias() = batch.derivs * v;
  const Complex mv = (ws.mean_d.transpose() * v).value();
  t.array() = (t.array() - mv) * ws.w.array();
  // Pass 2: out = D^H t + lambda v. The centering of D^H drops out because sum_s t_s = 0.
  out.noalias() = batch.derivs.adjoint() * t;
  out += lambda * v;
}

ComplexVector cov_matvec(const SampleBatch& batch, const ComplexVector& v, Real lambda) {
  SrWorkspace ws;
  prepare_workspace(batch, ws);
  ComplexVector out(v.size());
  cov_matvec(batch, ws, v, lambda, out, ws.t);
  return out;
}

ComplexMatrix dense_covariance(const SampleBatch& batch, Real lambda) {
  const RealVector w = batch.normalized_weights();
  const auto L = batch.derivs.cols();
  ComplexMatrix c = ComplexMatrix::Zero(L, L);
  ComplexVector mean = ComplexVector::Zero(L);
  for (int s = 0; s < batch.count; ++s) {
    const ComplexVector d = batch.derivs.row(s).transpose();
    c += w[s] * d.conjugate() * d.transpose();
    mean += w[s] * d;
  }
  c -= mean.conjugate() * mean.transpose();
  c += lambda * ComplexMatrix::Identity(L, L);
  return c;
}

ComplexVector sr_update(const SampleBatch& batch, const SrConfig& cfg, int p, SrWorkspace& ws, SrStepInfo& info) {
  require(cfg.diag_shift > 0.0 && cfg.krylov_tol > 0.0 && cfg.krylov_max_iter >= 1, "sr: invalid configuration");
  forces(batch, ws);
  info = SrStepInfo{};
  info.learning_rate = cfg.learning_rate_at(p);
  const auto L = batch.derivs.cols();
  ComplexVector v = ComplexVector::Zero(L);
  if (!ws.force.allFinite()) {
    info.skipped = true;
    return v;
  }
  if (ws.force.squaredNorm() == 0.0) {
    info.converged = true;
    return v;
  }

  Real lambda = cfg.diag_shift_at(p);
  ComplexVector t(batch.count);
  MinresOptions mo;
  mo.tol = cfg.krylov_tol;
  mo.max_iter = cfg.krylov_max_iter;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    info.diag_shift = lambda;
    info.retries = attempt;
    try {
      const auto r = minres_qlp<Complex>(
          [&](const ComplexVector& in, ComplexVector& out) { cov_matvec(batch, ws, in, lambda, out, t); }, ws.force,
          v, mo);
      info.krylov_iters = r.iterations;
      info.residual = r.rel_residual;
      info.solver_flag = r.flag;
      // An iteration-limit exit still returns the minimum-residual iterate.
      info.converged = r.converged;
      if (v.allFinite()) {
        info.update_norm = v.norm() * info.learning_rate;
        if (cfg.max_update_norm && v.norm() * info.learning_rate > *cfg.max_update_norm) {
          v *= *cfg.max_update_norm / (v.norm() * info.learning_rate);
          info.clipped = true;
        }
        return info.learning_rate * v;
      }
    } catch (const NumericalError&) {
    }
    lambda *= 2.0;
  }
  info.skipped = true;
  return ComplexVector::Zero(L);
}

std::vector<RbmParams> apply_update(const std::vector<RbmParams>& params, const ComplexVector& update) {
  std::vector<RbmParams> out;
  out.reserve(params.size());
  Eigen::Index off = 0;
  for (const auto& p : params) {
    const auto len = static_cast<Eigen::Index>(p.size());
    require_dims(off + len <= update.size(), "apply_update: update too short");
    out.push_back(RbmParams::unflatten(p.n, p.m, p.flatten() - update.segment(off, len)));
    off += len;
  }
  require_dims(off == update.size(), "apply_update: update length mismatch");
  return out;
}

std::vector<RbmParams> sr_step(const std::vector<RbmParams>& params, const SampleBatch& batch, const SrConfig& cfg,
                               int p, SrStepInfo* info) {
  SrWorkspace ws;
  SrStepInfo local;
  const ComplexVector upd = sr_update(batch, cfg, p, ws, local);
  if (info) *info = local;
  return apply_update(params, upd);
}

}  // namespace nqes
