// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqes/postprocess.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace nqes {

namespace {

Real condition_number(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& s = svd.singularValues();
  const Real smin = s[s.size() - 1];
  return smin > 0.0 ? s[0] / smin : std::numeric_limits<Real>::infinity();
}

std::vector<int> ascending_order(const ComplexVector& ev) {
  std::vector<int> order(static_cast<std::size_t>(ev.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ev[a].real() < ev[b].real(); });
  return order;
}

}  // namespace

SpectralReport diagonalize_energy_matrix(const ComplexMatrix& e) {
  require_dims(e.rows() == e.cols() && e.rows() > 0, "diagonalize_energy_matrix: need a square matrix");
  if (!e.allFinite()) throw NumericalError("diagonalize_energy_matrix: non-finite input");
  const auto k = e.rows();
  SpectralReport r;
  r.stderr = RealVector::Zero(k);

  Eigen::ComplexEigenSolver<ComplexMatrix> es(e);
  bool defective = es.info() != Eigen::Success;
  ComplexVector ev;
  ComplexMatrix v;
  if (!defective) {
    ev = es.eigenvalues();
    v = es.eigenvectors();
    r.transform_cond = condition_number(v);
    defective = !(r.transform_cond < 1e12);
  }
  if (defective) {
    Eigen::ComplexSchur<ComplexMatrix> schur(e);
    ev = schur.matrixT().diagonal();
    v = schur.matrixU();
    r.transform_cond = 1.0;
    r.schur_fallback = true;
    r.warnings.push_back("energy matrix is defective within tolerance; using Schur vectors");
  }
  const auto order = ascending_order(ev);
  r.energies.resize(k);
  r.imag_residuals.resize(k);
  r.right_vectors.resize(k, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const int src = order[static_cast<std::size_t>(c)];
    r.energies[c] = ev[src].real();
    r.imag_residuals[c] = std::abs(ev[src].imag());
    r.right_vectors.col(c) = v.col(src);
  }
  r.transform = r.schur_fallback ? ComplexMatrix(r.right_vectors.adjoint()) : ComplexMatrix(r.right_vectors.inverse());
  if (r.transform_cond > kIllConditioned) {
    r.warnings.push_back("eigenvector matrix condition number " + std::to_string(r.transform_cond));
  }
  return r;
}

StateValues state_resolved_expectation(const ComplexMatrix& o, const SpectralReport& report) {
  require_dims(o.rows() == report.transform.rows() && o.cols() == report.transform.cols(),
               "state_resolved_expectation: operator and transform sizes differ");
  const ComplexVector d = (report.transform * o * report.right_vectors).diagonal();
  StateValues s;
  s.values = d.real();
  s.imag_residuals = d.imag().cwiseAbs();
  s.stderr = RealVector::Zero(d.size());
  s.ill_conditioned = report.transform_cond > kIllConditioned;
  return s;
}

GapEstimate gap(const SpectralReport& report) {
  require(report.energies.size() >= 2, "gap: need at least two states");
  GapEstimate g;
  g.value = report.energies[1] - report.energies[0];
  if (report.stderr.size() >= 2) g.stderr = std::hypot(report.stderr[0], report.stderr[1]);
  return g;
}

std::vector<std::vector<int>> jackknife_groups(const SampleBatch& batch) {
  std::vector<std::vector<int>> groups;
  if (batch.count == 0) return groups;
  if (static_cast<int>(batch.chain.size()) == batch.count) {
    std::vector<int> ids(batch.chain);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() >= 2) {
      std::unordered_map<int, std::size_t> slot;
      for (std::size_t g = 0; g < ids.size(); ++g) slot[ids[g]] = g;
      groups.resize(ids.size());
      for (int p = 0; p < batch.count; ++p) groups[slot[batch.chain[static_cast<std::size_t>(p)]]].push_back(p);
      return groups;
    }
  }
  const int nb = std::min(10, batch.count);
  groups.resize(static_cast<std::size_t>(nb));
  for (int p = 0; p < batch.count; ++p) groups[static_cast<std::size_t>(static_cast<long long>(p) * nb / batch.count)].push_back(p);
  return groups;
}

namespace {

// Per-group weighted sums of a matrix series and the total weight per group.
struct GroupSums {
  std::vector<ComplexMatrix> sum;
  std::vector<Real> weight;
};

GroupSums group_sums(const SampleBatch& b, const std::vector<ComplexMatrix>& mats,
                     const std::vector<std::vector<int>>& groups) {
  GroupSums g;
  const bool weighted = b.weights.size() > 0;
  for (const auto& idx : groups) {
    ComplexMatrix s = ComplexMatrix::Zero(b.k, b.k);
    Real w = 0.0;
    for (int p : idx) {
      const Real wp = weighted ? b.weights[p] : 1.0;
      s += wp * mats[static_cast<std::size_t>(p)];
      w += wp;
    }
    g.sum.push_back(std::move(s));
    g.weight.push_back(w);
  }
  return g;
}

ComplexMatrix total(const GroupSums& g, std::size_t skip) {
  ComplexMatrix s = ComplexMatrix::Zero(g.sum[0].rows(), g.sum[0].cols());
  Real w = 0.0;
  for (std::size_t i = 0; i < g.sum.size(); ++i) {
    if (i == skip) continue;
    s += g.sum[i];
    w += g.weight[i];
  }
  return s / w;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

RealVector jackknife_stderr(const std::vector<RealVector>& reps) {
  const auto m = static_cast<Real>(reps.size());
  RealVector mean = RealVector::Zero(reps[0].size());
  for (const auto& r : reps) mean += r;
  mean /= m;
  RealVector var = RealVector::Zero(mean.size());
  for (const auto& r : reps) var += (r - mean).cwiseAbs2();
  return ((m - 1.0) / m * var).cwiseSqrt();
}

bool has_error_bars(const SampleBatch& b, const std::vector<std::vector<int>>& groups) {
  return b.weights.size() == 0 && groups.size() >= 2;
}

}  // namespace

SpectralReport spectral_report(const SampleBatch& batch) {
  require(batch.count > 0, "spectral_report: empty batch");
  SpectralReport r = diagonalize_energy_matrix(batch.mean_e_loc());
  const auto groups = jackknife_groups(batch);
  if (!has_error_bars(batch, groups)) return r;
  const auto sums = group_sums(batch, batch.e_loc, groups);
  std::vector<RealVector> reps;
  for (std::size_t g = 0; g < groups.size(); ++g) reps.push_back(diagonalize_energy_matrix(total(sums, g)).energies);
  r.stderr = jackknife_stderr(reps);
  return r;
}

std::vector<StateValues> observable_report(const SampleBatch& batch) {
  const SpectralReport full = diagonalize_energy_matrix(batch.mean_e_loc());
  std::vector<StateValues> out;
  for (const auto& series : batch.obs) out.push_back(state_resolved_expectation(batch.weighted_mean(series), full));
  const auto groups = jackknife_groups(batch);
  if (!has_error_bars(batch, groups) || batch.obs.empty()) return out;
  const auto esums = group_sums(batch, batch.e_loc, groups);
  std::vector<SpectralReport> reports;
  for (std::size_t g = 0; g < groups.size(); ++g) reports.push_back(diagonalize_energy_matrix(total(esums, g)));
  for (std::size_t q = 0; q < batch.obs.size(); ++q) {
    const auto osums = group_sums(batch, batch.obs[q], groups);
    std::vector<RealVector> reps;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      reps.push_back(state_resolved_expectation(total(osums, g), reports[g]).values);
    }
    out[q].stderr = jackknife_stderr(reps);
  }
  return out;
}

std::string pair_observable_name(char axis, int i, int j) {
  return std::string(2, axis) + "_" + std::to_string(i) + "_" + std::to_string(j);
}

std::string site_observable_name(char axis, int i) { return std::string(1, axis) + "_" + std::to_string(i); }

CorrelationMap correlation_map(const SampleBatch& batch, const std::vector<StateValues>& values, char axis,
                               int state, int n) {
  require_dims(values.size() == batch.obs_names.size(), "correlation_map: values do not match the batch observables");
  require(state >= 0 && state < batch.k, "correlation_map: state index out of range");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t q = 0; q < batch.obs_names.size(); ++q) index[batch.obs_names[q]] = q;
  CorrelationMap m;
  m.value = RealMatrix::Identity(n, n);
  m.stderr = RealMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto it = index.find(pair_observable_name(axis, i, j));
      if (it == index.end()) throw ConfigError("correlation_map: observable " + pair_observable_name(axis, i, j) + " was not recorded");
      const auto& v = values[it->second];
      m.value(i, j) = m.value(j, i) = v.values[state];
      m.stderr(i, j) = m.stderr(j, i) = v.stderr[state];
    }
  }
  return m;
}

}  // namespace nqes
