// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "oracles.hpp"

#include "nqes/ed.hpp"
#include "nqes/rbm.hpp"
#include "nqes/sampler.hpp"
#include "nqes/sr.hpp"

#include <random>

using namespace nqes;

namespace {

ComplexMatrix random_complex(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<Real> g;
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = Complex(g(rng), g(rng));
  return m;
}

SampleBatch random_batch(int p, int l, std::mt19937_64& rng) {
  SampleBatch b;
  b.k = 1;
  b.count = p;
  b.derivs = random_complex(p, l, rng);
  for (int s = 0; s < p; ++s) b.e_loc.push_back(random_complex(1, 1, rng));
  return b;
}

// Every configuration once, weighted by |Psi|^2.
template <typename Wf>
SampleBatch exhaustive_batch(const std::vector<Wf>& nets, const Hamiltonian& h) {
  const int n = h.size();
  SampleBatch b;
  b.k = 1;
  std::vector<Real> w;
  ComplexVector d(static_cast<Eigen::Index>(nets[0].num_params()));
  std::vector<ComplexVector> rows;
  for (std::uint64_t s = 0; s < (1ULL << n); ++s) {
    SlaterState<Wf> st(nets, {SpinConfig::from_index(n, s)});
    b.e_loc.push_back(st.local_energy_matrix(h));
    st.ensemble_derivatives(d);
    rows.push_back(d);
    w.push_back(std::exp(2.0 * st.log_det().real()));
  }
  b.count = static_cast<int>(rows.size());
  b.derivs.resize(b.count, d.size());
  for (int s = 0; s < b.count; ++s) b.derivs.row(s) = rows[static_cast<std::size_t>(s)].transpose();
  b.weights = Eigen::Map<RealVector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return b;
}

struct Trace {
  std::vector<Real> energy;
  std::vector<Real> stderr_;
};

// Plain SR loop used to check end-to-end convergence.
std::vector<RbmParams> optimize(std::vector<RbmParams> params, const Hamiltonian& h, int iterations,
                                const SamplerConfig& base, const SrConfig& sr, Trace& trace) {
  std::vector<CollectiveConfig> chains;
  for (int p = 0; p < iterations; ++p) {
    std::vector<Rbm> nets;
    for (const auto& q : params) nets.emplace_back(q);
    SamplerConfig cfg = base;
    cfg.seed = derive_seed(base.seed, 1000 + p);
    if (p > 0) cfg.n_therm_sweeps = 2;
    const auto batch = run_chains(nets, h, {}, cfg, &chains);
    const ComplexVector e = batch.trace_energies();
    trace.energy.push_back(e.real().mean());
    params = sr_step(params, batch, sr, p);
  }
  return params;
}

Real mean_and_stderr(const std::vector<Rbm>& nets, const Hamiltonian& h, SamplerConfig cfg, Real& se,
                     ComplexMatrix* mean = nullptr) {
  cfg.record_derivatives = false;
  const auto b = run_chains(nets, h, {}, cfg);
  const RealVector e = b.trace_energies().real();
  // Error from chain means (chains are independent).
  RealVector cm = RealVector::Zero(cfg.n_chains), cnt = RealVector::Zero(cfg.n_chains);
  for (int s = 0; s < b.count; ++s) {
    cm[b.chain[s]] += e[s];
    cnt[b.chain[s]] += 1.0;
  }
  cm = cm.cwiseQuotient(cnt);
  const Real mu = cm.mean();
  se = std::sqrt((cm.array() - mu).square().sum() / (cfg.n_chains - 1) / cfg.n_chains);
  if (mean) *mean = b.mean_e_loc();
  return e.mean();
}

}  // namespace

TEST_CASE("forces") {
  std::mt19937_64 rng(1);
  auto b = random_batch(40, 12, rng);
  for (auto& e : b.e_loc) e(0, 0) = Complex(-3.0, 0.2);
  CHECK(forces(b).norm() < 1e-14);

  auto c = random_batch(40, 12, rng);
  const ComplexVector f1 = forces(c);
  for (auto& e : c.e_loc) e *= 2.0;
  CHECK((forces(c) - 2.0 * f1).norm() < 1e-12 * f1.norm());

  SampleBatch one = random_batch(1, 3, rng);
  CHECK_THROWS_AS(forces(one), ConstraintError);
}

TEST_CASE("forces equal the dense energy gradient on an exhaustive batch") {
  std::mt19937_64 rng(2);
  RbmParams p(3, 2);
  std::normal_distribution<Real> g(0.0, 0.4);
  for (int i = 0; i < 3; ++i) p.a[i] = Complex(g(rng), g(rng));
  for (int j = 0; j < 2; ++j) p.b[j] = Complex(g(rng), g(rng));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) p.w(i, j) = Complex(g(rng), g(rng));
  }
  const auto h = build_tfim(3, 0.8) + xx_operator(3, 0, 2).scaled(0.4);
  const std::vector<Rbm> nets{Rbm(p)};
  const auto batch = exhaustive_batch(nets, h);
  const ComplexVector f = forces(batch);

  // dE/dW* = (G^H H psi - E G^H psi) / |psi|^2.
  const ComplexVector psi = oracle::rbm_state(p);
  const ComplexMatrix G = oracle::rbm_state_gradient(p);
  const ComplexMatrix H = oracle::kron_hamiltonian(h);
  const Real norm = psi.squaredNorm();
  const Complex e = psi.dot(H * psi) / norm;
  const ComplexVector ref = (G.adjoint() * (H * psi) - e * (G.adjoint() * psi)) / norm;
  CHECK((f - ref).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(batch.mean_e_loc()(0, 0) - e) < 1e-12);
}

TEST_CASE("cov_matvec") {
  std::mt19937_64 rng(3);
  const auto b = random_batch(50, 30, rng);
  CHECK(cov_matvec(b, ComplexVector::Zero(30), 1e-3).norm() == 0.0);
  const ComplexMatrix dense = dense_covariance(b, 1e-3);
  Real worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const ComplexVector v = random_complex(30, 1, rng);
    worst = std::max(worst, (cov_matvec(b, v, 1e-3) - dense * v).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);

  // Independent dense covariance straight from the definition.
  ComplexMatrix c = ComplexMatrix::Zero(30, 30);
  ComplexVector mean = b.derivs.colwise().mean().transpose();
  for (int l = 0; l < 30; ++l) {
    for (int m = 0; m < 30; ++m) {
      Complex acc{};
      for (int s = 0; s < 50; ++s) acc += std::conj(b.derivs(s, l)) * b.derivs(s, m);
      c(l, m) = acc / 50.0 - std::conj(mean[l]) * mean[m];
    }
  }
  CHECK((c + 1e-3 * ComplexMatrix::Identity(30, 30) - dense).cwiseAbs().maxCoeff() < 1e-12);

  SampleBatch same = random_batch(20, 8, rng);
  for (int s = 1; s < 20; ++s) same.derivs.row(s) = same.derivs.row(0);
  const ComplexVector v = random_complex(8, 1, rng);
  CHECK((cov_matvec(same, v, 0.25) - 0.25 * v).norm() < 1e-12);

  for (int rep = 0; rep < 20; ++rep) {
    const ComplexVector u = random_complex(30, 1, rng), w = random_complex(30, 1, rng);
    CHECK(std::abs(u.dot(cov_matvec(b, w, 1e-3)) - cov_matvec(b, u, 1e-3).dot(w)) < 1e-10);
    CHECK(w.dot(cov_matvec(b, w, 1e-3)).real() >= 1e-3 * w.squaredNorm() - 1e-10);
  }
}

TEST_CASE("matrix-free and dense SR agree on a sampled batch") {
  std::mt19937_64 rng(4);
  std::vector<Rbm> nets;
  for (int c = 0; c < 2; ++c) nets.emplace_back(init_params(6, 6, rng));
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_therm_sweeps = 10;
  cfg.n_sample_sweeps = 100;
  const auto b = run_chains(nets, build_tfim(6, 1.0), {}, cfg);
  REQUIRE(b.derivs.cols() == 96);
  const ComplexMatrix dense = dense_covariance(b, 1e-3);
  for (int rep = 0; rep < 5; ++rep) {
    const ComplexVector v = random_complex(96, 1, rng);
    CHECK((cov_matvec(b, v, 1e-3) - dense * v).cwiseAbs().maxCoeff() < 1e-10);
  }
  // The Krylov solution matches the dense solve.
  SrConfig sr;
  sr.krylov_tol = 1e-12;
  sr.krylov_max_iter = 1000;
  SrWorkspace ws;
  SrStepInfo info;
  const ComplexVector upd = sr_update(b, sr, 0, ws, info);
  const ComplexVector ref = sr.learning_rate * dense.ldlt().solve(forces(b));
  CHECK(info.converged);
  CHECK((upd - ref).norm() < 1e-8 * ref.norm());
}

TEST_CASE("sr_step leaves parameters alone when the force vanishes") {
  std::mt19937_64 rng(5);
  auto b = random_batch(30, 3 + 2 + 6, rng);
  for (auto& e : b.e_loc) e(0, 0) = 1.0;
  const std::vector<RbmParams> ps{init_params(3, 2, rng)};
  SrStepInfo info;
  const auto out = sr_step(ps, b, SrConfig{}, 0, &info);
  CHECK(out[0] == ps[0]);
  CHECK_FALSE(info.skipped);
}

TEST_CASE("update clipping and schedules") {
  std::mt19937_64 rng(6);
  const auto b = random_batch(60, 10, rng);
  SrConfig sr;
  sr.max_update_norm = 1e-4;
  SrWorkspace ws;
  SrStepInfo info;
  const ComplexVector upd = sr_update(b, sr, 0, ws, info);
  CHECK(upd.norm() == doctest::Approx(1e-4));
  CHECK(info.clipped);

  SrConfig s2;
  s2.learning_rate = 0.1;
  s2.lr_decay_steps = 100.0;
  s2.lr_min = 0.01;
  CHECK(s2.learning_rate_at(0) == 0.1);
  CHECK(s2.learning_rate_at(100) == doctest::Approx(0.1 / std::exp(1.0)));
  CHECK(s2.learning_rate_at(100000) == 0.01);
  s2.diag_shift = 0.1;
  s2.diag_shift_decay = 0.9;
  s2.diag_shift_min = 1e-4;
  CHECK(s2.diag_shift_at(1) == doctest::Approx(0.09));
  CHECK(s2.diag_shift_at(1000) == 1e-4);
}

TEST_CASE("single-state TFIM n = 8 converges to the ED ground energy") {
  const int n = 8;
  const auto h = build_tfim(n, 1.0);
  const Real e0 = dense_spectrum(h, 1).energies[0];
  std::mt19937_64 rng(7);
  std::vector<RbmParams> ps{init_params(n, 2 * n, rng)};
  SamplerConfig cfg;
  cfg.n_chains = 4;
  cfg.n_therm_sweeps = 50;
  cfg.n_sample_sweeps = 500;
  cfg.seed = 8;
  SrConfig sr;
  Trace trace;
  ps = optimize(ps, h, 500, cfg, sr, trace);

  const std::vector<Rbm> nets{Rbm(ps[0])};
  SamplerConfig eval = cfg;
  eval.n_chains = 16;
  eval.n_sample_sweeps = 1000;
  eval.seed = 12345;
  Real se = 0.0;
  const Real e = mean_and_stderr(nets, h, eval, se);
  MESSAGE("E = " << e << " +- " << se << ", ED " << e0);
  CHECK(std::abs(e - e0) / std::abs(e0) < 1e-3 + 3.0 * se / std::abs(e0));
  CHECK(e > e0 - 3.0 * se);
  // The converged batch reproduces the ED energy within 3 standard errors.
  CHECK(std::abs(e - e0) < 3.0 * se + 1e-3 * std::abs(e0));
}

TEST_CASE("two-state TFIM n = 8 converges to E0 + E1") {
  const int n = 8;
  const auto h = build_tfim(n, 1.0);
  const auto ed = dense_spectrum(h, 2);
  std::mt19937_64 rng(9);
  std::vector<RbmParams> ps{init_params(n, 2 * n, rng), init_params(n, 2 * n, rng)};
  SamplerConfig cfg;
  cfg.n_chains = 4;
  cfg.n_therm_sweeps = 50;
  cfg.n_sample_sweeps = 500;
  cfg.seed = 10;
  Trace trace;
  ps = optimize(ps, h, 500, cfg, SrConfig{}, trace);

  std::vector<Rbm> nets;
  for (const auto& q : ps) nets.emplace_back(q);
  SamplerConfig eval = cfg;
  eval.n_chains = 16;
  eval.n_sample_sweeps = 1000;
  eval.seed = 54321;
  Real se = 0.0;
  const Real tr = mean_and_stderr(nets, h, eval, se);
  const Real target = ed.energies[0] + ed.energies[1];
  MESSAGE("Tr E = " << tr << " +- " << se << ", ED " << target << "; start " << trace.energy.front());
  CHECK(trace.energy.front() > trace.energy.back());
  CHECK(std::abs(tr - target) / std::abs(target) < 1e-3 + 3.0 * se / std::abs(target));
}
