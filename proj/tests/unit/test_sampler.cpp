// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "oracles.hpp"

#include "nqes/ed.hpp"
#include "nqes/rbm.hpp"
#include "nqes/sampler.hpp"
#include "nqes/table_wavefunction.hpp"

#include <random>

using namespace nqes;

namespace {

RbmParams random_params(int n, int m, std::mt19937_64& rng, Real scale) {
  RbmParams p(n, m);
  std::normal_distribution<Real> g(0.0, scale);
  for (int i = 0; i < n; ++i) p.a[i] = Complex(g(rng), g(rng));
  for (int j = 0; j < m; ++j) p.b[j] = Complex(g(rng), g(rng));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) p.w(i, j) = Complex(g(rng), g(rng));
  }
  return p;
}

}  // namespace

TEST_CASE("zero networks accept every proposal") {
  const std::vector<Rbm> nets{Rbm(RbmParams(5, 2))};
  SlaterState<Rbm> st(nets, {SpinConfig(5)});
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) CHECK(metropolis_step(st, rng));
}

TEST_CASE("single network: empirical distribution matches |psi|^2") {
  std::mt19937_64 prng(2);
  const auto p = random_params(3, 2, prng, 0.6);
  const std::vector<Rbm> nets{Rbm(p)};
  const ComplexVector psi = oracle::rbm_state(p);
  const RealVector target = psi.cwiseAbs2() / psi.squaredNorm();

  SlaterState<Rbm> st(nets, {SpinConfig(3)});
  std::mt19937_64 rng(3);
  RealVector counts = RealVector::Zero(8);
  for (int t = 0; t < 1000; ++t) metropolis_step(st, rng);
  const int steps = 1000000;
  for (int t = 0; t < steps; ++t) {
    metropolis_step(st, rng);
    counts[static_cast<Eigen::Index>(st.replicas()[0].index())] += 1.0;
  }
  const Real tv = 0.5 * (counts / steps - target).cwiseAbs().sum();
  CHECK(tv < 0.01);
}

TEST_CASE("two exact states: empirical collective distribution matches |det|^2") {
  // Generic complex tables; eigenstates of symmetric models can split the
  // collective space into sectors that single flips do not connect.
  std::mt19937_64 trng(40);
  std::normal_distribution<Real> g;
  ComplexMatrix v(4, 2);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex(g(trng), g(trng));
  const std::vector<TableWavefunction> tabs{TableWavefunction(v.col(0)), TableWavefunction(v.col(1))};
  RealVector target(16);
  for (int idx = 0; idx < 16; ++idx) {
    const int a = idx & 3, b = idx >> 2;
    target[idx] = std::norm(v(a, 0) * v(b, 1) - v(a, 1) * v(b, 0));
  }
  target /= target.sum();

  SlaterState<TableWavefunction> st(tabs, {SpinConfig::from_string("00"), SpinConfig::from_string("01")});
  std::mt19937_64 rng(4);
  RealVector counts = RealVector::Zero(16);
  const int steps = 1000000;
  for (int t = 0; t < steps; ++t) {
    metropolis_step(st, rng);
    const auto idx = st.replicas()[0].index() | (st.replicas()[1].index() << 2);
    counts[static_cast<Eigen::Index>(idx)] += 1.0;
  }
  const Real tv = 0.5 * (counts / steps - target).cwiseAbs().sum();
  CHECK(tv < 0.01);
}

TEST_CASE("run_chains bookkeeping and determinism") {
  std::mt19937_64 prng(5);
  std::vector<Rbm> nets;
  for (int c = 0; c < 2; ++c) nets.emplace_back(random_params(6, 6, prng, 0.3));
  const auto h = build_tfim(6, 1.0);
  const std::vector<NamedObservable> obs{{"zz01", {PauliTerm::Kind::ZZ, 0, 1}}, {"x2", {PauliTerm::Kind::X, 2, 0}}};

  SamplerConfig cfg;
  cfg.n_chains = 3;
  cfg.n_therm_sweeps = 20;
  cfg.n_sample_sweeps = 40;
  cfg.sample_stride = 2;
  cfg.seed = 99;
  const auto a = run_chains(nets, h, obs, cfg);
  CHECK(a.count == 60);
  CHECK(a.k == 2);
  CHECK(a.derivs.rows() == 60);
  CHECK(a.derivs.cols() == static_cast<Eigen::Index>(2 * (6 + 6 + 36)));
  CHECK(a.obs.size() == 2);
  CHECK(a.obs[0].size() == 60);
  CHECK(a.chain.front() == 0);
  CHECK(a.chain.back() == 2);
  CHECK(a.acceptance_rate() > 0.0);
  CHECK(a.acceptance_rate() < 1.0);
  CHECK(a.proposals == 3LL * 40 * 12);

  const auto b = run_chains(nets, h, obs, cfg);
  CHECK(b.derivs == a.derivs);
  for (int p = 0; p < a.count; ++p) {
    CHECK(a.e_loc[p] == b.e_loc[p]);
    CHECK(a.obs[1][p] == b.obs[1][p]);
  }

  cfg.n_chains = 6;
  const auto c = run_chains(nets, h, obs, cfg);
  CHECK(c.count == 2 * a.count);
  // The first chains are unchanged when more are added.
  for (int p = 0; p < a.count; ++p) CHECK(c.e_loc[p] == a.e_loc[p]);

  // Warm starts hand back final configurations.
  std::vector<CollectiveConfig> starts;
  cfg.n_chains = 2;
  run_chains(nets, h, obs, cfg, &starts);
  CHECK(starts.size() == 2);
  CHECK(starts[0].size() == 2);
}

TEST_CASE("acceptance rate for random networks lies strictly inside (0, 1)") {
  std::mt19937_64 prng(6);
  const std::vector<Rbm> nets{Rbm(init_params(8, 8, prng))};
  SlaterState<Rbm> st(nets, {SpinConfig(8)});
  std::mt19937_64 rng(7);
  int acc = 0;
  for (int t = 0; t < 10000; ++t) acc += metropolis_step(st, rng) ? 1 : 0;
  CHECK(acc > 0);
  CHECK(acc < 10000);
}

TEST_CASE("exact ground state samples give the exact energy") {
  const auto h = build_tfim(8, 1.0);
  const auto ed = dense_spectrum(h, 1);
  const std::vector<TableWavefunction> g{table_wavefunction(RealVector(ed.vectors.col(0)))};
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_therm_sweeps = 5;
  cfg.n_sample_sweeps = 20;
  const auto b = run_chains(g, h, {}, cfg);
  for (const auto& e : b.e_loc) CHECK(std::abs(e(0, 0) - ed.energies[0]) < 1e-10);
  CHECK(b.derivs.cols() == 0);
}
