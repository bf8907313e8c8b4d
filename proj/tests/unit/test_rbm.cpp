// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "oracles.hpp"

#include "nqes/rbm.hpp"
#include "nqes/spin_models.hpp"

#include <random>

using namespace nqes;

namespace {

SpinConfig random_config(int n, std::mt19937_64& rng) {
  SpinConfig s(n);
  for (int i = 0; i < n; ++i) {
    if (rng() & 1) s.flip(i);
  }
  return s;
}

RbmParams random_params(int n, int m, std::mt19937_64& rng, Real scale = 0.5) {
  RbmParams p(n, m);
  std::normal_distribution<Real> g(0.0, scale);
  for (int i = 0; i < n; ++i) p.a[i] = Complex(g(rng), g(rng));
  for (int j = 0; j < m; ++j) p.b[j] = Complex(g(rng), g(rng));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) p.w(i, j) = Complex(g(rng), g(rng));
  }
  return p;
}

// Phases of log amplitudes are branch dependent; compare amplitudes instead.
bool same_log(Complex x, Complex y, Real tol) { return std::abs(std::exp(x - y) - 1.0) < tol; }

}  // namespace

TEST_CASE("init_params statistics and determinism") {
  std::mt19937_64 rng(17);
  const auto p = init_params(100, 300, rng);
  CHECK(p.size() == 100 + 300 + 30000);
  // Total complex variance of a over many draws.
  std::mt19937_64 rng2(18);
  Real acc = 0.0;
  int count = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const auto q = init_params(100, 300, rng2);
    acc += q.a.squaredNorm();
    count += 100;
  }
  const Real var = acc / count;
  CHECK(var > 0.007);
  CHECK(var < 0.013);
  CHECK(p.w.squaredNorm() / p.w.size() == doctest::Approx(1.0 / 30000).epsilon(0.05));
  CHECK(p.b.squaredNorm() / 300 == doctest::Approx(1.0 / 300).epsilon(0.25));
  // Real and imaginary parts carry half each.
  CHECK(p.w.real().squaredNorm() / p.w.size() == doctest::Approx(0.5 / 30000).epsilon(0.05));

  std::mt19937_64 r1(5), r2(5);
  CHECK(init_params(7, 3, r1) == init_params(7, 3, r2));
  std::mt19937_64 r3(1);
  CHECK(init_params(1, 1, r3).size() == 3);
}

TEST_CASE("flatten order is a, b, w row-major") {
  std::mt19937_64 rng(1);
  const auto p = random_params(3, 2, rng);
  const auto f = p.flatten();
  CHECK(f[0] == p.a[0]);
  CHECK(f[3] == p.b[0]);
  CHECK(f[5] == p.w(0, 0));
  CHECK(f[6] == p.w(0, 1));
  CHECK(f[7] == p.w(1, 0));
  CHECK(RbmParams::unflatten(3, 2, f) == p);
}

TEST_CASE("log_psi") {
  RbmParams zero(5, 8);
  for (std::uint64_t s = 0; s < 32; ++s) {
    CHECK(std::abs(log_psi(zero, SpinConfig::from_index(5, s)) - 8.0 * std::log(2.0)) < 1e-15);
  }

  std::mt19937_64 rng(21);
  const auto p = random_params(4, 3, rng);
  for (std::uint64_t s = 0; s < 16; ++s) {
    const auto cfg = SpinConfig::from_index(4, s);
    const Complex exact = oracle::rbm_amplitude_bruteforce(p, cfg);
    CHECK(std::abs(std::exp(log_psi(p, cfg)) / exact - 1.0) < 1e-12);
  }

  RbmParams phase(1, 0);
  phase.a[0] = Complex(0.0, kPi / 2.0);
  const Complex r = std::exp(log_psi(phase, SpinConfig::from_string("0")) - log_psi(phase, SpinConfig::from_string("1")));
  CHECK(std::abs(r - Complex(-1.0, 0.0)) < 1e-15);

  // Huge parameters stay finite.
  RbmParams big(2, 2);
  big.w.setConstant(Complex(400.0, 3.0));
  big.b.setConstant(Complex(-900.0, 1.0));
  const Complex lp = log_psi(big, SpinConfig::from_string("00"));
  CHECK(std::isfinite(lp.real()));
  CHECK(std::isfinite(lp.imag()));
  CHECK(log2cosh(Complex(-800.0, 0.0)).real() == doctest::Approx(800.0));
}

TEST_CASE("ratio and cache updates") {
  std::mt19937_64 rng(33);
  const Rbm zero(RbmParams(4, 3));
  auto zc = zero.make_cache(SpinConfig(4));
  CHECK(zero.ratio_flip(zc, SpinConfig(4), 2) == Complex(1.0, 0.0));

  const auto p = random_params(6, 4, rng);
  const Rbm net(p);
  for (int rep = 0; rep < 50; ++rep) {
    auto s = random_config(6, rng);
    auto c = net.make_cache(s);
    const int i = static_cast<int>(rng() % 6);
    const Complex r = net.ratio_flip(c, s, i);
    auto t = s;
    t.flip(i);
    CHECK(std::abs(r * std::exp(log_psi(p, s)) / std::exp(log_psi(p, t)) - 1.0) < 1e-10);

    // Two-site ratio.
    const int j = (i + 1 + static_cast<int>(rng() % 5)) % 6;
    const int f[2] = {i, j};
    auto u = s;
    u.flip(i);
    u.flip(j);
    CHECK(std::abs(net.ratio(c, s, f) * std::exp(log_psi(p, s)) / std::exp(log_psi(p, u)) - 1.0) < 1e-10);

    // Flip and flip back.
    const auto before = c;
    net.update_cache_flip(c, s, i);
    CHECK((c.tanh_theta - c.theta.array().tanh().matrix()).cwiseAbs().maxCoeff() < 1e-12);
    const Complex r2 = net.ratio_flip(c, t, i);
    CHECK(std::abs(r * r2 - 1.0) < 1e-10);
    net.update_cache_flip(c, t, i);
    CHECK((c.theta - before.theta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((c.tanh_theta - before.tanh_theta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(c.log_psi - before.log_psi) < 1e-12);
  }
}

TEST_CASE("long flip sequences stay consistent with recomputation") {
  std::mt19937_64 rng(44);
  const auto p = random_params(12, 24, rng, 0.3);
  const Rbm net(p, 100000);  // no periodic refresh inside this test
  auto s = random_config(12, rng);
  auto c = net.make_cache(s);
  for (int step = 0; step < 10000; ++step) {
    const int i = static_cast<int>(rng() % 12);
    net.update_cache_flip(c, s, i);
    s.flip(i);
  }
  const auto fresh = net.make_cache(s);
  CHECK((c.theta - fresh.theta).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(same_log(c.log_psi, fresh.log_psi, 1e-9));

  const Rbm refreshing(p, 1000);
  auto c2 = refreshing.make_cache(s);
  for (int step = 0; step < 999; ++step) {
    const int i = static_cast<int>(rng() % 12);
    refreshing.update_cache_flip(c2, s, i);
    s.flip(i);
  }
  CHECK(c2.flips_since_refresh == 999);
  refreshing.update_cache_flip(c2, s, 0);
  s.flip(0);
  CHECK(c2.flips_since_refresh == 0);
  CHECK(c2.log_psi == refreshing.make_cache(s).log_psi);
}

TEST_CASE("derivatives") {
  const Rbm zero(RbmParams(4, 3));
  const auto s0 = SpinConfig::from_string("0110");
  ComplexVector d0(zero.num_params());
  zero.derivatives(zero.make_cache(s0), s0, d0);
  CHECK(d0[0] == 1.0);
  CHECK(d0[1] == -1.0);
  CHECK(d0.tail(3 + 12).isZero());

  std::mt19937_64 rng(55);
  Real worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto p = random_params(4, 3, rng);
    const Rbm net(p);
    const auto s = random_config(4, rng);
    ComplexVector d(net.num_params());
    net.derivatives(net.make_cache(s), s, d);
    const auto flat = p.flatten();
    const Real h = 1e-5;
    for (Eigen::Index l = 0; l < flat.size(); ++l) {
      for (Complex dir : {Complex(1.0, 0.0), Complex(0.0, 1.0)}) {
        ComplexVector fp = flat, fm = flat;
        fp[l] += h * dir;
        fm[l] -= h * dir;
        const Complex lp = log_psi(RbmParams::unflatten(4, 3, fp), s);
        const Complex lm = log_psi(RbmParams::unflatten(4, 3, fm), s);
        // Holomorphic: d log psi / d(dir * t) = dir * D.
        const Complex fd = std::log(std::exp(lp - lm)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - dir * d[l]));
      }
    }
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(d[4 + 3 + i * 3 + j] == Real(s.spin(i)) * d[4 + j]);
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("even-site Z transform") {
  std::mt19937_64 rng(66);
  const auto p = random_params(4, 2, rng);
  const auto q = apply_even_site_z(p);
  const auto q2 = apply_even_site_z(q);
  CHECK(q.b == p.b);
  CHECK(q.w == p.w);
  CHECK(q.a[0] == p.a[0]);
  CHECK(q.a[1] == p.a[1] - Complex(0.0, kPi / 2));
  for (std::uint64_t x = 0; x < 16; ++x) {
    const auto s = SpinConfig::from_index(4, x);
    const Complex ratio = std::exp(log_psi(q, s) - log_psi(p, s));
    CHECK(std::abs(std::abs(ratio) - 1.0) < 1e-12);
    CHECK(std::abs(std::exp(log_psi(q2, s) - log_psi(p, s))) == doctest::Approx(1.0).epsilon(1e-12));
    const Complex expect = Complex(0.0, -Real(s.spin(1))) * Complex(0.0, -Real(s.spin(3)));
    CHECK(std::abs(ratio - expect) < 1e-12);
  }
  CHECK_THROWS_AS(apply_even_site_z(random_params(3, 2, rng)), ConstraintError);
}

TEST_CASE("transformed state under AFH matches original under XXZ") {
  std::mt19937_64 rng(77);
  const auto p = random_params(4, 2, rng);
  const ComplexVector psi = oracle::rbm_state(p);
  const ComplexVector phi = oracle::rbm_state(apply_even_site_z(p));
  const ComplexMatrix hx = oracle::kron_hamiltonian(build_xxz(4));
  const ComplexMatrix ha = oracle::kron_hamiltonian(build_afh(4));
  const Complex ex = psi.dot(hx * psi) / psi.squaredNorm();
  const Complex ea = phi.dot(ha * phi) / phi.squaredNorm();
  CHECK(std::abs(ex - ea) < 1e-10);
}

TEST_CASE("non-finite parameters are rejected") {
  RbmParams p(2, 1);
  p.w(0, 0) = Complex(std::numeric_limits<Real>::quiet_NaN(), 0.0);
  CHECK_THROWS_AS(Rbm{p}, NumericalError);
}
