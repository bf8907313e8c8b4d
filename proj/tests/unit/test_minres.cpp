// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "nqes/minres_qlp.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace nqes;

namespace {

ComplexMatrix random_complex(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<Real> g;
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = Complex(g(rng), g(rng));
  return m;
}

template <typename M>
auto dense_apply(const M& a) {
  return [&a](const auto& in, auto& out) { out.noalias() = a * in; };
}

}  // namespace

TEST_CASE("identity operator solves in one iteration") {
  std::mt19937_64 rng(1);
  const ComplexVector b = random_complex(20, 1, rng);
  ComplexVector x;
  const auto r = minres_qlp<Complex>([](const ComplexVector& in, ComplexVector& out) { out = in; }, b, x);
  CHECK(r.iterations == 1);
  CHECK((x - b).norm() < 1e-14);
  CHECK(r.converged);
}

TEST_CASE("zero right-hand side") {
  const ComplexVector b = ComplexVector::Zero(5);
  ComplexVector x;
  const auto r = minres_qlp<Complex>([](const ComplexVector& in, ComplexVector& out) { out = 2.0 * in; }, b, x);
  CHECK(r.iterations == 0);
  CHECK(x.norm() == 0.0);
}

TEST_CASE("Hermitian positive definite system matches a dense solve") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const ComplexMatrix g = random_complex(50, 50, rng);
    const ComplexMatrix a = g.adjoint() * g + 0.5 * ComplexMatrix::Identity(50, 50);
    const ComplexVector b = random_complex(50, 1, rng);
    ComplexVector x;
    MinresOptions opt;
    opt.tol = 1e-13;
    opt.max_iter = 500;
    const auto r = minres_qlp<Complex>(dense_apply(a), b, x, opt);
    const ComplexVector ref = a.ldlt().solve(b);
    CHECK(r.converged);
    CHECK((x - ref).norm() / ref.norm() < 1e-8);
    CHECK((a * x - b).norm() <= 1e-10 * b.norm());
  }
}

TEST_CASE("real symmetric indefinite system") {
  std::mt19937_64 rng(3);
  std::normal_distribution<Real> g;
  RealMatrix m(40, 40);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
  const RealMatrix a = m + m.transpose();
  RealVector b(40);
  for (int i = 0; i < 40; ++i) b[i] = g(rng);
  RealVector x;
  MinresOptions opt;
  opt.tol = 1e-12;
  opt.max_iter = 400;
  const auto r = minres_qlp<Real>(dense_apply(a), b, x, opt);
  CHECK(r.converged);
  CHECK((x - a.lu().solve(b)).norm() < 1e-8 * x.norm());
}

TEST_CASE("rank-deficient consistent system converges to the minimum-norm solution") {
  std::mt19937_64 rng(4);
  const int n = 40, rank = 25;
  const ComplexMatrix g = random_complex(n, rank, rng);
  const ComplexMatrix a = g * g.adjoint();  // PSD with a 15-dimensional null space
  const ComplexVector b = a * random_complex(n, 1, rng);
  ComplexVector x;
  MinresOptions opt;
  opt.tol = 1e-10;
  opt.max_iter = 400;
  const auto r = minres_qlp<Complex>(dense_apply(a), b, x, opt);
  CHECK((a * x - b).norm() <= 1e-10 * b.norm() * 10);
  CHECK(r.rel_residual <= opt.tol);

  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a);
  const Real cut = 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff();
  for (int k = 0; k < n; ++k) {
    if (std::abs(es.eigenvalues()[k]) < cut) CHECK(std::abs(es.eigenvectors().col(k).dot(x)) < 1e-6 * x.norm());
  }
  // Pseudo-inverse solution.
  ComplexVector pinv = ComplexVector::Zero(n);
  for (int k = 0; k < n; ++k) {
    if (std::abs(es.eigenvalues()[k]) >= cut) {
      pinv += es.eigenvectors().col(k) * (es.eigenvectors().col(k).dot(b) / es.eigenvalues()[k]);
    }
  }
  CHECK((x - pinv).norm() < 1e-8 * pinv.norm());
}

TEST_CASE("inconsistent singular system returns a least-squares solution") {
  RealMatrix a = RealMatrix::Zero(4, 4);
  a.diagonal() << 1.0, 2.0, 3.0, 0.0;
  RealVector b(4);
  b << 1.0, 1.0, 1.0, 1.0;
  RealVector x;
  MinresOptions opt;
  opt.tol = 1e-12;
  const auto r = minres_qlp<Real>(dense_apply(a), b, x, opt);
  CHECK(r.converged);
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(0.5));
  CHECK(x[2] == doctest::Approx(1.0 / 3.0));
  CHECK(std::abs(x[3]) < 1e-12);
}

TEST_CASE("iteration limit returns the current iterate with a flag") {
  std::mt19937_64 rng(5);
  const ComplexMatrix g = random_complex(60, 60, rng);
  const ComplexMatrix a = g.adjoint() * g + 1e-3 * ComplexMatrix::Identity(60, 60);
  const ComplexVector b = random_complex(60, 1, rng);
  ComplexVector x;
  MinresOptions opt;
  opt.tol = 1e-14;
  opt.max_iter = 5;
  const auto r = minres_qlp<Complex>(dense_apply(a), b, x, opt);
  CHECK(r.iterations == 5);
  CHECK(r.flag == 8);
  CHECK_FALSE(r.converged);
  CHECK((a * x - b).norm() < b.norm());
  CHECK(std::abs((a * x - b).norm() - r.residual_norm) < 1e-8 * b.norm());
}

TEST_CASE("non-finite input aborts") {
  ComplexVector b = ComplexVector::Ones(3);
  b[1] = Complex(std::numeric_limits<Real>::infinity(), 0.0);
  ComplexVector x;
  CHECK_THROWS_AS(minres_qlp<Complex>([](const ComplexVector& in, ComplexVector& out) { out = in; }, b, x),
                  NumericalError);
  const ComplexVector ok = ComplexVector::Ones(3);
  CHECK_THROWS_AS(minres_qlp<Complex>(
                      [](const ComplexVector& in, ComplexVector& out) {
                        out = in;
                        out[0] = Complex(std::nan(""), 0.0);
                      },
                      ok, x),
                  NumericalError);
}
