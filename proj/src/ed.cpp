// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqes/ed.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace nqes {

namespace {

Eigen::Index dimension(const Hamiltonian& h, int cap, const char* what) {
  if (h.size() > cap) {
    throw CapacityError(std::string(what) + ": n = " + std::to_string(h.size()) + " exceeds the limit of " +
                        std::to_string(cap));
  }
  return Eigen::Index{1} << h.size();
}

std::uint64_t flip_mask(const FlipSet& fs) {
  std::uint64_t m = 0;
  for (int i : fs.span()) m ^= std::uint64_t{1} << i;
  return m;
}

}  // namespace

RealVector diagonal_elements(const Hamiltonian& h) {
  const auto dim = dimension(h, kLanczosMaxSpins, "diagonal_elements");
  RealVector d(dim);
#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < dim; ++s) {
    d[s] = h.diag_energy(SpinConfig::from_index(h.size(), static_cast<std::uint64_t>(s)));
  }
  return d;
}

void apply_hamiltonian(const Hamiltonian& h, const RealVector& diag, const RealVector& x, RealVector& y) {
  const auto dim = diag.size();
  require_dims(x.size() == dim, "apply_hamiltonian: vector length");
  y.resize(dim);
  const int n = h.size();
#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < dim; ++s) {
    const SpinConfig cfg = SpinConfig::from_index(n, static_cast<std::uint64_t>(s));
    Real acc = diag[s] * x[s];
    h.for_each_connection(cfg, [&](const FlipSet& fs, Real amp) {
      acc += amp * x[static_cast<Eigen::Index>(static_cast<std::uint64_t>(s) ^ flip_mask(fs))];
    });
    y[s] = acc;
  }
}

RealMatrix dense_matrix(const Hamiltonian& h) {
  const auto dim = dimension(h, kDenseMaxSpins, "dense_matrix");
  RealMatrix m = RealMatrix::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    const SpinConfig cfg = SpinConfig::from_index(h.size(), static_cast<std::uint64_t>(s));
    m(s, s) = h.diag_energy(cfg);
    h.for_each_connection(cfg, [&](const FlipSet& fs, Real amp) {
      m(static_cast<Eigen::Index>(static_cast<std::uint64_t>(s) ^ flip_mask(fs)), s) += amp;
    });
  }
  return m;
}

SpectrumResult dense_spectrum(const Hamiltonian& h, int k) {
  const auto dim = dimension(h, kDenseMaxSpins, "dense_spectrum");
  require(k >= 1 && k <= dim, "dense_spectrum: k must lie in [1, 2^n]");
  const RealMatrix m = dense_matrix(h);
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("dense_spectrum: eigensolver failed");
  SpectrumResult out;
  out.n = h.size();
  out.k = k;
  out.energies = es.eigenvalues().head(k);
  out.vectors = es.eigenvectors().leftCols(k);
  out.residuals.resize(k);
  for (int j = 0; j < k; ++j) {
    out.residuals[j] = (m * out.vectors.col(j) - out.energies[j] * out.vectors.col(j)).norm();
  }
  return out;
}

SpectrumResult lanczos_spectrum(const Hamiltonian& h, int k, const LanczosOptions& opt) {
  const auto dim = dimension(h, kLanczosMaxSpins, "lanczos_spectrum");
  require(k >= 1 && k <= dim, "lanczos_spectrum: k must lie in [1, 2^n]");
  const RealVector diag = diagonal_elements(h);

  int mmax = opt.basis_size > 0 ? opt.basis_size : std::max(2 * k + 24, 40);
  mmax = static_cast<int>(std::min<Eigen::Index>(mmax, dim));
  const int keep = std::min(mmax - 1, k + std::max(4, (mmax - k) / 2));

  RealMatrix V(dim, mmax), W(dim, mmax);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<Real> normal;
  RealVector v(dim), w(dim);
  for (Eigen::Index s = 0; s < dim; ++s) v[s] = normal(rng);
  v.normalize();

  // Two Gram-Schmidt passes against the first `cols` basis vectors.
  auto orthonormalize = [&](RealVector& x, int cols) {
    for (int pass = 0; pass < 2; ++pass) {
      if (cols > 0) x.noalias() -= V.leftCols(cols) * (V.leftCols(cols).transpose() * x);
    }
    return x.norm();
  };

  int m = 0;
  int matvecs = 0;
  RealVector theta;
  RealMatrix Y;
  Eigen::SelfAdjointEigenSolver<RealMatrix> es;
  RealVector res(k);

  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    while (m < mmax) {
      V.col(m) = v;
      apply_hamiltonian(h, diag, v, w);
      ++matvecs;
      W.col(m) = w;
      ++m;
      if (m == dim) break;
      v = w;
      Real nv = orthonormalize(v, m);
      if (nv < 1e-12) {
        // Invariant subspace found: continue with a fresh random direction.
        for (Eigen::Index s = 0; s < dim; ++s) v[s] = normal(rng);
        nv = orthonormalize(v, m);
      }
      v /= nv;
    }

    const RealMatrix T = V.leftCols(m).transpose() * W.leftCols(m);
    es.compute(0.5 * (T + T.transpose()));
    theta = es.eigenvalues();
    Y = es.eigenvectors();

    const int kk = std::min<int>(k, m);
    bool converged = kk == k;
    for (int j = 0; j < kk; ++j) {
      const RealVector r = W.leftCols(m) * Y.col(j) - theta[j] * (V.leftCols(m) * Y.col(j));
      res[j] = r.norm();
      if (res[j] > opt.tol * std::max<Real>(1.0, std::abs(theta[j]))) converged = false;
    }
    if (converged || m == dim) break;
    if (restart == opt.max_restarts) {
      throw ConvergenceError("lanczos_spectrum: no convergence after " + std::to_string(matvecs) +
                             " matrix-vector products; worst residual " + std::to_string(res.maxCoeff()));
    }

    // Continuation direction: H v_last orthogonalized against the basis; every
    // Ritz residual lies along it.
    v = W.col(m - 1);
    Real nv = orthonormalize(v, m);
    if (nv < 1e-12) {
      for (Eigen::Index s = 0; s < dim; ++s) v[s] = normal(rng);
      nv = orthonormalize(v, m);
    }
    v /= nv;

    const int p = std::min(keep, m);
    const RealMatrix Vp = V.leftCols(m) * Y.leftCols(p);
    const RealMatrix Wp = W.leftCols(m) * Y.leftCols(p);
    V.leftCols(p) = Vp;
    W.leftCols(p) = Wp;
    m = p;
    // Ritz vectors are orthonormal only to rounding; re-project v.
    nv = orthonormalize(v, m);
    v /= nv;
  }

  SpectrumResult out;
  out.n = h.size();
  out.k = k;
  out.iterations = matvecs;
  out.energies = theta.head(k);
  out.vectors = V.leftCols(m) * Y.leftCols(k);
  out.residuals.resize(k);
  for (int j = 0; j < k; ++j) {
    out.vectors.col(j).normalize();
    apply_hamiltonian(h, diag, out.vectors.col(j), w);
    out.residuals[j] = (w - out.energies[j] * out.vectors.col(j)).norm();
  }
  return out;
}

SpectrumResult ground_spectrum(const Hamiltonian& h, int k) {
  return h.size() <= kDenseMaxSpins ? dense_spectrum(h, k) : lanczos_spectrum(h, k);
}

namespace {

template <typename Vec>
Real correlation_impl(const Vec& v, int i, int j, char axis) {
  const int n = [&] {
    int b = 0;
    while ((Eigen::Index{1} << b) < v.size()) ++b;
    return b;
  }();
  require_dims((Eigen::Index{1} << n) == v.size(), "exact_correlation: vector length must be 2^n");
  require_dims(i >= 0 && j >= 0 && i < n && j < n, "exact_correlation: site out of range");
  require(axis == 'x' || axis == 'y' || axis == 'z', "exact_correlation: axis must be x, y or z");
  const Real norm2 = v.squaredNorm();
  if (i == j) return 1.0;
  const std::uint64_t mask = (std::uint64_t{1} << i) | (std::uint64_t{1} << j);
  Real acc = 0.0;
  for (Eigen::Index s = 0; s < v.size(); ++s) {
    const auto u = static_cast<std::uint64_t>(s);
    const Real sisj = (((u >> i) ^ (u >> j)) & 1) ? -1.0 : 1.0;
    if (axis == 'z') {
      acc += std::norm(v[s]) * sisj;
    } else {
      // X_i X_j |s> = |s'>,  Y_i Y_j |s> = -s_i s_j |s'>.
      const Real sign = axis == 'x' ? 1.0 : -sisj;
      acc += sign * std::real(std::conj(Complex(v[static_cast<Eigen::Index>(u ^ mask)])) * Complex(v[s]));
    }
  }
  return acc / norm2;
}

}  // namespace

Real exact_correlation(const ComplexVector& v, int i, int j, char axis) { return correlation_impl(v, i, j, axis); }
Real exact_correlation(const RealVector& v, int i, int j, char axis) { return correlation_impl(v, i, j, axis); }

Real exact_expectation(const RealVector& v, const Hamiltonian& op) {
  const RealVector diag = diagonal_elements(op);
  RealVector y;
  apply_hamiltonian(op, diag, v, y);
  return v.dot(y) / v.squaredNorm();
}

}  // namespace nqes
