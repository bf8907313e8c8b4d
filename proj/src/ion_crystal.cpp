// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqes/ion_crystal.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nqes {

void TrapParams::validate() const {
  require(n_ions >= 1, "trap: need at least one ion");
  require(omega_z > 0.0 && omega_x > omega_z && omega_y > omega_x,
          "trap: need omega_y > omega_x > omega_z > 0 for a planar crystal in the xz plane");
}

Real crystal_energy(const RealVector& q, Real rx) {
  const Eigen::Index n = q.size() / 2;
  Real e = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    e += 0.5 * (rx * rx * q[2 * i] * q[2 * i] + q[2 * i + 1] * q[2 * i + 1]);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      e += 1.0 / std::hypot(q[2 * i] - q[2 * j], q[2 * i + 1] - q[2 * j + 1]);
    }
  }
  return e;
}

RealVector crystal_gradient(const RealVector& q, Real rx) {
  const Eigen::Index n = q.size() / 2;
  RealVector g(q.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    g[2 * i] = rx * rx * q[2 * i];
    g[2 * i + 1] = q[2 * i + 1];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Real dx = q[2 * i] - q[2 * j], dz = q[2 * i + 1] - q[2 * j + 1];
      const Real d = std::hypot(dx, dz);
      const Real f = 1.0 / (d * d * d);
      g[2 * i] -= f * dx;
      g[2 * i + 1] -= f * dz;
      g[2 * j] += f * dx;
      g[2 * j + 1] += f * dz;
    }
  }
  return g;
}

RealMatrix crystal_hessian(const RealVector& q, Real rx) {
  const Eigen::Index n = q.size() / 2;
  RealMatrix h = RealMatrix::Zero(q.size(), q.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    h(2 * i, 2 * i) = rx * rx;
    h(2 * i + 1, 2 * i + 1) = 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Real r[2] = {q[2 * i] - q[2 * j], q[2 * i + 1] - q[2 * j + 1]};
      const Real d2 = r[0] * r[0] + r[1] * r[1];
      const Real d = std::sqrt(d2);
      const Real inv3 = 1.0 / (d2 * d), inv5 = inv3 / d2;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          // d^2 (1/d) / dr_a dr_b = 3 r_a r_b / d^5 - delta_ab / d^3.
          const Real block = 3.0 * r[a] * r[b] * inv5 - (a == b ? inv3 : 0.0);
          h(2 * i + a, 2 * i + b) += block;
          h(2 * j + a, 2 * j + b) += block;
          h(2 * i + a, 2 * j + b) -= block;
          h(2 * j + a, 2 * i + b) -= block;
        }
      }
    }
  }
  return h;
}

namespace {

// Triangular lattice points inside an ellipse, scaled to the expected size,
// with a small random jitter.
RealVector initial_guess(int n, Real rx, std::mt19937_64& rng) {
  // Radius of a 2D crystal with n ions in a unit harmonic trap ~ (3 pi n / 8)^(1/3)
  // for the isotropic case; the x axis is compressed by the stiffer confinement.
  const Real rz = std::cbrt(3.0 * kPi * n / 8.0) + 0.5;
  const Real rxl = rz / std::pow(rx, 2.0 / 3.0);
  std::vector<std::pair<Real, Real>> pts;
  for (Real a = 0.05 * rz; static_cast<int>(pts.size()) < n; a *= 0.95) {
    pts.clear();
    const Real dz = a, dx = a * std::sqrt(3.0) / 2.0;
    for (int row = -200; row <= 200; ++row) {
      const Real x = row * dx;
      if (std::abs(x) > rxl) continue;
      for (int col = -400; col <= 400; ++col) {
        const Real z = (col + 0.5 * (row & 1)) * dz;
        if ((x * x) / (rxl * rxl) + (z * z) / (rz * rz) <= 1.0) pts.emplace_back(x, z);
      }
    }
    if (static_cast<int>(pts.size()) >= n) break;
  }
  // Keep the n points closest to the centre in the scaled metric.
  std::sort(pts.begin(), pts.end(), [&](const auto& p, const auto& q) {
    return p.first * p.first / (rxl * rxl) + p.second * p.second / (rz * rz) <
           q.first * q.first / (rxl * rxl) + q.second * q.second / (rz * rz);
  });
  std::normal_distribution<Real> jitter(0.0, 0.05);
  RealVector x(2 * n);
  for (int i = 0; i < n; ++i) {
    x[2 * i] = pts[static_cast<std::size_t>(i)].first + jitter(rng) * rxl / std::max<Real>(1.0, rz);
    x[2 * i + 1] = pts[static_cast<std::size_t>(i)].second + jitter(rng);
  }
  return x;
}

// Damped Newton with a Hessian shift whenever it is not positive definite.
RealVector newton_minimize(RealVector q, Real rx, const EquilibriumOptions& opt, Real& gnorm) {
  Real e = crystal_energy(q, rx);
  RealVector g = crystal_gradient(q, rx);
  for (int it = 0; it < opt.max_iter; ++it) {
    gnorm = g.norm();
    if (gnorm < opt.gradient_tol) break;
    RealMatrix h = crystal_hessian(q, rx);
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(h);
    const Real lmin = es.eigenvalues()[0];
    const Real shift = lmin > 1e-8 ? 0.0 : 1e-3 - lmin;
    RealVector step = -(es.eigenvectors() *
                        ((es.eigenvectors().transpose() * g).array() / (es.eigenvalues().array() + shift)).matrix());
    Real t = 1.0;
    for (int ls = 0; ls < 60; ++ls) {
      const RealVector trial = q + t * step;
      const Real et = crystal_energy(trial, rx);
      if (!std::isfinite(et)) {
        t *= 0.5;
        continue;
      }
      // Near the minimum the energy change drops below rounding; fall back to
      // requiring a smaller gradient there.
      const bool armijo = et <= e + 1e-4 * t * g.dot(step);
      const bool flat = et <= e + 1e-12 * std::abs(e) && crystal_gradient(trial, rx).norm() < gnorm;
      if (armijo || flat) {
        q = trial;
        e = et;
        break;
      }
      t *= 0.5;
    }
    g = crystal_gradient(q, rx);
  }
  gnorm = g.norm();
  return q;
}

}  // namespace

CrystalSolution solve_equilibrium(const TrapParams& trap, std::uint64_t seed, const EquilibriumOptions& opt) {
  trap.validate();
  const int n = trap.n_ions;
  const Real rx = trap.ratio_x();
  CrystalSolution best;
  best.energy = std::numeric_limits<Real>::infinity();
  if (n == 1) {
    best.positions = RealMatrix::Zero(1, 2);
    best.energy = 0.0;
    best.gradient_norm = 0.0;
    best.restarts = 1;
    return best;
  }
  Real best_g = std::numeric_limits<Real>::infinity();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Real gnorm = 0.0;
    const RealVector q = newton_minimize(initial_guess(n, rx, rng), rx, opt, gnorm);
    best_g = std::min(best_g, gnorm);
    if (!(gnorm < 1e-8)) continue;
    // Reject saddle points.
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(crystal_hessian(q, rx), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()[0] < -1e-8) continue;
    const Real e = crystal_energy(q, rx);
    if (e < best.energy - 1e-12) {
      best.energy = e;
      best.gradient_norm = gnorm;
      best.positions.resize(n, 2);
      for (int i = 0; i < n; ++i) {
        best.positions(i, 0) = q[2 * i];
        best.positions(i, 1) = q[2 * i + 1];
      }
    }
    ++best.restarts;
  }
  if (best.restarts == 0) {
    throw ConvergenceError("solve_equilibrium: no restart converged; best gradient norm " + std::to_string(best_g));
  }
  // Ascending z.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return best.positions(a, 1) < best.positions(b, 1); });
  RealMatrix sorted(n, 2);
  for (int i = 0; i < n; ++i) sorted.row(i) = best.positions.row(order[static_cast<std::size_t>(i)]);
  best.positions = sorted;
  return best;
}

PhononModes transverse_modes(const CrystalSolution& crystal, const TrapParams& trap) {
  const auto n = crystal.positions.rows();
  const Real ry2 = trap.ratio_y() * trap.ratio_y();
  RealMatrix a = RealMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = ry2;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Real d = (crystal.positions.row(i) - crystal.positions.row(j)).norm();
      const Real c = 1.0 / (d * d * d);
      a(i, j) = c;
      a(i, i) -= c;
    }
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(a);
  if (es.eigenvalues()[0] <= 0.0) {
    throw NumericalError("transverse_modes: non-positive eigenvalue " + std::to_string(es.eigenvalues()[0]) +
                         "; the trap is too weak to hold a planar crystal");
  }
  PhononModes m;
  m.freqs.resize(n);
  m.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = n - 1 - k;
    m.freqs[k] = std::sqrt(es.eigenvalues()[src]);
    RealVector v = es.eigenvectors().col(src);
    // Sign convention: positive sum for the COM mode, otherwise the first
    // clearly nonzero component is positive.
    Real ref = k == 0 ? v.sum() : 0.0;
    if (k != 0) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(v[i]) > 1e-8) {
          ref = v[i];
          break;
        }
      }
    }
    if (ref < 0.0) v = -v;
    m.vectors.col(k) = v;
  }
  return m;
}

namespace {

Real eta_sq(const PhononModes& modes, Eigen::Index k) { return kEtaCom * kEtaCom * modes.freqs[0] / modes.freqs[k]; }

}  // namespace

Real default_detuning_khz(const PhononModes& modes, int k, const TrapParams& trap) {
  const auto n = modes.freqs.size();
  require(k >= 1 && k <= n, "single_mode: mode index out of range");
  if (n == 1) return -0.1 * modes.freqs[0] * trap.omega_z * 1000.0;
  Real gap = std::numeric_limits<Real>::infinity();
  for (Eigen::Index q = 0; q < n; ++q) {
    if (q != k - 1) gap = std::min(gap, std::abs(modes.freqs[q] - modes.freqs[k - 1]));
  }
  return -0.1 * gap * trap.omega_z * 1000.0;
}

CouplingMatrix single_mode_couplings(const PhononModes& modes, int k, const TrapParams& trap,
                                     std::optional<Real> detuning_khz) {
  const auto n = modes.freqs.size();
  require(k >= 1 && k <= n, "single_mode: mode index out of range");
  const Real delta = detuning_khz ? *detuning_khz : default_detuning_khz(modes, k, trap);
  if (delta == 0.0) throw NumericalError("single_mode: zero detuning is resonant");
  const Eigen::Index kk = k - 1;
  const Real pref = kOmegaEffKhz * kOmegaEffKhz / 16.0 * eta_sq(modes, kk) / delta;
  CouplingMatrix c;
  c.kind = "single_mode";
  c.mode = k;
  c.detuning_khz = delta;
  c.J = pref * modes.vectors.col(kk) * modes.vectors.col(kk).transpose();
  c.J.diagonal().setZero();
  c.J = c.J.triangularView<Eigen::Upper>();
  c.J = c.J.selfadjointView<Eigen::Upper>();
  return c;
}

CouplingMatrix all_mode_couplings(const PhononModes& modes, Real mu, const TrapParams& trap) {
  const auto n = modes.freqs.size();
  CouplingMatrix c;
  c.kind = "all_mode";
  c.mu = mu;
  c.J = RealMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Real delta = (mu - modes.freqs[k]) * trap.omega_z * 1000.0;
    if (std::abs(mu - modes.freqs[k]) < 1e-12) {
      throw NumericalError("all_mode: beat note resonant with mode " + std::to_string(k + 1));
    }
    c.J += (kOmegaEffKhz * kOmegaEffKhz / 16.0 * eta_sq(modes, k) / delta) * modes.vectors.col(k) *
           modes.vectors.col(k).transpose();
  }
  c.J.diagonal().setZero();
  c.J = c.J.triangularView<Eigen::Upper>();
  c.J = c.J.selfadjointView<Eigen::Upper>();
  return c;
}

CouplingMatrix power_law_couplings(const CrystalSolution& crystal, Real alpha) {
  require(alpha > 0.0, "power_law: alpha must be positive");
  const auto n = crystal.positions.rows();
  RealMatrix d = RealMatrix::Zero(n, n);
  Real dmin = std::numeric_limits<Real>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (crystal.positions.row(i) - crystal.positions.row(j)).norm();
      dmin = std::min(dmin, d(i, j));
    }
  }
  CouplingMatrix c;
  c.kind = "power_law";
  c.alpha = alpha;
  c.J = RealMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      c.J(i, j) = c.J(j, i) = d(i, j) == dmin ? 1.0 : std::pow(dmin / d(i, j), alpha);
    }
  }
  return c;
}

Real kac_norm(const RealMatrix& J) { return J.cwiseAbs().sum() / static_cast<Real>(J.rows()); }

CouplingMatrix kac_normalized(CouplingMatrix c, Real target) {
  const Real norm = kac_norm(c.J);
  require(norm > 0.0, "kac_normalized: coupling matrix is zero");
  const Real f = target / norm;
  c.J *= f;
  c.scale *= f;
  return c;
}

}  // namespace nqes
