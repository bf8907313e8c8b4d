// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// MINRES-QLP (Choi, Paige & Saunders, SIAM J. Sci. Comput. 33, 2011) for
// Hermitian, possibly singular A x = b. Only products with A are needed. For
// Hermitian A all Lanczos and rotation scalars are real, so the same code
// serves real and complex vectors. This variant always runs the QLP update of
// the solution, which is what keeps it stable on singular and ill-conditioned
// operators; starting from x = 0 the iterate stays in range(A), so consistent
// singular systems converge to the minimum-norm solution.

#pragma once

#include "nqes/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nqes {

struct MinresOptions {
  Real tol = 1e-6;
  int max_iter = 200;
  Real acond_limit = 1e15;
};

struct MinresResult {
  int iterations = 0;
  int flag = 0;               // see minres_flag_message
  bool converged = false;
  Real residual_norm = 0.0;   // recurrence estimate of ||b - A x||
  Real rel_residual = 0.0;    // residual_norm / ||b||
  Real a_norm = 0.0;
  Real a_cond = 0.0;
  Real x_norm = 0.0;
};

// flag: 0 x = 0 solves; 1 residual below tol ||b||; 2 least-squares residual
// below tol; 3/4 as 1/2 but at machine precision; 5 x converged to an
// eigenvector; 6 xnorm too large; 7 A condition limit; 8 iteration limit;
// -1 b is an eigenvector of A.
inline const char* minres_flag_message(int flag) {
  switch (flag) {
    case -1: return "rhs is an eigenvector";
    case 0: return "zero solution";
    case 1: return "residual tolerance met";
    case 2: return "least-squares tolerance met";
    case 3: return "residual at machine precision";
    case 4: return "least-squares residual at machine precision";
    case 5: return "solution stagnated at machine precision";
    case 6: return "solution norm limit";
    case 7: return "condition number limit";
    case 8: return "iteration limit";
    default: return "unknown";
  }
}

namespace detail {

struct SymOrtho {
  Real c, s, r;
};

// Stable Givens rotation with [c s; s -c] [a; b] = [r; 0].
inline SymOrtho sym_ortho(Real a, Real b) {
  const Real absa = std::abs(a), absb = std::abs(b);
  auto sign = [](Real x) { return x >= 0.0 ? 1.0 : -1.0; };
  if (b == 0.0) return {a == 0.0 ? 1.0 : sign(a), 0.0, absa};
  if (a == 0.0) return {0.0, sign(b), absb};
  if (absb > absa) {
    const Real t = a / b;
    const Real s = sign(b) / std::sqrt(1.0 + t * t);
    return {s * t, s, b / s};
  }
  const Real t = b / a;
  const Real c = sign(a) / std::sqrt(1.0 + t * t);
  return {c, c * t, a / c};
}

inline Real norm3(Real a, Real b, Real c) { return std::sqrt(a * a + b * b + c * c); }
inline Real norm2(Real a, Real b) { return std::hypot(a, b); }

}  // namespace detail

// Solves A x = b; `x` is overwritten (the start is always x = 0).
// `apply(in, out)` must compute out = A in for a Hermitian A.
template <typename Scalar, typename Apply>
MinresResult minres_qlp(Apply&& apply, const Vector<Scalar>& b, Vector<Scalar>& x, const MinresOptions& opt = {}) {
  using Vec = Vector<Scalar>;
  const Eigen::Index len = b.size();
  const Real eps = std::numeric_limits<Real>::epsilon();
  const Real maxxnorm = 1e7 / eps;
  const Real realmin = std::numeric_limits<Real>::min();
  MinresResult res;

  x = Vec::Zero(len);
  if (!b.allFinite()) throw NumericalError("minres_qlp: non-finite right-hand side");
  const Real beta1 = b.norm();
  if (beta1 == 0.0) {
    res.flag = 0;
    res.converged = true;
    return res;
  }

  Vec r1 = Vec::Zero(len), r2 = b, r3(len), v(len);
  Vec w = Vec::Zero(len), wl = Vec::Zero(len), wl2 = Vec::Zero(len), xl2 = Vec::Zero(len);

  const int flag0 = -2;
  int flag = flag0, iters = 0, qlp_iter = 0;
  Real beta = 0.0, tau = 0.0, taul = 0.0, phi = beta1, betan = beta1, gmin = 0.0, gminl = 0.0, gminl2 = 0.0;
  Real cs = -1.0, sn = 0.0, cr1 = -1.0, sr1 = 0.0, cr2 = -1.0, sr2 = 0.0;
  Real dltan = 0.0, eplnn = 0.0, gama = 0.0, gamal = 0.0, gamal2 = 0.0, gamal3 = 0.0;
  Real eta = 0.0, etal = 0.0, etal2 = 0.0, vepln = 0.0, veplnl = 0.0, veplnl2 = 0.0;
  Real ul3 = 0.0, ul2 = 0.0, ul = 0.0, u = 0.0, ul4 = 0.0;
  Real rnorm = betan, xnorm = 0.0, xl2norm = 0.0, anorm = 0.0, acond = 1.0, relres = 1.0;
  Real gamal_qlp = 0.0, vepln_qlp = 0.0, gama_qlp = 0.0, ul_qlp = 0.0, u_qlp = 0.0;
  Real taul2 = 0.0;

  while (flag == flag0 && iters < opt.max_iter) {
    ++iters;
    // Lanczos step.
    const Real betal = beta;
    beta = betan;
    v = r2 / beta;
    apply(v, r3);
    if (iters > 1) r3 -= (beta / betal) * r1;
    const Real alfa = std::real(v.dot(r3));
    r3 -= (alfa / beta) * r2;
    r1 = r2;
    r2 = r3;
    betan = r3.norm();
    if (!std::isfinite(alfa) || !std::isfinite(betan)) {
      throw NumericalError("minres_qlp: non-finite values in the Lanczos recurrence");
    }
    if (iters == 1 && betan == 0.0) {
      if (alfa == 0.0) {
        flag = 0;
      } else {
        flag = -1;
        x = b / alfa;
        rnorm = 0.0;
      }
      break;
    }
    const Real pnorm = detail::norm3(betal, alfa, betan);

    // Previous left rotation Q_{k-1}.
    const Real dbar = dltan;
    Real dlta = cs * dbar + sn * alfa;
    const Real epln = eplnn;
    const Real gbar = sn * dbar - cs * alfa;
    eplnn = sn * betan;
    dltan = -cs * betan;
    (void)epln;

    // Current left rotation Q_k.
    gamal3 = gamal2;
    gamal2 = gamal;
    gamal = gama;
    const auto q = detail::sym_ortho(gbar, betan);
    cs = q.c;
    sn = q.s;
    gama = q.r;
    taul2 = taul;
    taul = tau;
    tau = cs * phi;
    phi = sn * phi;

    // Previous right rotation P_{k-2,k}.
    if (iters > 2) {
      veplnl2 = veplnl;
      etal2 = etal;
      etal = eta;
      const Real dlta_tmp = sr2 * vepln - cr2 * dlta;
      veplnl = cr2 * vepln + sr2 * dlta;
      dlta = dlta_tmp;
      eta = sr2 * gama;
      gama = -cr2 * gama;
    }
    // Current right rotation P_{k-1,k}.
    if (iters > 1) {
      const auto p = detail::sym_ortho(gamal, dlta);
      cr1 = p.c;
      sr1 = p.s;
      gamal = p.r;
      vepln = sr1 * gama;
      gama = -cr1 * gama;
    }

    // Solution norm.
    ul4 = ul3;
    ul3 = ul2;
    if (iters > 2) ul2 = (taul2 - etal2 * ul4 - veplnl2 * ul3) / gamal2;
    if (iters > 1) ul = (taul - etal * ul3 - veplnl * ul2) / gamal;
    const Real xnorm_tmp = detail::norm3(xl2norm, ul2, ul);
    // Pivots at rounding level relative to ||A|| are treated as exact zeros,
    // which keeps the iterate in the numerical range of A.
    const Real gama_floor = std::max(realmin, 10.0 * eps * std::max(anorm, pnorm));
    if (std::abs(gama) > gama_floor && xnorm_tmp < maxxnorm) {
      u = (tau - eta * ul2 - vepln * ul) / gama;
      if (detail::norm2(xnorm_tmp, u) > maxxnorm) {
        u = 0.0;
        flag = 6;
      }
    } else {
      u = 0.0;
      flag = 9;
    }
    xl2norm = detail::norm2(xl2norm, ul2);
    xnorm = detail::norm3(xl2norm, ul, u);

    // QLP update of w and x.
    ++qlp_iter;
    if (qlp_iter == 1) {
      xl2.setZero();
      if (iters > 1) {
        if (iters > 3) wl2 = gamal3 * wl2 + veplnl2 * wl + etal * w;
        if (iters > 2) wl = gamal_qlp * wl + vepln_qlp * w;
        w = gama_qlp * w;
        xl2 = x - wl * ul_qlp - w * u_qlp;
      }
    }
    if (iters == 1) {
      wl2 = wl;
      wl = v * sr1;
      w = -v * cr1;
    } else if (iters == 2) {
      wl2 = wl;
      wl = w * cr1 + v * sr1;
      w = w * sr1 - v * cr1;
    } else {
      wl2 = wl;
      wl = w;
      w = wl2 * sr2 - v * cr2;
      wl2 = wl2 * cr2 + v * sr2;
      v = wl * cr1 + w * sr1;
      w = wl * sr1 - w * cr1;
      wl = v;
    }
    xl2 += wl2 * ul2;
    x = xl2 + wl * ul + w * u;

    // Next right rotation P_{k-1,k+1}.
    const Real gamal_tmp = gamal;
    const auto p2 = detail::sym_ortho(gamal, eplnn);
    cr2 = p2.c;
    sr2 = p2.s;
    gamal = p2.r;

    gamal_qlp = gamal_tmp;
    vepln_qlp = vepln;
    gama_qlp = gama;
    ul_qlp = ul;
    u_qlp = u;

    // Norm and condition estimates.
    const Real abs_gama = std::abs(gama);
    anorm = std::max({anorm, pnorm, gamal, abs_gama});
    if (iters == 1) {
      gmin = gama;
      gminl = gmin;
    } else {
      gminl2 = gminl;
      gminl = gmin;
      gmin = std::min({gminl2, gamal, abs_gama});
    }
    acond = anorm / gmin;
    if (flag != 9) rnorm = phi;
    relres = rnorm / beta1;
    const Real rootl = detail::norm2(gbar, dltan);
    const Real relaresl = rootl / anorm;
    const Real epsx = anorm * xnorm * eps;

    if (flag == flag0 || flag == 9) {
      const Real t1 = 1.0 + rnorm / (anorm * xnorm + beta1);
      const Real t2 = 1.0 + relaresl;
      if (iters >= opt.max_iter) flag = 8;
      if (acond >= opt.acond_limit) flag = 7;
      if (xnorm >= maxxnorm) flag = 6;
      if (epsx >= beta1) flag = 5;
      if (t2 <= 1.0) flag = 4;
      if (t1 <= 1.0) flag = 3;
      if (relaresl <= opt.tol) flag = 2;
      if (relres <= opt.tol) flag = 1;
    }
    if (!x.allFinite()) throw NumericalError("minres_qlp: non-finite iterate");
  }

  res.iterations = iters;
  res.flag = flag == flag0 ? 8 : flag;
  res.converged = res.flag >= -1 && res.flag <= 5;
  res.residual_norm = rnorm;
  res.rel_residual = rnorm / beta1;
  res.a_norm = anorm;
  res.a_cond = acond;
  res.x_norm = xnorm;
  return res;
}

}  // namespace nqes
