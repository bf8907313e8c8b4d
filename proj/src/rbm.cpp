// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqes/rbm.hpp"

#include <cmath>

namespace nqes {

RbmParams::RbmParams(int n_visible, int n_hidden)
    : n(n_visible),
      m(n_hidden),
      a(ComplexVector::Zero(n_visible)),
      b(ComplexVector::Zero(n_hidden)),
      w(RowMajorComplexMatrix::Zero(n_visible, n_hidden)) {
  require(n_visible >= 1 && n_hidden >= 0, "RbmParams: need n >= 1 and m >= 0");
}

ComplexVector RbmParams::flatten() const {
  ComplexVector flat(size());
  flat.head(n) = a;
  flat.segment(n, m) = b;
  flat.tail(static_cast<Eigen::Index>(n) * m) = Eigen::Map<const ComplexVector>(w.data(), w.size());
  return flat;
}

RbmParams RbmParams::unflatten(int n_visible, int n_hidden, const ComplexVector& flat) {
  RbmParams p(n_visible, n_hidden);
  require_dims(flat.size() == static_cast<Eigen::Index>(p.size()), "RbmParams::unflatten: length mismatch");
  p.a = flat.head(n_visible);
  p.b = flat.segment(n_visible, n_hidden);
  Eigen::Map<ComplexVector>(p.w.data(), p.w.size()) = flat.tail(static_cast<Eigen::Index>(n_visible) * n_hidden);
  return p;
}

bool RbmParams::all_finite() const {
  auto finite = [](const auto& x) {
    return x.real().allFinite() && x.imag().allFinite();
  };
  return finite(a) && finite(b) && finite(w);
}

bool RbmParams::operator==(const RbmParams& o) const {
  return n == o.n && m == o.m && a == o.a && b == o.b && w == o.w;
}

RbmParams init_params(int n, int m, std::mt19937_64& rng) {
  require(n >= 1 && m >= 1, "init_params: n and m must be positive");
  RbmParams p(n, m);
  std::normal_distribution<Real> normal(0.0, 1.0);
  auto draw = [&](Real variance) {
    const Real sd = std::sqrt(variance / 2.0);
    const Real re = normal(rng);
    const Real im = normal(rng);
    return Complex(sd * re, sd * im);
  };
  for (int i = 0; i < n; ++i) p.a[i] = draw(1.0 / n);
  for (int j = 0; j < m; ++j) p.b[j] = draw(1.0 / m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) p.w(i, j) = draw(1.0 / (static_cast<Real>(n) * m));
  }
  return p;
}

RbmParams apply_even_site_z(const RbmParams& p) {
  require(p.n % 2 == 0, "apply_even_site_z: requires an even number of visible units");
  RbmParams out = p;
  for (int i = 1; i < p.n; i += 2) out.a[i] -= Complex(0.0, kPi / 2.0);
  return out;
}

Complex log2cosh(Complex z) {
  if (z.real() < 0.0) z = -z;
  return z + std::log(1.0 + std::exp(-2.0 * z));
}

Complex log_psi(const RbmParams& p, const SpinConfig& s) {
  require_dims(s.size() == p.n, "log_psi: configuration size does not match network");
  Complex visible{};
  ComplexVector theta = p.b;
  for (int i = 0; i < p.n; ++i) {
    if (s.bit(i)) {
      visible -= p.a[i];
      theta -= p.w.row(i).transpose();
    } else {
      visible += p.a[i];
      theta += p.w.row(i).transpose();
    }
  }
  Complex out = visible;
  for (int j = 0; j < p.m; ++j) out += log2cosh(theta[j]);
  return out;
}

// ---------------------------------------------------------------------------

Rbm::Rbm(RbmParams params, int refresh_interval)
    : p_(std::move(params)), refresh_interval_(refresh_interval) {
  require(refresh_interval_ >= 1, "Rbm: refresh interval must be positive");
  if (!p_.all_finite()) throw NumericalError("Rbm: non-finite network parameters");
  e2a_ = (2.0 * p_.a).array().exp();
  e2a_inv_ = (-2.0 * p_.a).array().exp();
  e2w_ = (2.0 * p_.w).array().exp();
  e2w_inv_ = (-2.0 * p_.w).array().exp();
}

Rbm::Cache Rbm::make_cache(const SpinConfig& s) const {
  Cache c;
  refresh(c, s);
  return c;
}

void Rbm::refresh(Cache& c, const SpinConfig& s) const {
  require_dims(s.size() == p_.n, "Rbm: configuration size does not match network");
  c.theta = p_.b;
  Complex visible{};
  for (int i = 0; i < p_.n; ++i) {
    if (s.bit(i)) {
      visible -= p_.a[i];
      c.theta -= p_.w.row(i).transpose();
    } else {
      visible += p_.a[i];
      c.theta += p_.w.row(i).transpose();
    }
  }
  c.tanh_theta = c.theta.array().tanh();
  c.log_psi = visible;
  for (int j = 0; j < p_.m; ++j) c.log_psi += log2cosh(c.theta[j]);
  c.flips_since_refresh = 0;
}

Complex Rbm::ratio(const Cache& c, const SpinConfig& s, std::span<const int> flips) const {
  Complex pref(1.0, 0.0);
  for (int i : flips) pref *= s.bit(i) ? e2a_[i] : e2a_inv_[i];

  // cosh(theta + d) / cosh(theta) = u e^d + (1 - u) e^-d with u = (1 + tanh theta) / 2.
  Complex prod(1.0, 0.0);
  const int m = p_.m;
  if (flips.size() == 1) {
    const int i = flips[0];
    const Complex* up = s.bit(i) ? &e2w_(i, 0) : &e2w_inv_(i, 0);
    const Complex* dn = s.bit(i) ? &e2w_inv_(i, 0) : &e2w_(i, 0);
    for (int j = 0; j < m; ++j) {
      const Complex u = 0.5 * (1.0 + c.tanh_theta[j]);
      prod *= u * up[j] + (1.0 - u) * dn[j];
    }
  } else {
    for (int j = 0; j < m; ++j) {
      Complex x(1.0, 0.0), xinv(1.0, 0.0);
      for (int i : flips) {
        x *= s.bit(i) ? e2w_(i, j) : e2w_inv_(i, j);
        xinv *= s.bit(i) ? e2w_inv_(i, j) : e2w_(i, j);
      }
      const Complex u = 0.5 * (1.0 + c.tanh_theta[j]);
      prod *= u * x + (1.0 - u) * xinv;
    }
  }
  Complex r = pref * prod;
  if (std::isfinite(r.real()) && std::isfinite(r.imag()) && r != 0.0) return r;

  // Product left the representable range: redo it as a sum of logs.
  Complex lr{};
  for (int i : flips) lr += -2.0 * p_.a[i] * static_cast<Real>(s.spin(i));
  for (int j = 0; j < m; ++j) {
    Complex d{};
    for (int i : flips) d += -2.0 * p_.w(i, j) * static_cast<Real>(s.spin(i));
    lr += log2cosh(c.theta[j] + d) - log2cosh(c.theta[j]);
  }
  return std::exp(lr);
}

void Rbm::update_cache_flip(Cache& c, const SpinConfig& s, int i) const {
  const Complex r = ratio_flip(c, s, i);
  const bool down = s.bit(i);
  const Real si = down ? -1.0 : 1.0;
  for (int j = 0; j < p_.m; ++j) {
    c.theta[j] -= 2.0 * si * p_.w(i, j);
    // tanh(theta - 2 w s) from tanh(theta) with cosh/sinh(2 w s) from the tables.
    const Complex e_plus = down ? e2w_inv_(i, j) : e2w_(i, j);   // exp(2 w s)
    const Complex e_minus = down ? e2w_(i, j) : e2w_inv_(i, j);  // exp(-2 w s)
    const Complex ch = 0.5 * (e_plus + e_minus);
    const Complex sh = 0.5 * (e_plus - e_minus);
    const Complex t = c.tanh_theta[j];
    c.tanh_theta[j] = (t * ch - sh) / (ch - t * sh);
  }
  c.log_psi += std::log(r);
  if (++c.flips_since_refresh >= refresh_interval_) {
    SpinConfig after = s;
    after.flip(i);
    refresh(c, after);
  }
}

void Rbm::derivatives(const Cache& c, const SpinConfig& s, Eigen::Ref<ComplexVector> out) const {
  require_dims(out.size() == static_cast<Eigen::Index>(num_params()), "Rbm::derivatives: output length");
  out.setZero();
  accumulate_derivatives(c, s, Complex(1.0, 0.0), out);
}

void Rbm::accumulate_derivatives(const Cache& c, const SpinConfig& s, Complex weight,
                                 Eigen::Ref<ComplexVector> out) const {
  const int n = p_.n, m = p_.m;
  const ComplexVector wt = weight * c.tanh_theta;
  out.segment(n, m) += wt;
  for (int i = 0; i < n; ++i) {
    auto row = out.segment(n + m + static_cast<Eigen::Index>(i) * m, m);
    if (s.bit(i)) {
      out[i] -= weight;
      row -= wt;
    } else {
      out[i] += weight;
      row += wt;
    }
  }
}

}  // namespace nqes
