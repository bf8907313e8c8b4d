// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// K-state determinant ansatz
//
//   Psi(S^1..S^K) = det [ psi_c(S^r) ]_{r,c}
//
// Rows are replica configurations, columns are networks. Each row r is stored
// as a mantissa times exp(offset_r) with offset_r = max_c Re log psi_c(S^r), so
// amplitudes that differ by hundreds of orders of magnitude between replicas
// stay representable. Single-spin moves replace one row and are applied to the
// inverse with a Sherman-Morrison update.

#pragma once

#include "nqes/core.hpp"
#include "nqes/spin_models.hpp"
#include "nqes/wavefunction.hpp"

#include <Eigen/LU>

#include <cmath>
#include <span>
#include <vector>

namespace nqes {

using CollectiveConfig = std::vector<SpinConfig>;

// Lightweight Pauli observables evaluated without building a Hamiltonian.
struct PauliTerm {
  enum class Kind { Z, X, ZZ, XX };
  Kind kind = Kind::Z;
  int i = 0;
  int j = 0;
};

struct EnsembleOptions {
  int refactor_interval = 100;     // accepted moves between full refactorizations
  Real min_update_ratio = 1e-12;   // |det ratio| below this forces a rebuild
  Real singular_threshold = 1e-13; // smallest/largest pivot magnitude
};

template <Wavefunction Wf>
class SlaterState {
 public:
  using Cache = typename Wf::Cache;

  SlaterState(std::span<const Wf> networks, CollectiveConfig replicas, EnsembleOptions opt = {})
      : nets_(networks), replicas_(std::move(replicas)), opt_(opt) {
    const auto k = networks.size();
    require_dims(k >= 1, "SlaterState: need at least one network");
    require_dims(replicas_.size() == k, "SlaterState: need one replica per network");
    n_ = nets_[0].num_visible();
    for (const auto& w : nets_) require_dims(w.num_visible() == n_, "SlaterState: networks differ in size");
    for (const auto& s : replicas_) require_dims(s.size() == n_, "SlaterState: replica size mismatch");
    caches_.reserve(k * k);
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k; ++c) caches_.push_back(nets_[c].make_cache(replicas_[r]));
    }
    rebuild_from_caches();
  }

  int num_states() const { return static_cast<int>(nets_.size()); }
  int num_spins() const { return n_; }
  const CollectiveConfig& replicas() const { return replicas_; }
  std::span<const Wf> networks() const { return nets_; }
  const Cache& cache(int r, int c) const { return caches_[r * num_states() + c]; }

  bool singular() const { return singular_; }
  // log det of the raw amplitude matrix (phase tracked continuously between rebuilds).
  Complex log_det() const { return log_det_mantissa_ + offsets_.sum(); }
  const ComplexMatrix& mantissa() const { return m_; }
  const ComplexMatrix& inverse() const { return inv_; }
  const RealVector& row_offsets() const { return offsets_; }
  // max |M M^-1 - I| at the most recent refactorization.
  Real inverse_residual() const { return inverse_residual_; }

  // Raw matrix psi_c(S^r); only meaningful when amplitudes are representable.
  ComplexMatrix raw_matrix() const {
    ComplexMatrix out = m_;
    for (int r = 0; r < num_states(); ++r) out.row(r) *= std::exp(offsets_[r]);
    return out;
  }

  // det(Psi') / det(Psi) for flipping spin i of replica k.
  Complex det_ratio_replica_flip(int k, int i) const {
    new_row(k, i, proposal_);
    proposal_k_ = k;
    proposal_i_ = i;
    return (proposal_.transpose() * inv_.col(k)).value();
  }

  void accept_flip(int k, int i) {
    if (proposal_k_ != k || proposal_i_ != i) new_row(k, i, proposal_);
    proposal_k_ = proposal_i_ = -1;
    const Complex q = (proposal_.transpose() * inv_.col(k)).value();

    for (int c = 0; c < num_states(); ++c) nets_[c].update_cache_flip(caches_[k * num_states() + c], replicas_[k], i);
    replicas_[k].flip(i);

    if (singular_ || !(std::abs(q) >= opt_.min_update_ratio) || !std::isfinite(std::abs(q))) {
      rebuild_from_caches();
      return;
    }

    // Sherman-Morrison for replacing row k by v: inv -= inv e_k (v - M_k)^T inv / q.
    const Eigen::Matrix<Complex, 1, Eigen::Dynamic> d = proposal_.transpose() - m_.row(k);
    const Eigen::Matrix<Complex, 1, Eigen::Dynamic> dinv = d * inv_;
    const ComplexVector col = inv_.col(k);
    inv_.noalias() -= (col / q) * dinv;
    m_.row(k) = proposal_.transpose();
    log_det_mantissa_ += std::log(q);

    rescale_row(k);

    if (++accepted_since_refactor_ >= opt_.refactor_interval) rebuild_from_caches();
  }

  // Re-evaluate every amplitude from the caches and refactorize.
  void rebuild_from_caches() {
    const int k = num_states();
    proposal_k_ = proposal_i_ = -1;
    m_.resize(k, k);
    offsets_.resize(k);
    for (int r = 0; r < k; ++r) {
      Real off = -std::numeric_limits<Real>::infinity();
      for (int c = 0; c < k; ++c) off = std::max(off, cache(r, c).log_psi.real());
      offsets_[r] = std::isfinite(off) ? off : 0.0;
      for (int c = 0; c < k; ++c) m_(r, c) = std::exp(cache(r, c).log_psi - offsets_[r]);
    }
    factorize();
  }

  // Psi^-1 H Psi for this collective configuration.
  ComplexMatrix local_energy_matrix(const Hamiltonian& h) const { return local_operator_matrix(h); }

  ComplexMatrix local_operator_matrix(const Hamiltonian& op) const {
    require_dims(op.size() == n_, "local_operator_matrix: operator size mismatch");
    if (singular_) throw NumericalError("local_operator_matrix: singular Slater matrix");
    const int k = num_states();
    ComplexMatrix hm(k, k);
    ComplexVector acc(k);
    for (int r = 0; r < k; ++r) {
      const Real ed = op.diag_energy(replicas_[r]);
      for (int c = 0; c < k; ++c) acc[c] = ed * m_(r, c);
      op.for_each_connection(replicas_[r], [&](const FlipSet& fs, Real amp) {
        for (int c = 0; c < k; ++c) acc[c] += amp * scaled_amplitude_after(r, c, fs.span());
      });
      hm.row(r) = acc.transpose();
    }
    return inv_ * hm;
  }

  ComplexMatrix local_pauli_matrix(const PauliTerm& t) const {
    if (singular_) throw NumericalError("local_pauli_matrix: singular Slater matrix");
    const int k = num_states();
    ComplexMatrix om(k, k);
    for (int r = 0; r < k; ++r) {
      const SpinConfig& s = replicas_[r];
      switch (t.kind) {
        case PauliTerm::Kind::Z:
          om.row(r) = static_cast<Real>(s.spin(t.i)) * m_.row(r);
          break;
        case PauliTerm::Kind::ZZ:
          om.row(r) = static_cast<Real>(s.spin(t.i) * s.spin(t.j)) * m_.row(r);
          break;
        case PauliTerm::Kind::X: {
          const int f[1] = {t.i};
          for (int c = 0; c < k; ++c) om(r, c) = scaled_amplitude_after(r, c, f);
          break;
        }
        case PauliTerm::Kind::XX: {
          const int f[2] = {t.i, t.j};
          for (int c = 0; c < k; ++c) om(r, c) = scaled_amplitude_after(r, c, f);
          break;
        }
      }
    }
    return inv_ * om;
  }

  // D_{k,l} = sum_r [Psi^-1]_{k r} Psi_{r k} d log psi_k(S^r) / dW_{k,l}, network-major.
  void ensemble_derivatives(Eigen::Ref<ComplexVector> out) const {
    const int k = num_states();
    std::size_t total = 0;
    for (const auto& w : nets_) total += w.num_params();
    require_dims(out.size() == static_cast<Eigen::Index>(total), "ensemble_derivatives: output length");
    out.setZero();
    Eigen::Index offset = 0;
    for (int c = 0; c < k; ++c) {
      const auto len = static_cast<Eigen::Index>(nets_[c].num_params());
      auto block = out.segment(offset, len);
      for (int r = 0; r < k; ++r) {
        const Complex weight = inv_(c, r) * m_(r, c);
        if (weight == 0.0) continue;
        nets_[c].accumulate_derivatives(cache(r, c), replicas_[r], weight, block);
      }
      offset += len;
    }
  }

  std::size_t num_params() const {
    std::size_t total = 0;
    for (const auto& w : nets_) total += w.num_params();
    return total;
  }

 private:
  Complex scaled_amplitude_after(int r, int c, std::span<const int> flips) const {
    const Complex base = m_(r, c);
    const Cache& ch = cache(r, c);
    if (base != 0.0) return base * nets_[c].ratio(ch, replicas_[r], flips);
    return std::exp(nets_[c].log_psi_after(ch, replicas_[r], flips) - offsets_[r]);
  }

  void new_row(int k, int i, ComplexVector& out) const {
    const int f[1] = {i};
    out.resize(num_states());
    for (int c = 0; c < num_states(); ++c) out[c] = scaled_amplitude_after(k, c, f);
  }

  void rescale_row(int k) {
    Real off = -std::numeric_limits<Real>::infinity();
    for (int c = 0; c < num_states(); ++c) off = std::max(off, cache(k, c).log_psi.real());
    if (!std::isfinite(off)) return;
    const Real shift = offsets_[k] - off;
    if (shift == 0.0) return;
    const Real f = std::exp(shift);
    m_.row(k) *= f;
    inv_.col(k) /= f;
    log_det_mantissa_ += shift;
    offsets_[k] = off;
  }

  void factorize() {
    const int k = num_states();
    accepted_since_refactor_ = 0;
    Eigen::FullPivLU<ComplexMatrix> lu(m_);
    const auto& lu_m = lu.matrixLU();
    Real pmax = 0.0, pmin = std::numeric_limits<Real>::infinity();
    for (int d = 0; d < k; ++d) {
      pmax = std::max(pmax, std::abs(lu_m(d, d)));
      pmin = std::min(pmin, std::abs(lu_m(d, d)));
    }
    singular_ = !(pmax > 0.0) || !(pmin > opt_.singular_threshold * pmax) || !m_.allFinite();
    if (singular_) {
      inv_ = ComplexMatrix::Zero(k, k);
      log_det_mantissa_ = Complex(-std::numeric_limits<Real>::infinity(), 0.0);
      inverse_residual_ = std::numeric_limits<Real>::infinity();
      return;
    }
    inv_ = lu.inverse();
    Complex ld{};
    for (int d = 0; d < k; ++d) ld += std::log(lu_m(d, d));
    const Real sign = lu.permutationP().determinant() * lu.permutationQ().determinant();
    if (sign < 0) ld += Complex(0.0, kPi);
    log_det_mantissa_ = ld;
    inverse_residual_ = (m_ * inv_ - ComplexMatrix::Identity(k, k)).cwiseAbs().maxCoeff();
  }

  std::span<const Wf> nets_;
  CollectiveConfig replicas_;
  EnsembleOptions opt_;
  int n_ = 0;
  std::vector<Cache> caches_;  // row-major [replica][network]
  ComplexMatrix m_, inv_;
  RealVector offsets_;
  Complex log_det_mantissa_{};
  bool singular_ = false;
  int accepted_since_refactor_ = 0;
  Real inverse_residual_ = 0.0;
  // Row computed by the last det_ratio_replica_flip, reused by accept_flip.
  mutable ComplexVector proposal_;
  mutable int proposal_k_ = -1;
  mutable int proposal_i_ = -1;
};

}  // namespace nqes
