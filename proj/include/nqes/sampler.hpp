// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Metropolis sampling of collective configurations from |Psi|^2 with
// independent chains, and assembly of the per-sample statistics used by the
// optimizer and the spectral post-processing.

#pragma once

#include "nqes/core.hpp"
#include "nqes/ensemble.hpp"
#include "nqes/spin_models.hpp"
#include "nqes/wavefunction.hpp"

#include <algorithm>
#include <random>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nqes {

struct SamplerConfig {
  int n_chains = 1;
  int n_therm_sweeps = 200;
  int n_sample_sweeps = 200;  // sweeps after thermalization, per chain
  int sweep_length = 0;       // proposals per sweep; 0 means K * n
  int sample_stride = 2;      // sweeps between recorded samples
  std::uint64_t seed = 1;
  bool record_derivatives = true;
};

struct NamedObservable {
  std::string name;
  PauliTerm term;
};

struct SampleBatch {
  int k = 0;
  int count = 0;                      // P
  std::vector<ComplexMatrix> e_loc;   // P local energy matrices
  ComplexMatrix derivs;               // P x L, one row per sample (empty if not recorded)
  std::vector<std::string> obs_names;
  std::vector<std::vector<ComplexMatrix>> obs;  // [observable][sample]
  std::vector<int> chain;             // chain index of each sample
  RealVector weights;                 // optional per-sample weights (empty: uniform)
  long long proposals = 0;
  long long accepted = 0;
  long long singular_rejects = 0;

  Real acceptance_rate() const { return proposals > 0 ? static_cast<Real>(accepted) / proposals : 0.0; }

  // Per-sample Tr e_loc.
  ComplexVector trace_energies() const {
    ComplexVector t(count);
    for (int p = 0; p < count; ++p) t[p] = e_loc[p].trace();
    return t;
  }
  // Normalized sample weights (uniform unless `weights` is set).
  RealVector normalized_weights() const {
    if (weights.size() == 0) return RealVector::Constant(count, 1.0 / count);
    require_dims(weights.size() == count, "SampleBatch: weight count mismatch");
    return weights / weights.sum();
  }
  ComplexMatrix mean_e_loc() const { return weighted_mean(e_loc); }
  ComplexMatrix weighted_mean(const std::vector<ComplexMatrix>& mats) const {
    const RealVector w = normalized_weights();
    ComplexMatrix m = ComplexMatrix::Zero(k, k);
    for (int p = 0; p < count; ++p) m += w[p] * mats[static_cast<std::size_t>(p)];
    return m;
  }
};

// One Metropolis proposal: flip a uniformly chosen spin of a uniformly chosen
// replica, accept with min(1, |det ratio|^2). A singular current state accepts
// unconditionally (its weight is zero).
template <Wavefunction Wf, typename Engine>
bool metropolis_step(SlaterState<Wf>& st, Engine& rng) {
  const auto k = static_cast<std::uint32_t>(st.num_states());
  const auto n = static_cast<std::uint32_t>(st.num_spins());
  const int r = static_cast<int>(uniform_index(rng, k));
  const int i = static_cast<int>(uniform_index(rng, n));
  if (st.singular()) {
    st.accept_flip(r, i);
    return true;
  }
  const Real p = std::norm(st.det_ratio_replica_flip(r, i));
  // Draw unconditionally so the random stream does not depend on p.
  const Real u = uniform01(rng);
  if (p >= 1.0 || u < p) {
    st.accept_flip(r, i);
    return true;
  }
  return false;
}

template <typename Engine>
CollectiveConfig random_collective_config(int k, int n, Engine& rng) {
  CollectiveConfig cc;
  for (int r = 0; r < k; ++r) {
    SpinConfig s(n);
    for (int i = 0; i < n; ++i) {
      if (rng() & 1) s.flip(i);
    }
    cc.push_back(s);
  }
  return cc;
}

namespace detail {

struct ChainOutput {
  std::vector<ComplexMatrix> e_loc;
  std::vector<ComplexVector> derivs;
  std::vector<std::vector<ComplexMatrix>> obs;
  long long proposals = 0, accepted = 0, singular_rejects = 0;
  CollectiveConfig final_config;
  std::string error;
};

}  // namespace detail

// Runs cfg.n_chains independent chains. Chain c draws from an engine seeded
// with derive_seed(cfg.seed, c), so results do not depend on the number of
// threads. If `starts` holds n_chains configurations, chain c starts from
// starts[c]; otherwise from a random configuration. On return `starts` (when
// given) holds each chain's final configuration.
template <Wavefunction Wf>
SampleBatch run_chains(std::span<const Wf> networks, const Hamiltonian& h,
                       const std::vector<NamedObservable>& observables, const SamplerConfig& cfg,
                       std::vector<CollectiveConfig>* starts = nullptr, EnsembleOptions opts = {}) {
  require(cfg.n_chains >= 1 && cfg.n_therm_sweeps >= 0 && cfg.n_sample_sweeps >= 1 && cfg.sample_stride >= 1 &&
              cfg.sweep_length >= 0,
          "run_chains: sampler counts must be positive");
  const int k = static_cast<int>(networks.size());
  require_dims(k >= 1, "run_chains: need at least one network");
  const int n = networks[0].num_visible();
  require_dims(h.size() == n, "run_chains: Hamiltonian size does not match networks");
  const int sweep = cfg.sweep_length > 0 ? cfg.sweep_length : k * n;
  const bool warm = starts != nullptr && static_cast<int>(starts->size()) == cfg.n_chains;
  std::size_t num_params = 0;
  for (const auto& w : networks) num_params += w.num_params();

  std::vector<detail::ChainOutput> out(static_cast<std::size_t>(cfg.n_chains));

#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < cfg.n_chains; ++c) {
    auto& o = out[static_cast<std::size_t>(c)];
    try {
      std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
      CollectiveConfig init = warm ? (*starts)[static_cast<std::size_t>(c)] : random_collective_config(k, n, rng);
      SlaterState<Wf> st(networks, init, opts);
      for (int attempt = 0; st.singular() && attempt < 100; ++attempt) {
        st = SlaterState<Wf>(networks, random_collective_config(k, n, rng), opts);
      }
      if (st.singular()) throw NumericalError("run_chains: could not find a non-singular starting configuration");

      for (long long t = 0; t < static_cast<long long>(cfg.n_therm_sweeps) * sweep; ++t) metropolis_step(st, rng);

      o.obs.resize(observables.size());
      ComplexVector d(static_cast<Eigen::Index>(num_params));
      for (int s = 1; s <= cfg.n_sample_sweeps; ++s) {
        for (int t = 0; t < sweep; ++t) {
          o.accepted += metropolis_step(st, rng) ? 1 : 0;
          ++o.proposals;
        }
        if (s % cfg.sample_stride != 0) continue;
        if (st.singular()) {
          ++o.singular_rejects;
          continue;
        }
        o.e_loc.push_back(st.local_energy_matrix(h));
        if (cfg.record_derivatives) {
          st.ensemble_derivatives(d);
          o.derivs.push_back(d);
        }
        for (std::size_t q = 0; q < observables.size(); ++q) o.obs[q].push_back(st.local_pauli_matrix(observables[q].term));
      }
      o.final_config = st.replicas();
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  }

  SampleBatch b;
  b.k = k;
  for (const auto& o : out) {
    if (!o.error.empty()) throw NumericalError(o.error);
    b.count += static_cast<int>(o.e_loc.size());
    b.proposals += o.proposals;
    b.accepted += o.accepted;
    b.singular_rejects += o.singular_rejects;
  }
  if (b.count == 0) {
    throw NumericalError("run_chains: every sample was singular (" + std::to_string(b.singular_rejects) +
                         " rejected)");
  }
  b.e_loc.reserve(static_cast<std::size_t>(b.count));
  b.chain.reserve(static_cast<std::size_t>(b.count));
  if (cfg.record_derivatives) b.derivs.resize(b.count, static_cast<Eigen::Index>(num_params));
  for (const auto& ob : observables) b.obs_names.push_back(ob.name);
  b.obs.resize(observables.size());
  int row = 0;
  for (int c = 0; c < cfg.n_chains; ++c) {
    auto& o = out[static_cast<std::size_t>(c)];
    for (std::size_t s = 0; s < o.e_loc.size(); ++s) {
      b.e_loc.push_back(std::move(o.e_loc[s]));
      b.chain.push_back(c);
      if (cfg.record_derivatives) b.derivs.row(row) = o.derivs[s].transpose();
      ++row;
    }
    for (std::size_t q = 0; q < observables.size(); ++q) {
      for (auto& m : o.obs[q]) b.obs[q].push_back(std::move(m));
    }
    if (starts) {
      if (!warm) starts->resize(static_cast<std::size_t>(cfg.n_chains));
      (*starts)[static_cast<std::size_t>(c)] = o.final_config;
    }
  }
  return b;
}

template <Wavefunction Wf>
SampleBatch run_chains(const std::vector<Wf>& networks, const Hamiltonian& h,
                       const std::vector<NamedObservable>& observables, const SamplerConfig& cfg,
                       std::vector<CollectiveConfig>* starts = nullptr, EnsembleOptions opts = {}) {
  return run_chains(std::span<const Wf>(networks), h, observables, cfg, starts, opts);
}

}  // namespace nqes
