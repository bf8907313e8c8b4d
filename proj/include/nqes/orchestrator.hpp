// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Config-driven experiments: phased training with parameter transforms between
// phases, checkpoint/resume, a final measurement pass and JSON/CSV reports.
//
// Config (JSON):
//
//   {
//     "name": "tfim10",
//     "seed": 1,
//     "k": 4,                      // number of states
//     "hidden_density": 4,         // M = hidden_density * n
//     "model": {"name": "tfim", "n": 10, "h": 1.0},
//     "phases": [{"iterations": 500}],
//     "sampler": {"n_chains": 4, "n_therm_sweeps": 200, "n_sample_sweeps": 200,
//                 "sample_stride": 2, "sweep_length": 0, "warm_therm_sweeps": 2},
//     "optimizer": {"learning_rate": 0.02, "diag_shift": 1e-3, ...},
//     "final": {"n_sample_sweeps": 2000, "observables": ["zz_all_pairs", "z_sites"]},
//     "reference": {"ed": true},
//     "output_dir": "out/tfim10",
//     "checkpoint_every": 100,
//     "log_every": 10
//   }
//
// A phase may carry its own "model", "optimizer" (merged over the global one)
// and "transform" (identity | even_site_z, applied when the phase starts).
// Models: tfim {n, h, periodic}, xxz {n}, afh {n}, haldane_shastry {n},
// longrange_ising {h, longitudinal, and one of J | J_csv | J_json | ion_crystal}.
// Relative paths are resolved against the config file's directory.

#pragma once

#include "nqes/core.hpp"
#include "nqes/postprocess.hpp"
#include "nqes/rbm.hpp"
#include "nqes/sampler.hpp"
#include "nqes/spin_models.hpp"
#include "nqes/sr.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nqes {

using Json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

struct PhaseConfig {
  Json model;
  int iterations = 0;
  std::string transform = "identity";
  SrConfig optimizer;
};

struct FinalPassConfig {
  int n_chains = 0;  // 0: same as training
  int n_therm_sweeps = 0;
  int n_sample_sweeps = 1000;
  int sample_stride = 0;  // 0: same as training
  std::vector<std::string> observables;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  int k = 1;
  Real hidden_density = 1.0;
  std::vector<PhaseConfig> phases;
  SamplerConfig sampler;
  int warm_therm_sweeps = 2;
  FinalPassConfig final_pass;
  bool reference_ed = false;
  int reference_k = 0;  // 0: k
  std::string output_dir;
  int checkpoint_every = 0;
  int log_every = 1;
  Json resolved;  // the fully resolved config (J matrices inlined)

  int num_spins() const;
  int num_hidden() const;
};

// Parses and validates; throws ConfigError on anything malformed.
ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// NQES_THREADS sets the OpenMP thread count, NQES_OUTPUT_DIR replaces output_dir.
void apply_env_overrides(ExperimentConfig& cfg);

// Resolves file references and inline crystal generation into an explicit "J".
Json resolve_model(const Json& model, const std::filesystem::path& base_dir);
Hamiltonian build_model(const Json& resolved_model);

RealMatrix load_j_csv(const std::filesystem::path& path);
RealMatrix load_j_json(const std::filesystem::path& path);

struct TraceEntry {
  int iteration = 0;
  int phase = 0;
  Real energy = 0.0;  // Re Tr <E_loc>
  Real energy_imag = 0.0;
  Real stderr = 0.0;
  Real acceptance = 0.0;
  int krylov_iters = 0;
  Real residual = 0.0;  // relative Krylov residual
  Real learning_rate = 0.0;
  Real diag_shift = 0.0;
  Real update_norm = 0.0;
  bool skipped = false;
};

struct RunState {
  int phase = 0;
  int phase_iter = 0;
  int iteration = 0;  // global
  bool transform_applied = false;
  int init_attempt = 0;
  std::vector<RbmParams> params;
  std::vector<CollectiveConfig> chains;
  std::vector<TraceEntry> trace;
};

Json state_to_json(const RunState& s);
RunState state_from_json(const Json& j);

// Fresh networks for the config (attempt selects an independent draw).
RunState initialize_state(const ExperimentConfig& cfg, int attempt = 0);

// Applies a named parameter transform to every network.
RunState curriculum_transition(RunState s, const std::string& transform);

struct RunOptions {
  bool write_files = true;
  int stop_after = -1;  // stop (with a checkpoint) once this many iterations are done
  bool quiet = false;
};

struct ExperimentResult {
  bool completed = false;
  RunState state;
  SpectralReport spectrum;
  Json report;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});
ExperimentResult resume_experiment(const Json& checkpoint, const RunOptions& opt = {});
ExperimentResult resume_experiment(const std::filesystem::path& checkpoint, const RunOptions& opt = {});

// Exact spectrum of the final phase's model: energies and, if requested,
// correlation maps, in the report layout.
Json run_ed(const ExperimentConfig& cfg);

// Crystal, modes and couplings from an ion-crystal config:
//   {"n_ions": 16, "trap": {"omega_x": .., "omega_y": .., "omega_z": ..}, "seed": 1,
//    "couplings": {"kind": "single_mode", "mode": 7, "detuning_khz": -1, "kac": 3.5}
//                 | {"kind": "power_law", "alpha": 1} | {"kind": "all_mode", "mu": 12.9}}
Json run_ion_crystal(const Json& cfg);

// Stable 64-bit FNV-1a hash of the canonical JSON dump.
std::string json_hash(const Json& j);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace nqes
