// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqes/orchestrator.hpp"

#include "nqes/ed.hpp"
#include "nqes/ion_crystal.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nqes {

namespace fs = std::filesystem;

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 0x494e4954;      // "INIT"
constexpr std::uint64_t kIterStream = 1ULL << 32;
constexpr std::uint64_t kFinalStream = 0x46494e4c;     // "FINL"

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

SrConfig parse_optimizer(const Json& j, SrConfig c) {
  const std::string w = "optimizer";
  check_keys(j,
             {"learning_rate", "lr_decay_steps", "lr_min", "diag_shift", "diag_shift_decay", "diag_shift_min",
              "krylov_tol", "krylov_max_iter", "max_update_norm", "max_retries"},
             w);
  c.learning_rate = get_or(j, "learning_rate", c.learning_rate, w);
  c.lr_decay_steps = get_or(j, "lr_decay_steps", c.lr_decay_steps, w);
  c.lr_min = get_or(j, "lr_min", c.lr_min, w);
  c.diag_shift = get_or(j, "diag_shift", c.diag_shift, w);
  c.diag_shift_decay = get_or(j, "diag_shift_decay", c.diag_shift_decay, w);
  c.diag_shift_min = get_or(j, "diag_shift_min", c.diag_shift_min, w);
  c.krylov_tol = get_or(j, "krylov_tol", c.krylov_tol, w);
  c.krylov_max_iter = get_or(j, "krylov_max_iter", c.krylov_max_iter, w);
  c.max_retries = get_or(j, "max_retries", c.max_retries, w);
  if (j.contains("max_update_norm")) {
    if (j["max_update_norm"].is_null()) {
      c.max_update_norm.reset();
    } else {
      c.max_update_norm = get_or(j, "max_update_norm", Real{0}, w);
    }
  }
  if (!(c.learning_rate > 0.0) || !(c.diag_shift >= 0.0) || !(c.krylov_tol > 0.0) || c.krylov_max_iter < 1) {
    throw ConfigError("optimizer: learning_rate, krylov_tol must be positive, diag_shift non-negative");
  }
  return c;
}

Json optimizer_to_json(const SrConfig& c) {
  Json j = {{"learning_rate", c.learning_rate}, {"lr_decay_steps", c.lr_decay_steps},
            {"lr_min", c.lr_min},               {"diag_shift", c.diag_shift},
            {"diag_shift_decay", c.diag_shift_decay}, {"diag_shift_min", c.diag_shift_min},
            {"krylov_tol", c.krylov_tol},       {"krylov_max_iter", c.krylov_max_iter},
            {"max_retries", c.max_retries}};
  j["max_update_norm"] = c.max_update_norm ? Json(*c.max_update_norm) : Json(nullptr);
  return j;
}

Json matrix_to_json(const RealMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

RealMatrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty nested array");
  const auto n = static_cast<Eigen::Index>(j.size());
  RealMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) throw ConfigError(where + ": matrix must be square");
    for (Eigen::Index c = 0; c < n; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<Real>();
  }
  return m;
}

Json vector_to_json(const RealVector& v) { return Json(std::vector<Real>(v.data(), v.data() + v.size())); }

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

fs::path resolve_path(const std::string& p, const fs::path& base) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

// Ion-crystal generation shared by the CLI and inline model specs.
struct IonOutput {
  CrystalSolution crystal;
  PhononModes modes;
  CouplingMatrix couplings;
  TrapParams trap;
};

IonOutput ion_crystal_from(const Json& cfg) {
  const std::string w = "ion_crystal";
  check_keys(cfg, {"n_ions", "trap", "seed", "restarts", "couplings"}, w);
  IonOutput out;
  out.trap.n_ions = get_or(cfg, "n_ions", 0, w);
  if (cfg.contains("trap")) {
    const auto& t = cfg["trap"];
    check_keys(t, {"omega_x", "omega_y", "omega_z"}, w + ".trap");
    out.trap.omega_x = get_or(t, "omega_x", out.trap.omega_x, w);
    out.trap.omega_y = get_or(t, "omega_y", out.trap.omega_y, w);
    out.trap.omega_z = get_or(t, "omega_z", out.trap.omega_z, w);
  }
  try {
    out.trap.validate();
  } catch (const ConstraintError& e) {
    throw ConfigError(e.what());
  }
  EquilibriumOptions eo;
  eo.restarts = get_or(cfg, "restarts", eo.restarts, w);
  out.crystal = solve_equilibrium(out.trap, get_or<std::uint64_t>(cfg, "seed", 1, w), eo);
  out.modes = transverse_modes(out.crystal, out.trap);
  const Json c = cfg.value("couplings", Json{{"kind", "power_law"}, {"alpha", 1.0}});
  check_keys(c, {"kind", "mode", "detuning_khz", "alpha", "mu", "kac"}, w + ".couplings");
  const std::string kind = get_or<std::string>(c, "kind", "power_law", w);
  if (kind == "single_mode") {
    std::optional<Real> det;
    if (c.contains("detuning_khz")) det = c["detuning_khz"].get<Real>();
    const int mode = get_or(c, "mode", 1, w);
    if (mode < 1 || mode > out.trap.n_ions) throw ConfigError(w + ": mode out of range");
    out.couplings = single_mode_couplings(out.modes, mode, out.trap, det);
  } else if (kind == "power_law") {
    out.couplings = power_law_couplings(out.crystal, get_or(c, "alpha", 1.0, w));
  } else if (kind == "all_mode") {
    if (!c.contains("mu")) throw ConfigError(w + ": all_mode needs mu");
    out.couplings = all_mode_couplings(out.modes, c["mu"].get<Real>(), out.trap);
  } else {
    throw ConfigError(w + ": unknown coupling kind '" + kind + "'");
  }
  if (c.contains("kac")) out.couplings = kac_normalized(out.couplings, c["kac"].get<Real>());
  return out;
}

Json ion_output_json(const IonOutput& o, const Json& cfg) {
  const auto n = o.crystal.positions.rows();
  Json pos = Json::array();
  for (Eigen::Index i = 0; i < n; ++i) pos.push_back({o.crystal.positions(i, 0), o.crystal.positions(i, 1)});
  const auto& c = o.couplings;
  Json meta = {{"kind", c.kind},
               {"n_ions", n},
               {"trap_mhz", {o.trap.omega_x, o.trap.omega_y, o.trap.omega_z}},
               {"eta_com", kEtaCom},
               {"omega_eff_khz", kOmegaEffKhz},
               {"energy", o.crystal.energy},
               {"gradient_norm", o.crystal.gradient_norm},
               {"coupling_unit", "kHz"},
               {"scale", c.scale},
               {"kac_norm", kac_norm(c.J)},
               {"config", cfg}};
  if (c.kind == "single_mode") {
    meta["mode"] = c.mode;
    meta["detuning_khz"] = c.detuning_khz;
  }
  if (c.kind == "all_mode") meta["mu"] = c.mu;
  if (c.kind == "power_law") meta["alpha"] = c.alpha;
  return {{"positions", pos},
          {"mode_frequencies", vector_to_json(o.modes.freqs)},
          {"mode_vectors", matrix_to_json(o.modes.vectors)},
          {"J", matrix_to_json(c.J)},
          {"metadata", meta}};
}

}  // namespace

std::string json_hash(const Json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write then rename so an interrupted run never leaves a truncated file.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

RealMatrix load_j_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<Real>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::vector<Real> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw ConfigError(path.string() + ": empty matrix");
  RealMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
      throw ConfigError(path.string() + ": matrix must be square");
    }
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

RealMatrix load_j_json(const fs::path& path) {
  const Json j = read_json(path);
  if (!j.contains("J")) throw ConfigError(path.string() + ": no J matrix");
  return matrix_from_json(j["J"], path.string());
}

Json resolve_model(const Json& model, const fs::path& base) {
  if (!model.is_object() || !model.contains("name")) throw ConfigError("model: need an object with a name");
  const std::string name = model["name"].get<std::string>();
  const std::string w = "model(" + name + ")";
  if (name == "tfim") {
    check_keys(model, {"name", "n", "h", "periodic"}, w);
  } else if (name == "xxz" || name == "afh" || name == "haldane_shastry") {
    check_keys(model, {"name", "n"}, w);
  } else if (name == "longrange_ising") {
    check_keys(model, {"name", "h", "longitudinal", "J", "J_csv", "J_json", "ion_crystal"}, w);
    const int sources = static_cast<int>(model.contains("J")) + static_cast<int>(model.contains("J_csv")) +
                        static_cast<int>(model.contains("J_json")) + static_cast<int>(model.contains("ion_crystal"));
    if (sources != 1) throw ConfigError(w + ": give exactly one of J, J_csv, J_json, ion_crystal");
    Json out = {{"name", name}, {"h", get_or(model, "h", 0.0, w)},
                {"longitudinal", get_or(model, "longitudinal", false, w)}};
    RealMatrix J;
    if (model.contains("J")) J = matrix_from_json(model["J"], w);
    if (model.contains("J_csv")) J = load_j_csv(resolve_path(model["J_csv"].get<std::string>(), base));
    if (model.contains("J_json")) J = load_j_json(resolve_path(model["J_json"].get<std::string>(), base));
    if (model.contains("ion_crystal")) {
      J = ion_crystal_from(model["ion_crystal"]).couplings.J;
      out["ion_crystal"] = model["ion_crystal"];
    }
    out["J"] = matrix_to_json(J);
    return out;
  } else {
    throw ConfigError("model: unknown name '" + name + "'");
  }
  Json out = model;
  if (!out.contains("n")) throw ConfigError(w + ": missing n");
  if (name == "tfim") {
    out["h"] = get_or(model, "h", 1.0, w);
    out["periodic"] = get_or(model, "periodic", true, w);
  }
  return out;
}

Hamiltonian build_model(const Json& m) {
  const std::string name = m.at("name").get<std::string>();
  try {
    if (name == "tfim") return build_tfim(m.at("n").get<int>(), m.at("h").get<Real>(), m.at("periodic").get<bool>());
    if (name == "xxz") return build_xxz(m.at("n").get<int>());
    if (name == "afh") return build_afh(m.at("n").get<int>());
    if (name == "haldane_shastry") return build_haldane_shastry(m.at("n").get<int>());
    if (name == "longrange_ising") {
      return build_longrange_ising(matrix_from_json(m.at("J"), "model"), m.at("h").get<Real>(),
                                   m.at("longitudinal").get<bool>());
    }
  } catch (const ConstraintError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  throw ConfigError("model: unknown name '" + name + "'");
}

int ExperimentConfig::num_spins() const { return build_model(phases.front().model).size(); }
int ExperimentConfig::num_hidden() const {
  return std::max(1, static_cast<int>(std::lround(hidden_density * num_spins())));
}

ExperimentConfig parse_config(const Json& j, const fs::path& base) {
  const std::string w = "config";
  check_keys(j,
             {"name", "seed", "k", "hidden_density", "model", "phases", "sampler", "optimizer", "final", "reference",
              "output_dir", "checkpoint_every", "log_every", "description"},
             w);
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name, w);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, w);
  c.k = get_or(j, "k", c.k, w);
  c.hidden_density = get_or(j, "hidden_density", c.hidden_density, w);
  c.checkpoint_every = get_or(j, "checkpoint_every", c.checkpoint_every, w);
  c.log_every = get_or(j, "log_every", c.log_every, w);
  c.output_dir = get_or<std::string>(j, "output_dir", "", w);
  if (!c.output_dir.empty()) c.output_dir = resolve_path(c.output_dir, base).string();
  if (c.k < 1) throw ConfigError("config: k must be at least 1");
  if (!(c.hidden_density > 0.0)) throw ConfigError("config: hidden_density must be positive");

  const Json sj = j.value("sampler", Json::object());
  check_keys(sj, {"n_chains", "n_therm_sweeps", "n_sample_sweeps", "sweep_length", "sample_stride", "warm_therm_sweeps"},
             "sampler");
  c.sampler.n_chains = get_or(sj, "n_chains", 4, "sampler");
  c.sampler.n_therm_sweeps = get_or(sj, "n_therm_sweeps", c.sampler.n_therm_sweeps, "sampler");
  c.sampler.n_sample_sweeps = get_or(sj, "n_sample_sweeps", c.sampler.n_sample_sweeps, "sampler");
  c.sampler.sweep_length = get_or(sj, "sweep_length", c.sampler.sweep_length, "sampler");
  c.sampler.sample_stride = get_or(sj, "sample_stride", c.sampler.sample_stride, "sampler");
  c.warm_therm_sweeps = get_or(sj, "warm_therm_sweeps", c.warm_therm_sweeps, "sampler");
  if (c.sampler.n_chains < 1 || c.sampler.n_therm_sweeps < 0 || c.sampler.n_sample_sweeps < 1 ||
      c.sampler.sample_stride < 1 || c.sampler.sweep_length < 0 || c.warm_therm_sweeps < 0) {
    throw ConfigError("sampler: counts must be positive");
  }
  if (c.sampler.n_sample_sweeps / c.sampler.sample_stride * c.sampler.n_chains < 2) {
    throw ConfigError("sampler: need at least two samples per iteration");
  }

  const SrConfig global_opt = parse_optimizer(j.value("optimizer", Json::object()), SrConfig{});

  if (!j.contains("phases") || !j["phases"].is_array() || j["phases"].empty()) {
    throw ConfigError("config: phases must be a non-empty list");
  }
  const Json default_model = j.value("model", Json());
  int n = -1;
  for (std::size_t p = 0; p < j["phases"].size(); ++p) {
    const auto& pj = j["phases"][p];
    const std::string pw = "phases[" + std::to_string(p) + "]";
    check_keys(pj, {"model", "iterations", "transform", "optimizer"}, pw);
    PhaseConfig ph;
    const Json m = pj.contains("model") ? pj["model"] : default_model;
    if (m.is_null()) throw ConfigError(pw + ": no model (set a phase model or a global one)");
    ph.model = resolve_model(m, base);
    ph.iterations = get_or(pj, "iterations", 0, pw);
    if (ph.iterations < 0) throw ConfigError(pw + ": iterations must be non-negative");
    ph.transform = get_or<std::string>(pj, "transform", "identity", pw);
    if (ph.transform != "identity" && ph.transform != "even_site_z") {
      throw ConfigError(pw + ": unknown transform '" + ph.transform + "'");
    }
    ph.optimizer = pj.contains("optimizer") ? parse_optimizer(pj["optimizer"], global_opt) : global_opt;
    const int pn = build_model(ph.model).size();
    if (n >= 0 && pn != n) throw ConfigError(pw + ": model size differs from the previous phase");
    n = pn;
    c.phases.push_back(std::move(ph));
  }

  const Json fj = j.value("final", Json::object());
  check_keys(fj, {"n_chains", "n_therm_sweeps", "n_sample_sweeps", "sample_stride", "observables"}, "final");
  c.final_pass.n_chains = get_or(fj, "n_chains", 0, "final");
  c.final_pass.n_therm_sweeps = get_or(fj, "n_therm_sweeps", 0, "final");
  c.final_pass.n_sample_sweeps = get_or(fj, "n_sample_sweeps", c.final_pass.n_sample_sweeps, "final");
  c.final_pass.sample_stride = get_or(fj, "sample_stride", 0, "final");
  c.final_pass.observables = get_or(fj, "observables", std::vector<std::string>{}, "final");
  for (const auto& o : c.final_pass.observables) {
    if (o != "zz_all_pairs" && o != "xx_all_pairs" && o != "z_sites" && o != "x_sites") {
      throw ConfigError("final: unknown observable set '" + o + "'");
    }
  }
  if (c.final_pass.n_sample_sweeps < 1 || c.final_pass.n_chains < 0 || c.final_pass.sample_stride < 0) {
    throw ConfigError("final: counts must be positive");
  }

  const Json rj = j.value("reference", Json::object());
  check_keys(rj, {"ed", "k"}, "reference");
  c.reference_ed = get_or(rj, "ed", false, "reference");
  c.reference_k = get_or(rj, "k", 0, "reference");

  // Resolved config: defaults filled in, J matrices inlined.
  Json r = j;
  r["seed"] = c.seed;
  r["k"] = c.k;
  r["hidden_density"] = c.hidden_density;
  r.erase("model");
  r["phases"] = Json::array();
  for (const auto& ph : c.phases) {
    r["phases"].push_back({{"model", ph.model},
                           {"iterations", ph.iterations},
                           {"transform", ph.transform},
                           {"optimizer", optimizer_to_json(ph.optimizer)}});
  }
  r.erase("optimizer");
  r["sampler"] = {{"n_chains", c.sampler.n_chains},         {"n_therm_sweeps", c.sampler.n_therm_sweeps},
                  {"n_sample_sweeps", c.sampler.n_sample_sweeps}, {"sweep_length", c.sampler.sweep_length},
                  {"sample_stride", c.sampler.sample_stride}, {"warm_therm_sweeps", c.warm_therm_sweeps}};
  r["final"] = {{"n_chains", c.final_pass.n_chains},
                {"n_therm_sweeps", c.final_pass.n_therm_sweeps},
                {"n_sample_sweeps", c.final_pass.n_sample_sweeps},
                {"sample_stride", c.final_pass.sample_stride},
                {"observables", c.final_pass.observables}};
  r["reference"] = {{"ed", c.reference_ed}, {"k", c.reference_k}};
  r["output_dir"] = c.output_dir;
  r["checkpoint_every"] = c.checkpoint_every;
  r["log_every"] = c.log_every;
  c.resolved = std::move(r);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  return parse_config(read_json(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* t = std::getenv("NQES_THREADS")) {
    int threads = 0;
    try {
      threads = std::stoi(t);
    } catch (const std::exception&) {
      throw ConfigError("NQES_THREADS must be a positive integer");
    }
    if (threads < 1) throw ConfigError("NQES_THREADS must be a positive integer");
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
  }
  if (const char* d = std::getenv("NQES_OUTPUT_DIR")) {
    cfg.output_dir = d;
    cfg.resolved["output_dir"] = cfg.output_dir;
  }
}

// -- Run state ----------------------------------------------------------------

namespace {

Json complex_vector_json(const ComplexVector& v) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    re.push_back(v[i].real());
    im.push_back(v[i].imag());
  }
  return {{"re", re}, {"im", im}};
}

ComplexVector complex_vector_from(const Json& j) {
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (re.size() != im.size()) throw ConfigError("checkpoint: re/im length mismatch");
  ComplexVector v(static_cast<Eigen::Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i) v[static_cast<Eigen::Index>(i)] = Complex(re[i].get<Real>(), im[i].get<Real>());
  return v;
}

Json trace_json(const TraceEntry& t) {
  return {{"iteration", t.iteration}, {"phase", t.phase},       {"energy", t.energy},
          {"energy_imag", t.energy_imag}, {"stderr", t.stderr}, {"acceptance", t.acceptance},
          {"krylov_iters", t.krylov_iters}, {"residual", t.residual}, {"learning_rate", t.learning_rate}, {"diag_shift", t.diag_shift},
          {"update_norm", t.update_norm}, {"skipped", t.skipped}};
}

TraceEntry trace_from(const Json& j) {
  TraceEntry t;
  t.iteration = j.at("iteration").get<int>();
  t.phase = j.at("phase").get<int>();
  t.energy = j.at("energy").get<Real>();
  t.energy_imag = j.at("energy_imag").get<Real>();
  t.stderr = j.at("stderr").get<Real>();
  t.acceptance = j.at("acceptance").get<Real>();
  t.krylov_iters = j.at("krylov_iters").get<int>();
  t.residual = j.at("residual").get<Real>();
  t.learning_rate = j.at("learning_rate").get<Real>();
  t.diag_shift = j.at("diag_shift").get<Real>();
  t.update_norm = j.at("update_norm").get<Real>();
  t.skipped = j.at("skipped").get<bool>();
  return t;
}

}  // namespace

Json state_to_json(const RunState& s) {
  Json nets = Json::array();
  for (const auto& p : s.params) nets.push_back({{"n", p.n}, {"m", p.m}, {"params", complex_vector_json(p.flatten())}});
  Json chains = Json::array();
  for (const auto& c : s.chains) {
    Json reps = Json::array();
    for (const auto& r : c) reps.push_back(r.to_string());
    chains.push_back(std::move(reps));
  }
  Json trace = Json::array();
  for (const auto& t : s.trace) trace.push_back(trace_json(t));
  return {{"phase", s.phase},
          {"phase_iter", s.phase_iter},
          {"iteration", s.iteration},
          {"transform_applied", s.transform_applied},
          {"init_attempt", s.init_attempt},
          {"networks", nets},
          {"chains", chains},
          {"trace", trace}};
}

RunState state_from_json(const Json& j) {
  RunState s;
  try {
    s.phase = j.at("phase").get<int>();
    s.phase_iter = j.at("phase_iter").get<int>();
    s.iteration = j.at("iteration").get<int>();
    s.transform_applied = j.at("transform_applied").get<bool>();
    s.init_attempt = j.at("init_attempt").get<int>();
    for (const auto& nj : j.at("networks")) {
      s.params.push_back(
          RbmParams::unflatten(nj.at("n").get<int>(), nj.at("m").get<int>(), complex_vector_from(nj.at("params"))));
    }
    for (const auto& cj : j.at("chains")) {
      CollectiveConfig c;
      for (const auto& r : cj) c.push_back(SpinConfig::from_string(r.get<std::string>()));
      s.chains.push_back(std::move(c));
    }
    for (const auto& tj : j.at("trace")) s.trace.push_back(trace_from(tj));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  return s;
}

RunState initialize_state(const ExperimentConfig& cfg, int attempt) {
  RunState s;
  s.init_attempt = attempt;
  const int n = cfg.num_spins(), m = cfg.num_hidden();
  for (int k = 0; k < cfg.k; ++k) {
    std::mt19937_64 rng(derive_seed(cfg.seed, kInitStream + 1000ULL * static_cast<std::uint64_t>(attempt) +
                                                   static_cast<std::uint64_t>(k)));
    s.params.push_back(init_params(n, m, rng));
  }
  return s;
}

RunState curriculum_transition(RunState s, const std::string& transform) {
  if (transform == "identity") return s;
  if (transform == "even_site_z") {
    for (auto& p : s.params) p = apply_even_site_z(p);
    return s;
  }
  throw ConfigError("unknown transform '" + transform + "'");
}

// -- Running ------------------------------------------------------------------

namespace {

std::vector<NamedObservable> observable_list(const std::vector<std::string>& sets, int n) {
  std::vector<NamedObservable> obs;
  for (const auto& set : sets) {
    if (set == "zz_all_pairs" || set == "xx_all_pairs") {
      const char axis = set[0];
      const auto kind = axis == 'z' ? PauliTerm::Kind::ZZ : PauliTerm::Kind::XX;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) obs.push_back({pair_observable_name(axis, i, j), {kind, i, j}});
      }
    } else {
      const char axis = set[0];
      const auto kind = axis == 'z' ? PauliTerm::Kind::Z : PauliTerm::Kind::X;
      for (int i = 0; i < n; ++i) obs.push_back({site_observable_name(axis, i), {kind, i, 0}});
    }
  }
  return obs;
}

// Standard error of Re Tr E_loc from chain means (or 10 blocks for one chain).
Real trace_stderr(const SampleBatch& b) {
  const auto groups = jackknife_groups(b);
  if (groups.size() < 2) return 0.0;
  std::vector<Real> means;
  for (const auto& g : groups) {
    Real s = 0.0;
    for (int p : g) s += b.e_loc[static_cast<std::size_t>(p)].trace().real();
    means.push_back(s / static_cast<Real>(g.size()));
  }
  Real mean = 0.0;
  for (Real m : means) mean += m;
  mean /= static_cast<Real>(means.size());
  Real var = 0.0;
  for (Real m : means) var += (m - mean) * (m - mean);
  const auto g = static_cast<Real>(means.size());
  return std::sqrt(var / (g - 1.0) / g);
}

std::string fmt(Real x, int prec = 8) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const RunOptions& opt) : cfg_(cfg), opt_(opt) {
    for (const auto& ph : cfg.phases) models_.push_back(build_model(ph.model));
  }

  ExperimentResult run(RunState s) {
    ExperimentResult res;
    try {
      while (s.phase < static_cast<int>(cfg_.phases.size())) {
        const auto& ph = cfg_.phases[static_cast<std::size_t>(s.phase)];
        if (!s.transform_applied) {
          if (ph.transform != "identity") checkpoint(s, "phase" + std::to_string(s.phase) + "_pre_transform");
          s = curriculum_transition(std::move(s), ph.transform);
          s.transform_applied = true;
          if (ph.transform != "identity") checkpoint(s, "phase" + std::to_string(s.phase) + "_post_transform");
        }
        while (s.phase_iter < ph.iterations) {
          if (opt_.stop_after >= 0 && s.iteration >= opt_.stop_after) {
            checkpoint(s, "checkpoint");
            res.state = std::move(s);
            return res;
          }
          iterate(s, ph);
          if (cfg_.checkpoint_every > 0 && s.iteration % cfg_.checkpoint_every == 0) checkpoint(s, "checkpoint");
        }
        ++s.phase;
        s.phase_iter = 0;
        s.transform_applied = false;
      }
      checkpoint(s, "checkpoint");
      final_pass(s, res);
    } catch (const Error&) {
      checkpoint_noexcept(s);
      throw;
    }
    res.completed = true;
    res.state = std::move(s);
    return res;
  }

 private:
  void checkpoint(const RunState& s, const std::string& stem) {
    if (!opt_.write_files || cfg_.output_dir.empty()) return;
    Json j = {{"version", kCheckpointVersion}, {"config", cfg_.resolved}, {"state", state_to_json(s)}};
    write_text(fs::path(cfg_.output_dir) / (stem + ".json"), j.dump());
  }

  void checkpoint_noexcept(const RunState& s) {
    try {
      checkpoint(s, "checkpoint_error");
    } catch (...) {
    }
  }

  SampleBatch sample(RunState& s, const Hamiltonian& h) {
    std::vector<Rbm> nets;
    for (const auto& p : s.params) nets.emplace_back(p);
    SamplerConfig sc = cfg_.sampler;
    sc.seed = derive_seed(cfg_.seed, kIterStream + static_cast<std::uint64_t>(s.iteration));
    if (!s.chains.empty()) sc.n_therm_sweeps = cfg_.warm_therm_sweeps;
    return run_chains(nets, h, {}, sc, &s.chains);
  }

  void iterate(RunState& s, const PhaseConfig& ph) {
    const Hamiltonian& h = models_[static_cast<std::size_t>(s.phase)];
    SampleBatch batch;
    // A fresh draw can make the Slater matrix singular everywhere; redraw the networks.
    for (;;) {
      try {
        batch = sample(s, h);
        break;
      } catch (const NumericalError&) {
        if (s.iteration != 0 || s.init_attempt >= 9) throw;
        s = initialize_state(cfg_, s.init_attempt + 1);
        s.transform_applied = true;
        s = curriculum_transition(std::move(s), ph.transform);
        if (!opt_.quiet) std::cerr << "singular initial ensemble; redrawing networks (attempt " << s.init_attempt << ")\n";
      }
    }
    TraceEntry t;
    t.iteration = s.iteration;
    t.phase = s.phase;
    const Complex tr = batch.mean_e_loc().trace();
    t.energy = tr.real();
    t.energy_imag = tr.imag();
    t.stderr = trace_stderr(batch);
    t.acceptance = batch.acceptance_rate();
    SrStepInfo info;
    s.params = sr_step(s.params, batch, ph.optimizer, s.phase_iter, &info);
    t.krylov_iters = info.krylov_iters;
    t.residual = info.residual;
    t.learning_rate = info.learning_rate;
    t.diag_shift = info.diag_shift;
    t.update_norm = info.update_norm;
    t.skipped = info.skipped;
    s.trace.push_back(t);
    if (!opt_.quiet && cfg_.log_every > 0 && (s.iteration % cfg_.log_every == 0)) {
      std::cerr << "iter " << s.iteration << " phase " << s.phase << " E " << fmt(t.energy, 10) << " +- "
                << fmt(t.stderr, 3) << " acc " << fmt(t.acceptance, 3) << " krylov " << t.krylov_iters << " res "
                << fmt(t.residual, 2) << " lr "
                << fmt(t.learning_rate, 4) << " |dW| " << fmt(t.update_norm, 4) << (t.skipped ? " skipped" : "")
                << "\n";
    }
    ++s.iteration;
    ++s.phase_iter;
  }

  void final_pass(RunState& s, ExperimentResult& res) {
    const Hamiltonian& h = models_.back();
    const int n = h.size();
    std::vector<Rbm> nets;
    for (const auto& p : s.params) nets.emplace_back(p);
    SamplerConfig sc = cfg_.sampler;
    sc.seed = derive_seed(cfg_.seed, kFinalStream);
    if (cfg_.final_pass.n_chains > 0) sc.n_chains = cfg_.final_pass.n_chains;
    if (cfg_.final_pass.sample_stride > 0) sc.sample_stride = cfg_.final_pass.sample_stride;
    sc.n_sample_sweeps = cfg_.final_pass.n_sample_sweeps;
    sc.record_derivatives = false;
    // Warm chains need little equilibration; a changed chain count starts fresh.
    std::vector<CollectiveConfig> chains = s.chains;
    const bool warm = static_cast<int>(chains.size()) == sc.n_chains;
    sc.n_therm_sweeps = cfg_.final_pass.n_therm_sweeps > 0 ? cfg_.final_pass.n_therm_sweeps
                                                           : (warm ? cfg_.warm_therm_sweeps : cfg_.sampler.n_therm_sweeps);
    const auto obs = observable_list(cfg_.final_pass.observables, n);
    const SampleBatch batch = run_chains(nets, h, obs, sc, &chains);

    res.spectrum = spectral_report(batch);
    const auto values = observable_report(batch);
    const auto& rep = res.spectrum;

    Json r;
    r["version"] = kCheckpointVersion;
    r["name"] = cfg_.name;
    r["seed"] = cfg_.seed;
    r["config"] = cfg_.resolved;
    r["model"] = cfg_.phases.back().model;
    r["model_hash"] = json_hash(cfg_.phases.back().model);
    r["n"] = n;
    r["k"] = cfg_.k;
    r["energies"] = vector_to_json(rep.energies);
    r["stderr"] = vector_to_json(rep.stderr);
    r["imag_residuals"] = vector_to_json(rep.imag_residuals);
    r["transform_cond"] = rep.transform_cond;
    r["schur_fallback"] = rep.schur_fallback;
    r["warnings"] = rep.warnings;
    if (cfg_.k >= 2) {
      const auto g = gap(rep);
      r["gap"] = {{"value", g.value}, {"stderr", g.stderr}};
    }
    r["samples"] = batch.count;
    r["acceptance"] = batch.acceptance_rate();
    r["singular_rejects"] = batch.singular_rejects;
    r["iterations"] = s.iteration;

    Json corr = Json::object();
    Json sites = Json::object();
    for (const auto& set : cfg_.final_pass.observables) {
      const char axis = set[0];
      Json per_state = Json::array();
      for (int st = 0; st < cfg_.k; ++st) {
        if (set.find("pairs") != std::string::npos) {
          const auto map = correlation_map(batch, values, axis, st, n);
          per_state.push_back({{"value", matrix_to_json(map.value)}, {"stderr", matrix_to_json(map.stderr)}});
          write_csv(map.value, "corr_" + std::string(2, axis) + "_state" + std::to_string(st) + ".csv");
        } else {
          RealVector v(n), e(n);
          for (int i = 0; i < n; ++i) {
            const auto q = index_of(batch, site_observable_name(axis, i));
            v[i] = values[q].values[st];
            e[i] = values[q].stderr[st];
          }
          per_state.push_back({{"value", vector_to_json(v)}, {"stderr", vector_to_json(e)}});
        }
      }
      (set.find("pairs") != std::string::npos ? corr : sites)[std::string(1, axis)] = per_state;
    }
    r["correlations"] = corr;
    r["site_expectations"] = sites;

    if (cfg_.reference_ed) r["reference"] = run_ed(cfg_);

    Json trace_summary = Json::array();
    for (const auto& t : s.trace) trace_summary.push_back(trace_json(t));
    r["trace"] = trace_summary;
    res.report = r;

    if (opt_.write_files && !cfg_.output_dir.empty()) {
      write_text(fs::path(cfg_.output_dir) / "report.json", r.dump(2));
      std::ostringstream csv;
      csv << "iteration,phase,energy,energy_imag,stderr,acceptance,krylov_iters,residual,learning_rate,diag_shift,update_norm,"
             "skipped\n";
      csv << std::setprecision(17);
      for (const auto& t : s.trace) {
        csv << t.iteration << ',' << t.phase << ',' << t.energy << ',' << t.energy_imag << ',' << t.stderr << ','
            << t.acceptance << ',' << t.krylov_iters << ',' << t.residual << ',' << t.learning_rate << ',' << t.diag_shift << ','
            << t.update_norm << ',' << (t.skipped ? 1 : 0) << '\n';
      }
      write_text(fs::path(cfg_.output_dir) / "trace.csv", csv.str());
    }
  }

  static std::size_t index_of(const SampleBatch& b, const std::string& name) {
    for (std::size_t q = 0; q < b.obs_names.size(); ++q) {
      if (b.obs_names[q] == name) return q;
    }
    throw ConfigError("observable " + name + " was not recorded");
  }

  void write_csv(const RealMatrix& m, const std::string& file) {
    if (!opt_.write_files || cfg_.output_dir.empty()) return;
    std::ostringstream os;
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) os << m(i, j) << (j + 1 < m.cols() ? "," : "\n");
    }
    write_text(fs::path(cfg_.output_dir) / file, os.str());
  }

  const ExperimentConfig& cfg_;
  RunOptions opt_;
  std::vector<Hamiltonian> models_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  Runner r(cfg, opt);
  return r.run(initialize_state(cfg));
}

ExperimentResult resume_experiment(const Json& ck, const RunOptions& opt) {
  if (!ck.contains("version") || ck["version"].get<int>() != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported version");
  }
  ExperimentConfig cfg = parse_config(ck.at("config"));
  apply_env_overrides(cfg);
  const RunState s = state_from_json(ck.at("state"));
  if (static_cast<int>(s.params.size()) != cfg.k) throw ConfigError("checkpoint: network count does not match k");
  Runner r(cfg, opt);
  return r.run(s);
}

ExperimentResult resume_experiment(const fs::path& path, const RunOptions& opt) {
  return resume_experiment(read_json(path), opt);
}

Json run_ed(const ExperimentConfig& cfg) {
  const auto& model = cfg.phases.back().model;
  const Hamiltonian h = build_model(model);
  const int n = h.size();
  const int k = cfg.reference_k > 0 ? cfg.reference_k : cfg.k;
  const auto spec = ground_spectrum(h, k);
  Json r = {{"method", n <= kDenseMaxSpins ? "dense" : "lanczos"},
            {"model_hash", json_hash(model)},
            {"n", n},
            {"k", k},
            {"energies", vector_to_json(spec.energies.head(k))},
            {"residuals", vector_to_json(spec.residuals.head(k))}};
  if (k >= 2) r["gap"] = spec.energies[1] - spec.energies[0];
  Json corr = Json::object(), sites = Json::object();
  for (const auto& set : cfg.final_pass.observables) {
    const char axis = set[0];
    Json per_state = Json::array();
    for (int s = 0; s < k; ++s) {
      const RealVector v = spec.vectors.col(s);
      if (set.find("pairs") != std::string::npos) {
        RealMatrix m = RealMatrix::Identity(n, n);
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = exact_correlation(v, i, j, axis);
        }
        per_state.push_back(matrix_to_json(m));
      } else {
        RealVector e(n);
        for (int i = 0; i < n; ++i) {
          e[i] = exact_expectation(v, axis == 'z' ? z_operator(n, i) : x_operator(n, i));
        }
        per_state.push_back(vector_to_json(e));
      }
    }
    (set.find("pairs") != std::string::npos ? corr : sites)[std::string(1, axis)] = per_state;
  }
  r["correlations"] = corr;
  r["site_expectations"] = sites;
  return r;
}

Json run_ion_crystal(const Json& cfg) { return ion_output_json(ion_crystal_from(cfg), cfg); }

}  // namespace nqes
