// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry point.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 non-convergence, 1 anything else.

#include "nqes/orchestrator.hpp"
#include "nqes/spin_models.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kNumerical = 3, kConvergence = 4 };

void emit(const nqes::Json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    nqes::write_text(out, j.dump(2) + "\n");
  }
}

void summarize(const nqes::ExperimentResult& r) {
  if (!r.completed) {
    std::cout << "stopped after " << r.state.iteration << " iterations\n";
    return;
  }
  std::cout << std::setprecision(10);
  for (Eigen::Index k = 0; k < r.spectrum.energies.size(); ++k) {
    std::cout << "E_" << k << " = " << r.spectrum.energies[k] << " +- " << r.spectrum.stderr[k] << "  (imag "
              << r.spectrum.imag_residuals[k] << ")\n";
  }
  if (r.report.contains("reference")) {
    const auto& ref = r.report["reference"]["energies"];
    for (std::size_t k = 0; k < ref.size() && k < static_cast<std::size_t>(r.spectrum.energies.size()); ++k) {
      const double e = ref[k].get<double>();
      std::cout << "ED_" << k << " = " << e << "  rel err "
                << std::abs(r.spectrum.energies[static_cast<Eigen::Index>(k)] - e) / std::abs(e) << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural quantum excited states"};
  app.require_subcommand(1);

  std::string config, checkpoint, output, output_dir;
  bool quiet = false;
  int stop_after = -1;

  auto* run = app.add_subcommand("run", "train and measure an experiment");
  run->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", output_dir, "override the output directory");
  run->add_option("--stop-after", stop_after, "stop with a checkpoint after this many iterations");
  run->add_flag("-q,--quiet", quiet, "no per-iteration log");

  auto* resume = app.add_subcommand("resume", "continue from a checkpoint");
  resume->add_option("checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  resume->add_option("--stop-after", stop_after, "stop with a checkpoint after this many iterations");
  resume->add_flag("-q,--quiet", quiet, "no per-iteration log");

  auto* ed = app.add_subcommand("ed", "exact spectrum of an experiment's final model");
  ed->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  ed->add_option("-o,--output", output, "write JSON here instead of stdout");

  auto* ion = app.add_subcommand("ion-crystal", "crystal, phonon modes and couplings");
  ion->add_option("config", config, "ion-crystal config (JSON)")->required()->check(CLI::ExistingFile);
  ion->add_option("-o,--output", output, "write JSON here instead of stdout");

  int hs_n = 0, hs_m = 0;
  auto* hs = app.add_subcommand("hs-exact", "closed-form Haldane-Shastry energy");
  hs->add_option("n", hs_n, "chain length")->required();
  hs->add_option("m", hs_m, "magnon number")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    nqes::RunOptions opt;
    opt.quiet = quiet;
    opt.stop_after = stop_after;
    if (run->parsed()) {
      auto cfg = nqes::load_config(config);
      nqes::apply_env_overrides(cfg);
      if (!output_dir.empty()) {
        cfg.output_dir = output_dir;
        cfg.resolved["output_dir"] = output_dir;
      }
      summarize(nqes::run_experiment(cfg, opt));
    } else if (resume->parsed()) {
      summarize(nqes::resume_experiment(std::filesystem::path(checkpoint), opt));
    } else if (ed->parsed()) {
      auto cfg = nqes::load_config(config);
      nqes::apply_env_overrides(cfg);
      emit(nqes::run_ed(cfg), output);
    } else if (ion->parsed()) {
      std::ifstream in(config);
      nqes::Json j;
      try {
        j = nqes::Json::parse(in);
      } catch (const nqes::Json::exception& e) {
        throw nqes::ConfigError(config + ": " + e.what());
      }
      emit(nqes::run_ion_crystal(j), output);
    } else if (hs->parsed()) {
      std::cout << std::setprecision(17) << nqes::hs_exact_energy(hs_n, hs_m) << "\n";
    }
  } catch (const nqes::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const nqes::ConstraintError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const nqes::CapacityError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const nqes::DimensionError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const nqes::ConvergenceError& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return kConvergence;
  } catch (const nqes::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
