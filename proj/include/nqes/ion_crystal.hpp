// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Planar Coulomb crystals, their transverse (drumhead) modes, and the Ising
// couplings they mediate.
//
// Lengths are in units of l with l^3 = e^2 / (4 pi eps0 m omega_z^2), so the
// in-plane potential is
//
//   V = sum_i 1/2 [(wx/wz)^2 x_i^2 + z_i^2] + sum_{i<j} 1/|r_i - r_j|
//
// and mode frequencies are in units of omega_z. Couplings are reported in kHz
// (Omega_eff, delta in 2 pi kHz), which is the unit-free scale used by the
// spin models.

#pragma once

#include "nqes/core.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace nqes {

struct TrapParams {
  // Trap frequencies in MHz (omega / 2 pi).
  Real omega_x = 0.690;
  Real omega_y = 2.140;
  Real omega_z = 0.167;
  int n_ions = 1;

  Real ratio_x() const { return omega_x / omega_z; }
  Real ratio_y() const { return omega_y / omega_z; }
  void validate() const;
};

struct CrystalSolution {
  RealMatrix positions;  // n x 2 columns (x, z), ascending z
  Real energy = 0.0;
  Real gradient_norm = 0.0;
  int restarts = 0;
};

struct PhononModes {
  RealVector freqs;    // descending, units of omega_z
  RealMatrix vectors;  // column k is mode k (0-based; 0 is the COM mode)
};

struct CouplingMatrix {
  RealMatrix J;
  std::string kind;  // single_mode | all_mode | power_law
  int mode = -1;     // 1-based mode index for single_mode
  Real detuning_khz = 0.0;
  Real mu = 0.0;     // beat-note frequency for all_mode, units of omega_z
  Real alpha = 0.0;
  Real scale = 1.0;  // factor applied after the physical formula (e.g. Kac normalization)
};

inline constexpr Real kEtaCom = 0.11;
inline constexpr Real kOmegaEffKhz = 10.0;

struct EquilibriumOptions {
  int restarts = 10;
  Real gradient_tol = 1e-10;
  int max_iter = 500;
};

CrystalSolution solve_equilibrium(const TrapParams& trap, std::uint64_t seed, const EquilibriumOptions& opt = {});

// Potential, gradient and Hessian at packed coordinates (x_0, z_0, x_1, z_1, ...).
Real crystal_energy(const RealVector& q, Real ratio_x);
RealVector crystal_gradient(const RealVector& q, Real ratio_x);
RealMatrix crystal_hessian(const RealVector& q, Real ratio_x);

PhononModes transverse_modes(const CrystalSolution& crystal, const TrapParams& trap);

// Default single-mode detuning: red (negative), 10% of the gap from mode k to
// its nearest neighbour, in kHz.
Real default_detuning_khz(const PhononModes& modes, int k, const TrapParams& trap);

// J_ij = (Omega^2 / 16) eta_k^2 b_ik b_jk / delta_k, k 1-based (1 = COM).
CouplingMatrix single_mode_couplings(const PhononModes& modes, int k, const TrapParams& trap,
                                     std::optional<Real> detuning_khz = std::nullopt);

// J_ij = (Omega^2 / 16) sum_k eta_k^2 b_ik b_jk / (mu - omega_k), mu in units of omega_z.
CouplingMatrix all_mode_couplings(const PhononModes& modes, Real mu, const TrapParams& trap);

// J_ij = c / d_ij^alpha with the closest pair at exactly 1.
CouplingMatrix power_law_couplings(const CrystalSolution& crystal, Real alpha);

// sum_{i != j} |J_ij| / n.
Real kac_norm(const RealMatrix& J);
// Rescales so that kac_norm(J) == target.
CouplingMatrix kac_normalized(CouplingMatrix c, Real target);

}  // namespace nqes
