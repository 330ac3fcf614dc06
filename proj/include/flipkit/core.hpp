#pragma once

#include <cmath>
#include <string>

#include "flipkit/constants.hpp"
#include "flipkit/errors.hpp"

// Transmon and tunable-coupler single-mode physics: energy/frequency
// conversions, junction parameters, flux tuning and the parametric-gate
// resonance condition. All frequencies are plain doubles in MHz; unit
// conversions happen at the I/O boundary, never here.
namespace flipkit::core {

struct TransmonParams {
  double f01_mhz = 0.0;
  double alpha_mhz = 0.0;  // anharmonicity, negative for a transmon
  double ec_mhz = 0.0;     // charging energy / h
  double ej_mhz = 0.0;     // Josephson energy / h
  double ej_over_ec = 0.0;
};

struct JunctionParams {
  double rn_ohm = 0.0;
  double ic_na = 0.0;
  double gap_uev = 0.0;  // superconducting gap; supplied by configuration
};

struct CouplerSpec {
  double fc0_mhz = 0.0;    // zero-bias frequency
  double alpha_mhz = 0.0;  // taken as an input, never computed
  double flux_phi0 = 0.0;  // applied flux in units of the flux quantum
};

struct Energies {
  double ec_mhz = 0.0;
  double ej_mhz = 0.0;
};

// E_J/E_C below this and the quartic transmon expansion starts to degrade.
inline constexpr double kTransmonRatioFloor = 20.0;

// f01 = sqrt(8 E_J E_C) - E_C
inline double f01_from_energies(double ec_mhz, double ej_mhz) {
  if (!(ec_mhz > 0.0) || !(ej_mhz > 0.0)) {
    throw domain_error("f01_from_energies: E_C and E_J must be positive");
  }
  return std::sqrt(8.0 * ej_mhz * ec_mhz) - ec_mhz;
}

inline bool transmon_approximation_ok(double ec_mhz, double ej_mhz) {
  return ej_mhz / ec_mhz >= kTransmonRatioFloor;
}

// First-order inversion: E_C = -alpha, E_J = (f01 + E_C)^2 / (8 E_C).
// Round trip through f01_from_energies reproduces f01 by construction.
inline Energies energies_from_spectrum(double f01_mhz, double alpha_mhz) {
  if (!(alpha_mhz < 0.0)) {
    throw domain_error("energies_from_spectrum: alpha must be negative");
  }
  if (!(f01_mhz > 0.0)) {
    throw domain_error("energies_from_spectrum: f01 must be positive");
  }
  const double ec = -alpha_mhz;
  const double ej = (f01_mhz + ec) * (f01_mhz + ec) / (8.0 * ec);
  return {ec, ej};
}

inline TransmonParams transmon_from_energies(double ec_mhz, double ej_mhz) {
  TransmonParams params;
  params.ec_mhz = ec_mhz;
  params.ej_mhz = ej_mhz;
  params.f01_mhz = f01_from_energies(ec_mhz, ej_mhz);
  params.alpha_mhz = -ec_mhz;
  params.ej_over_ec = ej_mhz / ec_mhz;
  return params;
}

inline TransmonParams transmon_from_spectrum(double f01_mhz, double alpha_mhz) {
  const Energies energies = energies_from_spectrum(f01_mhz, alpha_mhz);
  TransmonParams params;
  params.f01_mhz = f01_mhz;
  params.alpha_mhz = alpha_mhz;
  params.ec_mhz = energies.ec_mhz;
  params.ej_mhz = energies.ej_mhz;
  params.ej_over_ec = energies.ej_mhz / energies.ec_mhz;
  return params;
}

// E_C/h in MHz from the mode self-capacitance: E_C = e^2 / (2 C).
inline double ec_from_capacitance(double c_self_ff) {
  if (!(c_self_ff > 0.0)) {
    throw domain_error("ec_from_capacitance: capacitance must be positive");
  }
  return constants::charging_energy_mhz_ff / c_self_ff;
}

struct JunctionEnergy {
  double ej_mhz = 0.0;
  double ic_na = 0.0;
};

// Ambegaokar-Baratoff: I_c R_N = pi Delta / (2 e); E_J = h I_c / (4 pi e).
inline JunctionEnergy ej_from_junction(double rn_ohm, double gap_uev) {
  if (!(rn_ohm > 0.0) || !(gap_uev > 0.0)) {
    throw domain_error("ej_from_junction: R_N and gap must be positive");
  }
  const double gap_v = gap_uev * 1e-6;
  const double ic_a = constants::pi * gap_v / (2.0 * rn_ohm);
  const double ej_mhz = ic_a / (4.0 * constants::pi * constants::elementary_charge) * 1e-6;
  return {ej_mhz, ic_a * 1e9};
}

inline JunctionParams junction_from_resistance(double rn_ohm, double gap_uev) {
  const JunctionEnergy energy = ej_from_junction(rn_ohm, gap_uev);
  return {rn_ohm, energy.ic_na, gap_uev};
}

// Residual of the Ambegaokar-Baratoff relation; used to validate records.
inline bool junction_consistent(const JunctionParams& junction, double tol_rel = 1e-9) {
  if (!(junction.rn_ohm > 0.0) || !(junction.ic_na > 0.0) || !(junction.gap_uev > 0.0)) {
    return false;
  }
  const double expected_ic = junction_from_resistance(junction.rn_ohm, junction.gap_uev).ic_na;
  return std::abs(junction.ic_na - expected_ic) <= tol_rel * expected_ic;
}

// f_c = f_c0 sqrt(|cos(pi Phi / Phi_0)|); periodic in flux with period 1.
inline double coupler_frequency(double fc0_mhz, double flux_phi0) {
  if (!(fc0_mhz > 0.0)) {
    throw domain_error("coupler_frequency: zero-bias frequency must be positive");
  }
  return fc0_mhz * std::sqrt(std::abs(std::cos(constants::pi * flux_phi0)));
}

// Resonance condition of the parametric |11> <-> |02> transition:
// f_CZ02 = f01(q2) - f01(q1) + alpha(q2).
inline double cz02_frequency(const TransmonParams& q1, const TransmonParams& q2) {
  return q2.f01_mhz - q1.f01_mhz + q2.alpha_mhz;
}

}  // namespace flipkit::core
