#pragma once

namespace flipkit::constants {

// 2019 SI exact values.
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double planck = 6.62607015e-34;              // J s
inline constexpr double flux_quantum = planck / (2.0 * elementary_charge);  // Wb

inline constexpr double pi = 3.14159265358979323846;

// e^2/(2h) expressed in MHz*fF, so that E_C/h [MHz] = this / C [fF].
inline constexpr double charging_energy_mhz_ff =
    elementary_charge * elementary_charge / (2.0 * planck) * 1e9;

}  // namespace flipkit::constants
