#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flipkit/core.hpp"
#include "flipkit/csv.hpp"
#include "flipkit/errors.hpp"
#include "flipkit/numerics.hpp"

// Truncated-ladder Hamiltonians for transmon/resonator/coupler systems:
// construction, dense diagonalization, flux sweeps, avoided-crossing
// extraction. Energies are in MHz throughout. The full (a^dag + a)(b^dag + b)
// exchange coupling is kept; no rotating-wave approximation.
namespace flipkit::spectrum {

inline constexpr std::size_t kDimensionCap = 4096;

struct ModeDef {
  std::string label;
  double f01_mhz = 0.0;
  double alpha_mhz = 0.0;  // 0 for harmonic modes
  int dim = 2;             // truncation levels
};

struct Coupling {
  std::string a;
  std::string b;
  double g_mhz = 0.0;
};

struct SystemDef {
  std::vector<ModeDef> modes;
  std::vector<Coupling> couplings;
};

// Level n of a weakly anharmonic ladder: n f01 + (alpha/2) n (n-1).
inline std::vector<double> mode_levels(const ModeDef& mode) {
  if (mode.dim < 2) throw domain_error("mode '" + mode.label + "': dim must be >= 2");
  if (!(mode.f01_mhz > 0.0)) {
    throw domain_error("mode '" + mode.label + "': f01 must be positive");
  }
  std::vector<double> levels(static_cast<std::size_t>(mode.dim));
  for (int n = 0; n < mode.dim; ++n) {
    levels[static_cast<std::size_t>(n)] =
        n * mode.f01_mhz + 0.5 * mode.alpha_mhz * n * (n - 1);
  }
  return levels;
}

namespace detail {

inline std::size_t mode_index(const SystemDef& system, std::string_view label) {
  for (std::size_t i = 0; i < system.modes.size(); ++i) {
    if (system.modes[i].label == label) return i;
  }
  throw domain_error("system has no mode '" + std::string(label) + "'");
}

inline void validate_system(const SystemDef& system) {
  if (system.modes.empty()) throw domain_error("system has no modes");
  for (std::size_t i = 0; i < system.modes.size(); ++i) {
    for (std::size_t j = i + 1; j < system.modes.size(); ++j) {
      if (system.modes[i].label == system.modes[j].label) {
        throw domain_error("duplicate mode label '" + system.modes[i].label + "'");
      }
    }
  }
  std::size_t total = 1;
  for (const auto& mode : system.modes) {
    if (mode.dim < 2) throw domain_error("mode '" + mode.label + "': dim must be >= 2");
    total *= static_cast<std::size_t>(mode.dim);
    if (total > kDimensionCap) {
      throw domain_error("total Hilbert dimension exceeds cap of " +
                         std::to_string(kDimensionCap));
    }
  }
  for (std::size_t ci = 0; ci < system.couplings.size(); ++ci) {
    const auto& coupling = system.couplings[ci];
    const std::size_t a = mode_index(system, coupling.a);
    const std::size_t b = mode_index(system, coupling.b);
    if (a == b) throw domain_error("self-coupling on mode '" + coupling.a + "'");
    for (std::size_t cj = ci + 1; cj < system.couplings.size(); ++cj) {
      const std::size_t a2 = mode_index(system, system.couplings[cj].a);
      const std::size_t b2 = mode_index(system, system.couplings[cj].b);
      if ((a == a2 && b == b2) || (a == b2 && b == a2)) {
        throw domain_error("duplicate coupling between '" + coupling.a + "' and '" + coupling.b +
                           "'");
      }
    }
  }
}

}  // namespace detail

// Dense real-symmetric Hamiltonian in the product basis (first mode slowest).
// Diagonal is the sum of uncoupled mode levels; each coupling contributes
// g (a^dag + a)(b^dag + b).
inline Eigen::MatrixXd build_hamiltonian(const SystemDef& system) {
  detail::validate_system(system);
  const std::size_t n_modes = system.modes.size();
  std::vector<std::size_t> dims(n_modes);
  for (std::size_t k = 0; k < n_modes; ++k) {
    dims[k] = static_cast<std::size_t>(system.modes[k].dim);
  }
  std::vector<std::size_t> strides(n_modes, 1);
  for (std::size_t k = n_modes; k-- > 1;) {
    strides[k - 1] = strides[k] * dims[k];
  }
  const std::size_t total = strides[0] * dims[0];

  std::vector<std::vector<double>> levels(n_modes);
  for (std::size_t k = 0; k < n_modes; ++k) levels[k] = mode_levels(system.modes[k]);

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total),
                                            static_cast<Eigen::Index>(total));
  for (std::size_t state = 0; state < total; ++state) {
    double energy = 0.0;
    for (std::size_t k = 0; k < n_modes; ++k) {
      energy += levels[k][(state / strides[k]) % dims[k]];
    }
    h(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(state)) = energy;
  }

  for (const auto& coupling : system.couplings) {
    const std::size_t a = detail::mode_index(system, coupling.a);
    const std::size_t b = detail::mode_index(system, coupling.b);
    for (std::size_t state = 0; state < total; ++state) {
      const std::size_t na = (state / strides[a]) % dims[a];
      const std::size_t nb = (state / strides[b]) % dims[b];
      for (const int da : {+1, -1}) {
        const long na2 = static_cast<long>(na) + da;
        if (na2 < 0 || na2 >= static_cast<long>(dims[a])) continue;
        const double amp_a = std::sqrt(static_cast<double>(std::max(na, static_cast<std::size_t>(na2))));
        for (const int db : {+1, -1}) {
          const long nb2 = static_cast<long>(nb) + db;
          if (nb2 < 0 || nb2 >= static_cast<long>(dims[b])) continue;
          const double amp_b =
              std::sqrt(static_cast<double>(std::max(nb, static_cast<std::size_t>(nb2))));
          const long target = static_cast<long>(state) + da * static_cast<long>(strides[a]) +
                              db * static_cast<long>(strides[b]);
          h(static_cast<Eigen::Index>(target), static_cast<Eigen::Index>(state)) +=
              coupling.g_mhz * amp_a * amp_b;
        }
      }
    }
  }
  return h;
}

// Ascending eigenvalues of a real symmetric matrix. Rejects inputs whose
// asymmetry exceeds 1e-12 relative to the largest element.
inline std::vector<double> eigenlevels(const Eigen::MatrixXd& h) {
  if (h.rows() != h.cols() || h.rows() == 0) {
    throw domain_error("eigenlevels: matrix must be square and non-empty");
  }
  const double scale = std::max(h.cwiseAbs().maxCoeff(), 1.0);
  const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw domain_error("eigenlevels: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw numerics_error("eigenlevels: eigensolver failed to converge");
  }
  const auto& values = solver.eigenvalues();
  return {values.data(), values.data() + values.size()};
}

// Eigenvalue tracks over a flux grid, sorted ascending per grid point.
struct LevelCurve {
  std::vector<double> flux_phi0;
  std::vector<std::vector<double>> tracks;  // tracks[t][point]
};

// Rebuilds the system at every flux point with the coupler frequency set to
// coupler_frequency(fc0, flux) and diagonalizes. Points are independent;
// results are ordered by grid index.
inline LevelCurve flux_sweep(const SystemDef& system_template, std::string_view coupler_label,
                             double fc0_mhz, const std::vector<double>& flux_grid,
                             int n_tracks = -1) {
  if (flux_grid.empty()) throw domain_error("flux_sweep: empty flux grid");
  detail::validate_system(system_template);
  const std::size_t coupler = detail::mode_index(system_template, coupler_label);
  std::size_t total = 1;
  for (const auto& mode : system_template.modes) total *= static_cast<std::size_t>(mode.dim);
  const std::size_t k_tracks =
      n_tracks < 0 ? total : std::min<std::size_t>(static_cast<std::size_t>(n_tracks), total);
  if (k_tracks == 0) throw domain_error("flux_sweep: requested zero tracks");

  LevelCurve curve;
  curve.flux_phi0 = flux_grid;
  curve.tracks.assign(k_tracks, std::vector<double>(flux_grid.size()));
  SystemDef system = system_template;
  for (std::size_t i = 0; i < flux_grid.size(); ++i) {
    system.modes[coupler].f01_mhz = core::coupler_frequency(fc0_mhz, flux_grid[i]);
    const std::vector<double> levels = eigenlevels(build_hamiltonian(system));
    for (std::size_t t = 0; t < k_tracks; ++t) {
      curve.tracks[t][i] = levels[t];
    }
  }
  return curve;
}

struct CrossingResult {
  double min_gap_mhz = 0.0;
  double flux_at_min = 0.0;
};

// Minimum of |track_j - track_i| over the grid with parabolic refinement
// around the discrete minimum. A minimum on the grid boundary is
// inconclusive and rejected.
inline CrossingResult avoided_crossing(const LevelCurve& curve, std::size_t track_i,
                                       std::size_t track_j) {
  if (track_i >= curve.tracks.size() || track_j >= curve.tracks.size() || track_i == track_j) {
    throw domain_error("avoided_crossing: invalid track indices");
  }
  const std::size_t n = curve.flux_phi0.size();
  if (n < 3) throw domain_error("avoided_crossing: need at least 3 grid points");

  std::vector<double> gap(n);
  for (std::size_t k = 0; k < n; ++k) {
    gap[k] = std::abs(curve.tracks[track_j][k] - curve.tracks[track_i][k]);
  }
  const std::size_t k_min = static_cast<std::size_t>(
      std::min_element(gap.begin(), gap.end()) - gap.begin());
  if (k_min == 0 || k_min == n - 1) {
    throw numerics_error(
        "avoided_crossing: gap minimum sits on the grid boundary (inconclusive); widen the sweep");
  }
  const auto vertex = numerics::parabolic_vertex(
      curve.flux_phi0[k_min - 1], gap[k_min - 1], curve.flux_phi0[k_min], gap[k_min],
      curve.flux_phi0[k_min + 1], gap[k_min + 1]);
  // keep only a finite refinement inside the bracketing interval
  const double lo = std::min(curve.flux_phi0[k_min - 1], curve.flux_phi0[k_min + 1]);
  const double hi = std::max(curve.flux_phi0[k_min - 1], curve.flux_phi0[k_min + 1]);
  const bool usable = std::isfinite(vertex.x) && std::isfinite(vertex.y) && vertex.x >= lo &&
                      vertex.x <= hi && vertex.y >= 0.0;
  if (!usable) {
    return {gap[k_min], curve.flux_phi0[k_min]};
  }
  return {vertex.y, vertex.x};
}

// System definition document: {modes:[{label,f01,alpha,dim}], couplings:[{a,b,g}]}
inline SystemDef load_system(const nlohmann::json& doc, std::string_view source_name = "system") {
  SystemDef system;
  try {
    for (const auto& mode : doc.at("modes")) {
      system.modes.push_back(ModeDef{mode.at("label").get<std::string>(),
                                     mode.at("f01").get<double>(),
                                     mode.value("alpha", 0.0),
                                     mode.at("dim").get<int>()});
    }
    if (doc.contains("couplings")) {
      for (const auto& coupling : doc.at("couplings")) {
        system.couplings.push_back(Coupling{coupling.at("a").get<std::string>(),
                                            coupling.at("b").get<std::string>(),
                                            coupling.at("g").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string(source_name) + ": " + e.what());
  }
  detail::validate_system(system);
  return system;
}

inline SystemDef load_system_text(std::string_view text, std::string_view source_name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string(source_name) + ": " + e.what());
  }
  return load_system(doc, source_name);
}

// CSV emission: header row (flux, lambda0, lambda1, ...).
inline void write_level_curve_csv(std::ostream& out, const LevelCurve& curve) {
  out << "flux";
  for (std::size_t t = 0; t < curve.tracks.size(); ++t) {
    out << ",lambda" << t;
  }
  out << "\n";
  for (std::size_t i = 0; i < curve.flux_phi0.size(); ++i) {
    out << csv::format_double(curve.flux_phi0[i]);
    for (const auto& track : curve.tracks) {
      out << "," << csv::format_double(track[i]);
    }
    out << "\n";
  }
}

}  // namespace flipkit::spectrum
