#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flipkit/constants.hpp"
#include "flipkit/core.hpp"
#include "flipkit/errors.hpp"

// Capacitance-network ingestion and the lumped-element quantities derived
// from it: coupling strengths, XY coupling quality factor, Purcell budgets,
// and resonator linewidths.
namespace flipkit::capnet {

enum class ModeKind { lumped, quarter_wave };

inline ModeKind mode_kind_from_string(std::string_view name) {
  if (name == "lumped") return ModeKind::lumped;
  if (name == "quarter_wave") return ModeKind::quarter_wave;
  throw parse_error("unknown mode kind '" + std::string(name) + "'");
}

inline std::string to_string(ModeKind kind) {
  return kind == ModeKind::lumped ? "lumped" : "quarter_wave";
}

// Labeled symmetric matrix of self/mutual capacitances at one interchip
// spacing. Quarter-wave entries hold the raw solver value; the 2/pi field
// correction is applied on access through effective_self_ff.
struct CapacitanceRecord {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> matrix_ff;
  double spacing_um = 0.0;
  std::map<std::string, ModeKind> kinds;
  std::vector<std::string> notes;

  std::size_t index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return i;
    }
    throw domain_error("capacitance record has no node '" + std::string(label) + "'");
  }

  double self_ff(std::string_view label) const {
    const std::size_t i = index_of(label);
    return matrix_ff[i][i];
  }

  double mutual_ff(std::string_view a, std::string_view b) const {
    return matrix_ff[index_of(a)][index_of(b)];
  }

  ModeKind kind_of(std::string_view label) const {
    const auto it = kinds.find(std::string(label));
    return it == kinds.end() ? ModeKind::lumped : it->second;
  }

  double effective_self_ff(std::string_view label) const;
};

struct ModeSummary {
  std::string label;
  double frequency_mhz = 0.0;
  double c_eff_ff = 0.0;
};

// lumped -> identity; quarter_wave -> (2/pi) * C, accounting for the
// non-uniform field of a distributed quarter-wave mode.
inline double effective_capacitance(double c_self_ff, ModeKind kind) {
  if (!(c_self_ff > 0.0)) {
    throw domain_error("effective_capacitance: capacitance must be positive");
  }
  return kind == ModeKind::lumped ? c_self_ff : c_self_ff * (2.0 / constants::pi);
}

inline double CapacitanceRecord::effective_self_ff(std::string_view label) const {
  return effective_capacitance(self_ff(label), kind_of(label));
}

inline ModeSummary make_mode_summary(const CapacitanceRecord& record, std::string_view label,
                                     double frequency_mhz) {
  if (!(frequency_mhz > 0.0)) {
    throw domain_error("make_mode_summary: frequency must be positive");
  }
  return {std::string(label), frequency_mhz, record.effective_self_ff(label)};
}

inline constexpr double kSymmetryToleranceFf = 1e-6;

// Validates and symmetrizes a parsed capacitance document. Asymmetries below
// kSymmetryToleranceFf are averaged away; anything larger is rejected.
inline CapacitanceRecord load_capacitance_record(const nlohmann::json& doc,
                                                 std::string_view source_name = "capacitance") {
  CapacitanceRecord record;
  const std::string src(source_name);
  try {
    record.labels = doc.at("labels").get<std::vector<std::string>>();
    if (doc.at("unit").get<std::string>() != "fF") {
      throw parse_error(src + ": unit must be 'fF'");
    }
    record.spacing_um = doc.value("spacing_um", 0.0);
    record.matrix_ff = doc.at("matrix").get<std::vector<std::vector<double>>>();
    if (doc.contains("kinds")) {
      for (const auto& [label, kind] : doc.at("kinds").items()) {
        record.kinds[label] = mode_kind_from_string(kind.get<std::string>());
      }
    }
    if (doc.contains("provenance") && doc.at("provenance").contains("notes")) {
      record.notes = doc.at("provenance").at("notes").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(src + ": " + e.what());
  }

  const std::size_t n = record.labels.size();
  if (n == 0) throw parse_error(src + ": empty label list");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (record.labels[i] == record.labels[j]) {
        throw parse_error(src + ": duplicate label '" + record.labels[i] + "'");
      }
    }
  }
  if (record.matrix_ff.size() != n) {
    throw parse_error(src + ": matrix is not label-aligned");
  }
  for (const auto& row : record.matrix_ff) {
    if (row.size() != n) throw parse_error(src + ": matrix is not square");
  }
  for (const auto& [label, kind] : record.kinds) {
    (void)kind;
    record.index_of(label);  // throws for unknown labels
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(record.matrix_ff[i][i] > 0.0)) {
      throw domain_error(src + ": non-positive self capacitance for '" + record.labels[i] + "'");
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      const double asym = std::abs(record.matrix_ff[i][j] - record.matrix_ff[j][i]);
      if (asym >= kSymmetryToleranceFf) {
        throw domain_error(src + ": asymmetry " + std::to_string(asym) + " fF between '" +
                           record.labels[i] + "' and '" + record.labels[j] + "'");
      }
      const double sym = 0.5 * (record.matrix_ff[i][j] + record.matrix_ff[j][i]);
      record.matrix_ff[i][j] = sym;
      record.matrix_ff[j][i] = sym;
    }
  }
  return record;
}

inline CapacitanceRecord load_capacitance_record_text(std::string_view text,
                                                      std::string_view source_name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string(source_name) + ": " + e.what());
  }
  return load_capacitance_record(doc, source_name);
}

// g = (sqrt(f1 f2)/2) * C12 / sqrt(C1 C2); linear in the coupling capacitance.
inline double coupling_strength(double f1_mhz, double f2_mhz, double c12_ff, double c1_eff_ff,
                                double c2_eff_ff) {
  if (!(f1_mhz > 0.0) || !(f2_mhz > 0.0) || !(c1_eff_ff > 0.0) || !(c2_eff_ff > 0.0) ||
      c12_ff < 0.0) {
    throw domain_error("coupling_strength: inputs must be positive (c12 non-negative)");
  }
  return 0.5 * std::sqrt(f1_mhz * f2_mhz) * c12_ff / std::sqrt(c1_eff_ff * c2_eff_ff);
}

// Q_c(XY) = C_self / (omega01 C_xy^2 R_e)
inline double qc_xy(double c_self_ff, double c_xy_ff, double f01_mhz, double r_e_ohm) {
  if (!(c_self_ff > 0.0) || !(f01_mhz > 0.0) || !(r_e_ohm > 0.0) || c_xy_ff < 0.0) {
    throw domain_error("qc_xy: inputs must be positive (c_xy non-negative)");
  }
  if (c_xy_ff == 0.0) return std::numeric_limits<double>::infinity();
  const double omega01 = 2.0 * constants::pi * f01_mhz * 1e6;
  const double c_self = c_self_ff * 1e-15;
  const double c_xy = c_xy_ff * 1e-15;
  return c_self / (omega01 * c_xy * c_xy * r_e_ohm);
}

// 1/T_p(XY) = R_e (omega01 C_xy)^2 / C_self; equals qc_xy / omega01.
inline double tp_xy_us(double c_self_ff, double c_xy_ff, double f01_mhz, double r_e_ohm) {
  if (!(c_self_ff > 0.0) || !(f01_mhz > 0.0) || !(r_e_ohm > 0.0) || c_xy_ff < 0.0) {
    throw domain_error("tp_xy: inputs must be positive (c_xy non-negative)");
  }
  if (c_xy_ff == 0.0) return std::numeric_limits<double>::infinity();
  const double omega01 = 2.0 * constants::pi * f01_mhz * 1e6;
  const double c_self = c_self_ff * 1e-15;
  const double c_xy = c_xy_ff * 1e-15;
  const double rate = r_e_ohm * (omega01 * c_xy) * (omega01 * c_xy) / c_self;  // 1/s
  return 1e6 / rate;
}

// 1/T_p(read) = kappa_r (g/Delta)^2 with kappa_r the angular rate 2 pi kappa.
inline double tp_read_us(double kappa_over_2pi_mhz, double g_mhz, double detuning_mhz) {
  if (!(kappa_over_2pi_mhz > 0.0) || g_mhz < 0.0) {
    throw domain_error("tp_read: kappa must be positive and g non-negative");
  }
  if (detuning_mhz == 0.0) {
    throw domain_error("tp_read: qubit-resonator detuning is zero (on resonance)");
  }
  if (g_mhz == 0.0) return std::numeric_limits<double>::infinity();
  const double ratio = g_mhz / detuning_mhz;
  return 1.0 / (2.0 * constants::pi * kappa_over_2pi_mhz * ratio * ratio);
}

struct PurcellBudget {
  double tp_read_us = std::numeric_limits<double>::infinity();
  double tp_xy_us = std::numeric_limits<double>::infinity();
  double tp_total_us = std::numeric_limits<double>::infinity();
};

// Harmonic combination; infinities denote absent decay channels exactly.
inline PurcellBudget tp_combined(double tp_read_us, double tp_xy_us) {
  if (!(tp_read_us > 0.0) || !(tp_xy_us > 0.0)) {
    throw domain_error("tp_combined: lifetimes must be positive or infinite");
  }
  PurcellBudget budget;
  budget.tp_read_us = tp_read_us;
  budget.tp_xy_us = tp_xy_us;
  const double rate = 1.0 / tp_read_us + 1.0 / tp_xy_us;
  budget.tp_total_us = rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
  return budget;
}

// kappa_r / 2pi = f_r / Q_c
inline double kappa_from_qc(double fr_mhz, double qc) {
  if (!(fr_mhz > 0.0) || !(qc > 0.0)) {
    throw domain_error("kappa_from_qc: inputs must be positive");
  }
  return fr_mhz / qc;
}

}  // namespace flipkit::capnet
