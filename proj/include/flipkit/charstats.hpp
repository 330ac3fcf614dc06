#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flipkit/capnet.hpp"
#include "flipkit/core.hpp"
#include "flipkit/csv.hpp"
#include "flipkit/errors.hpp"
#include "flipkit/numerics.hpp"

// Flip-chip geometry metrology (spacing, tilt), participation-ratio loss
// budgets, and qubit-frequency sensitivity propagation.
namespace flipkit::charstats {

// Corner gaps z_i of one bonded module. d_tab/dd_tab/dtheta_tab carry the
// source-tabulated per-module values when the dataset provides them.
struct CornerMeasurements {
  std::string run;
  std::string module;
  double z_se_um = 0.0;
  double z_ne_um = 0.0;
  double z_sw_um = 0.0;
  double z_nw_um = 0.0;
  double edge_mm = 12.0;
  double diagonal_mm = 16.97;
  bool excluded = false;
  std::string exclusion_reason;
  std::optional<double> d_tab_um;
  std::optional<double> dd_tab_um;
  std::optional<double> dtheta_tab_urad;
};

struct ModuleGeometry {
  double d_um = 0.0;
  double delta_d_um = 0.0;
  double delta_theta_urad = 0.0;
};

inline void validate(const CornerMeasurements& corners) {
  for (double z : {corners.z_se_um, corners.z_ne_um, corners.z_sw_um, corners.z_nw_um}) {
    if (!(z > 0.0)) throw domain_error("corner measurements: gaps must be positive");
  }
  if (!(corners.edge_mm > 0.0) || !(corners.diagonal_mm > 0.0)) {
    throw domain_error("corner measurements: edge and diagonal must be positive");
  }
  const double expected_diag = corners.edge_mm * std::sqrt(2.0);
  if (std::abs(corners.diagonal_mm - expected_diag) > 1e-3 * expected_diag) {
    throw domain_error("corner measurements: diagonal is not edge*sqrt(2) within 0.1%");
  }
}

// d = mean(z); delta_d = max pairwise |z_i - z_j|; delta_theta = max over the
// six pairs of |z_i - z_j| / s with s the edge length for adjacent corners
// and the diagonal for opposite ones.
inline ModuleGeometry module_geometry(const CornerMeasurements& corners) {
  validate(corners);
  const double se = corners.z_se_um, ne = corners.z_ne_um;
  const double sw = corners.z_sw_um, nw = corners.z_nw_um;
  ModuleGeometry geometry;
  geometry.d_um = 0.25 * (se + ne + sw + nw);

  const double edge_um = corners.edge_mm * 1e3;
  const double diag_um = corners.diagonal_mm * 1e3;
  struct Pair {
    double a, b, s;
  };
  const Pair pairs[6] = {
      {se, ne, edge_um}, {se, sw, edge_um}, {nw, ne, edge_um},
      {nw, sw, edge_um}, {se, nw, diag_um}, {ne, sw, diag_um},
  };
  for (const auto& pair : pairs) {
    const double dz = std::abs(pair.a - pair.b);
    geometry.delta_d_um = std::max(geometry.delta_d_um, dz);
    geometry.delta_theta_urad = std::max(geometry.delta_theta_urad, dz / pair.s * 1e6);
  }
  return geometry;
}

struct QuantityStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) normalization
  int n = 0;
};

struct PopulationStats {
  QuantityStats d_um;
  QuantityStats delta_d_um;
  QuantityStats delta_theta_urad;
};

enum class ExclusionPolicy { honor_flags, include_all };

namespace detail {

inline bool extra_excluded(const CornerMeasurements& record,
                           const std::vector<std::string>& extra) {
  for (const auto& id : extra) {
    if (id == record.run || id == record.run + ":" + record.module) return true;
  }
  return false;
}

}  // namespace detail

inline std::vector<const CornerMeasurements*> included_records(
    const std::vector<CornerMeasurements>& records, ExclusionPolicy policy,
    const std::vector<std::string>& extra_excluded = {}) {
  std::vector<const CornerMeasurements*> kept;
  for (const auto& record : records) {
    if (policy == ExclusionPolicy::honor_flags && record.excluded) continue;
    if (detail::extra_excluded(record, extra_excluded)) continue;
    kept.push_back(&record);
  }
  return kept;
}

// Population statistics over included modules. Uses the source-tabulated
// (d, delta_d, delta_theta) columns by default; recompute_from_corners
// switches to values derived from the corner gaps.
inline PopulationStats population_stats(const std::vector<CornerMeasurements>& records,
                                        ExclusionPolicy policy,
                                        const std::vector<std::string>& extra_excluded = {},
                                        bool recompute_from_corners = false) {
  const auto kept = included_records(records, policy, extra_excluded);
  if (kept.size() < 2) {
    throw domain_error("population_stats: need at least 2 included modules");
  }
  std::vector<double> d, dd, dtheta;
  for (const CornerMeasurements* record : kept) {
    if (recompute_from_corners) {
      const ModuleGeometry geometry = module_geometry(*record);
      d.push_back(geometry.d_um);
      dd.push_back(geometry.delta_d_um);
      dtheta.push_back(geometry.delta_theta_urad);
    } else {
      if (!record->d_tab_um || !record->dd_tab_um || !record->dtheta_tab_urad) {
        throw domain_error("population_stats: record " + record->run + " " + record->module +
                           " has no tabulated values; use corner recomputation");
      }
      d.push_back(*record->d_tab_um);
      dd.push_back(*record->dd_tab_um);
      dtheta.push_back(*record->dtheta_tab_urad);
    }
  }
  const int n = static_cast<int>(kept.size());
  const auto stat = [n](const std::vector<double>& v) {
    const auto ms = numerics::mean_sample_std(v);
    return QuantityStats{ms.mean, ms.stddev, n};
  };
  return {stat(d), stat(dd), stat(dtheta)};
}

// Rows whose tabulated values disagree with the corner-derived ones beyond
// printing precision. Informational; nothing is reconciled.
struct TabulatedDiscrepancy {
  std::string run;
  std::string module;
  std::string quantity;
  double tabulated = 0.0;
  double recomputed = 0.0;
};

inline std::vector<TabulatedDiscrepancy> tabulated_discrepancies(
    const std::vector<CornerMeasurements>& records, double tol_um = 0.055,
    double tol_urad = 0.55) {
  std::vector<TabulatedDiscrepancy> found;
  for (const auto& record : records) {
    const ModuleGeometry geometry = module_geometry(record);
    if (record.d_tab_um && std::abs(*record.d_tab_um - geometry.d_um) > tol_um) {
      found.push_back({record.run, record.module, "d", *record.d_tab_um, geometry.d_um});
    }
    if (record.dd_tab_um && std::abs(*record.dd_tab_um - geometry.delta_d_um) > tol_um) {
      found.push_back(
          {record.run, record.module, "delta_d", *record.dd_tab_um, geometry.delta_d_um});
    }
    if (record.dtheta_tab_urad &&
        std::abs(*record.dtheta_tab_urad - geometry.delta_theta_urad) > tol_urad) {
      found.push_back({record.run, record.module, "delta_theta", *record.dtheta_tab_urad,
                       geometry.delta_theta_urad});
    }
  }
  return found;
}

// Corner dataset: CSV columns
// (run, module, z_se, z_ne, z_sw, z_nw, d_tab, dd_tab, dtheta_tab, excluded, reason).
struct CornerDataset {
  std::vector<CornerMeasurements> records;
  std::vector<std::string> notes;
};

inline CornerDataset load_corner_dataset(std::string_view text,
                                         std::string_view source_name = "corner dataset") {
  const csv::Table table = csv::parse(text, source_name);
  const std::size_t c_run = csv::column_index(table, "run", source_name);
  const std::size_t c_mod = csv::column_index(table, "module", source_name);
  const std::size_t c_se = csv::column_index(table, "z_se", source_name);
  const std::size_t c_ne = csv::column_index(table, "z_ne", source_name);
  const std::size_t c_sw = csv::column_index(table, "z_sw", source_name);
  const std::size_t c_nw = csv::column_index(table, "z_nw", source_name);
  const std::size_t c_d = csv::column_index(table, "d_tab", source_name);
  const std::size_t c_dd = csv::column_index(table, "dd_tab", source_name);
  const std::size_t c_th = csv::column_index(table, "dtheta_tab", source_name);
  const std::size_t c_ex = csv::column_index(table, "excluded", source_name);
  const std::size_t c_re = csv::column_index(table, "reason", source_name);

  CornerDataset dataset;
  dataset.notes = table.comments;
  for (const auto& row : table.rows) {
    CornerMeasurements record;
    record.run = row[c_run];
    record.module = row[c_mod];
    record.z_se_um = csv::to_double(row[c_se], "z_se");
    record.z_ne_um = csv::to_double(row[c_ne], "z_ne");
    record.z_sw_um = csv::to_double(row[c_sw], "z_sw");
    record.z_nw_um = csv::to_double(row[c_nw], "z_nw");
    if (!row[c_d].empty()) record.d_tab_um = csv::to_double(row[c_d], "d_tab");
    if (!row[c_dd].empty()) record.dd_tab_um = csv::to_double(row[c_dd], "dd_tab");
    if (!row[c_th].empty()) record.dtheta_tab_urad = csv::to_double(row[c_th], "dtheta_tab");
    record.excluded = csv::to_long(row[c_ex], "excluded") != 0;
    record.exclusion_reason = row[c_re];
    validate(record);
    dataset.records.push_back(std::move(record));
  }
  if (dataset.records.empty()) {
    throw parse_error(std::string(source_name) + ": no records");
  }
  return dataset;
}

// ---- participation-ratio loss budgets ----

struct LossDomain {
  std::string name;
  double participation = 0.0;  // p_i
  double tan_delta = 0.0;
};

// Treats .participation as a raw electric energy w_i and rescales so that
// the participations sum to one.
inline std::vector<LossDomain> participation_normalize(std::vector<LossDomain> domains) {
  double total = 0.0;
  for (const auto& domain : domains) {
    if (domain.participation < 0.0) {
      throw domain_error("participation_normalize: energies must be non-negative");
    }
    total += domain.participation;
  }
  if (!(total > 0.0)) {
    throw domain_error("participation_normalize: total energy must be positive");
  }
  for (auto& domain : domains) domain.participation /= total;
  return domains;
}

// 1/Q = sum_i p_i tan(delta_i); infinite for a lossless stack.
inline double loss_q(const std::vector<LossDomain>& domains) {
  if (domains.empty()) throw domain_error("loss_q: need at least one domain");
  double inv_q = 0.0;
  for (const auto& domain : domains) {
    if (domain.participation < 0.0 || domain.tan_delta < 0.0) {
      throw domain_error("loss_q: participations and loss tangents must be non-negative");
    }
    inv_q += domain.participation * domain.tan_delta;
  }
  if (inv_q == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / inv_q;
}

// Loss budget input: JSON list of {name, p or raw_w, tan_delta}. Mixing the
// two keys in one document is rejected; raw_w entries are normalized.
inline std::vector<LossDomain> load_loss_budget(const nlohmann::json& doc,
                                                std::string_view source_name = "loss budget") {
  std::vector<LossDomain> domains;
  bool any_raw = false, any_p = false;
  try {
    for (const auto& entry : doc) {
      LossDomain domain;
      domain.name = entry.at("name").get<std::string>();
      domain.tan_delta = entry.at("tan_delta").get<double>();
      if (entry.contains("raw_w")) {
        domain.participation = entry.at("raw_w").get<double>();
        any_raw = true;
      } else {
        domain.participation = entry.at("p").get<double>();
        any_p = true;
      }
      domains.push_back(std::move(domain));
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string(source_name) + ": " + e.what());
  }
  if (any_raw && any_p) {
    throw parse_error(std::string(source_name) + ": mixes 'p' and 'raw_w' entries");
  }
  if (any_raw) domains = participation_normalize(std::move(domains));
  return domains;
}

// ---- qubit-frequency sensitivity ----

struct SensitivityInput {
  double ec_mhz = 0.0;
  double ej_mhz = 0.0;
  double rel_dec = 0.0;  // fractional E_C variation
  double rel_dej = 0.0;  // fractional E_J variation
};

enum class SensitivityMode { worst_case, quadrature };

struct SensitivityBreakdown {
  double ec_term = 0.0;
  double ej_term = 0.0;
  double total = 0.0;
};

// |df01/f01| from dE_C/E_C and dE_J/E_J via the transmon derivative terms;
// worst_case combines by absolute-value sum, quadrature by root-sum-square.
inline SensitivityBreakdown frequency_sensitivity_terms(
    const SensitivityInput& input, SensitivityMode mode = SensitivityMode::worst_case) {
  if (input.rel_dec < 0.0 || input.rel_dej < 0.0) {
    throw domain_error("frequency_sensitivity: variations must be non-negative");
  }
  const double f01 = core::f01_from_energies(input.ec_mhz, input.ej_mhz);
  SensitivityBreakdown breakdown;
  breakdown.ec_term = std::abs((0.5 * std::sqrt(8.0 * input.ej_mhz / input.ec_mhz) - 1.0) *
                               (input.ec_mhz / f01)) *
                      input.rel_dec;
  breakdown.ej_term =
      std::abs(0.5 * std::sqrt(8.0 * input.ec_mhz / input.ej_mhz) * (input.ej_mhz / f01)) *
      input.rel_dej;
  breakdown.total = mode == SensitivityMode::worst_case
                        ? breakdown.ec_term + breakdown.ej_term
                        : std::hypot(breakdown.ec_term, breakdown.ej_term);
  return breakdown;
}

inline double frequency_sensitivity(const SensitivityInput& input,
                                    SensitivityMode mode = SensitivityMode::worst_case) {
  return frequency_sensitivity_terms(input, mode).total;
}

// ---- interchip-spacing sweep ----

struct SpacingSample {
  double d_um = 0.0;
  std::map<std::string, double> params;
};

// Sweep spec document:
// {d_target, samples:[{d, params:{...}}], derive:[...], constants:{...},
//  eval_at:[...], allow_extrapolation}
struct SweepSpec {
  double d_target_um = 0.0;
  std::vector<SpacingSample> samples;  // ascending in d
  std::vector<std::string> derive;
  std::map<std::string, double> constants;
  std::vector<double> eval_at_um;  // defaults to the sampled d values
  bool allow_extrapolation = false;
};

struct SweepRow {
  std::string quantity;
  double d_um = 0.0;
  double value = 0.0;
  double ref_value = 0.0;   // value at d_target
  double rel_change = 0.0;  // (value - ref)/ref
  double abs_change = 0.0;
};

namespace detail {

inline double interpolate(const SweepSpec& spec, const std::string& name, double d_um) {
  const auto& samples = spec.samples;
  if (d_um < samples.front().d_um || d_um > samples.back().d_um) {
    if (!spec.allow_extrapolation) {
      throw domain_error("spacing_sweep: d = " + std::to_string(d_um) +
                         " um lies outside the sampled range; extrapolation not allowed");
    }
  }
  std::size_t hi = 1;
  while (hi + 1 < samples.size() && samples[hi].d_um < d_um) ++hi;
  const auto& s0 = samples[hi - 1];
  const auto& s1 = samples[hi];
  const auto v0 = s0.params.find(name);
  const auto v1 = s1.params.find(name);
  if (v0 == s0.params.end() || v1 == s1.params.end()) {
    throw domain_error("spacing_sweep: parameter '" + name + "' missing from samples");
  }
  const double t = (d_um - s0.d_um) / (s1.d_um - s0.d_um);
  return v0->second + t * (v1->second - v0->second);
}

inline double constant(const SweepSpec& spec, const std::string& name) {
  const auto it = spec.constants.find(name);
  if (it == spec.constants.end()) {
    throw domain_error("spacing_sweep: derived quantity needs constant '" + name + "'");
  }
  return it->second;
}

// Derived quantities recomputed per interpolated point through core/capnet.
inline double derive_at(const SweepSpec& spec, const std::string& quantity, double d_um) {
  const auto param = [&](const char* name) { return interpolate(spec, name, d_um); };
  if (quantity == "ec_mhz") {
    return core::ec_from_capacitance(param("c_q_self_ff"));
  }
  if (quantity == "f01_mhz") {
    return core::f01_from_energies(core::ec_from_capacitance(param("c_q_self_ff")),
                                   constant(spec, "ej_mhz"));
  }
  if (quantity == "g_mhz") {
    return capnet::coupling_strength(constant(spec, "f1_mhz"), constant(spec, "f2_mhz"),
                                     param("c12_ff"), param("c1_self_ff"), param("c2_self_ff"));
  }
  if (quantity == "kappa_mhz") {
    return capnet::kappa_from_qc(param("fr_mhz"), param("qc"));
  }
  if (quantity == "qc_xy") {
    return capnet::qc_xy(param("c_q_self_ff"), param("c_q_xy_ff"),
                         derive_at(spec, "f01_mhz", d_um), constant(spec, "r_e_ohm"));
  }
  if (quantity == "tp_xy_us") {
    return capnet::tp_xy_us(param("c_q_self_ff"), param("c_q_xy_ff"),
                            derive_at(spec, "f01_mhz", d_um), constant(spec, "r_e_ohm"));
  }
  if (quantity == "tp_read_us") {
    const double f01 = derive_at(spec, "f01_mhz", d_um);
    const double fr = param("fr_mhz");
    return capnet::tp_read_us(derive_at(spec, "kappa_mhz", d_um),
                              derive_at(spec, "g_mhz", d_um), f01 - fr);
  }
  if (quantity == "tp_total_us") {
    return capnet::tp_combined(derive_at(spec, "tp_read_us", d_um),
                               derive_at(spec, "tp_xy_us", d_um))
        .tp_total_us;
  }
  throw domain_error("spacing_sweep: unknown derived quantity '" + quantity + "'");
}

}  // namespace detail

inline void validate(const SweepSpec& spec) {
  if (spec.samples.size() < 2) {
    throw domain_error("spacing_sweep: need at least 2 sample points");
  }
  for (std::size_t i = 0; i + 1 < spec.samples.size(); ++i) {
    if (!(spec.samples[i].d_um < spec.samples[i + 1].d_um)) {
      throw domain_error("spacing_sweep: sample spacings must be strictly increasing");
    }
  }
  const auto& first = spec.samples.front().params;
  for (const auto& sample : spec.samples) {
    if (sample.params.size() != first.size()) {
      throw domain_error("spacing_sweep: samples carry different parameter sets");
    }
    for (const auto& [name, value] : sample.params) {
      (void)value;
      if (first.find(name) == first.end()) {
        throw domain_error("spacing_sweep: samples carry different parameter sets");
      }
    }
  }
}

// Piecewise-linear interpolation of every parameter vs d; raw parameters and
// requested derived quantities are reported as relative changes against the
// declared d_target.
inline std::vector<SweepRow> spacing_sweep(const SweepSpec& spec) {
  validate(spec);
  std::vector<double> eval = spec.eval_at_um;
  if (eval.empty()) {
    for (const auto& sample : spec.samples) eval.push_back(sample.d_um);
  }
  std::vector<std::string> quantities;
  for (const auto& [name, value] : spec.samples.front().params) {
    (void)value;
    quantities.push_back(name);
  }
  std::sort(quantities.begin(), quantities.end());
  const std::size_t n_params = quantities.size();
  quantities.insert(quantities.end(), spec.derive.begin(), spec.derive.end());

  std::vector<SweepRow> rows;
  for (std::size_t q = 0; q < quantities.size(); ++q) {
    const bool is_param = q < n_params;
    const std::string& name = quantities[q];
    const double ref = is_param ? detail::interpolate(spec, name, spec.d_target_um)
                                : detail::derive_at(spec, name, spec.d_target_um);
    for (double d : eval) {
      SweepRow row;
      row.quantity = name;
      row.d_um = d;
      row.value = is_param ? detail::interpolate(spec, name, d) : detail::derive_at(spec, name, d);
      row.ref_value = ref;
      row.abs_change = row.value - ref;
      row.rel_change = ref != 0.0 ? row.abs_change / ref
                                  : std::numeric_limits<double>::quiet_NaN();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline SweepSpec load_sweep_spec(const nlohmann::json& doc,
                                 std::string_view source_name = "sweep spec") {
  SweepSpec spec;
  try {
    spec.d_target_um = doc.at("d_target").get<double>();
    for (const auto& sample : doc.at("samples")) {
      SpacingSample point;
      point.d_um = sample.at("d").get<double>();
      for (const auto& [name, value] : sample.at("params").items()) {
        point.params[name] = value.get<double>();
      }
      spec.samples.push_back(std::move(point));
    }
    if (doc.contains("derive")) {
      spec.derive = doc.at("derive").get<std::vector<std::string>>();
    }
    if (doc.contains("constants")) {
      for (const auto& [name, value] : doc.at("constants").items()) {
        spec.constants[name] = value.get<double>();
      }
    }
    if (doc.contains("eval_at")) {
      spec.eval_at_um = doc.at("eval_at").get<std::vector<double>>();
    }
    spec.allow_extrapolation = doc.value("allow_extrapolation", false);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string(source_name) + ": " + e.what());
  }
  std::sort(spec.samples.begin(), spec.samples.end(),
            [](const SpacingSample& a, const SpacingSample& b) { return a.d_um < b.d_um; });
  validate(spec);
  return spec;
}

}  // namespace flipkit::charstats
