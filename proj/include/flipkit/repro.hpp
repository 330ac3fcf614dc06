#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flipkit/capnet.hpp"
#include "flipkit/charstats.hpp"
#include "flipkit/core.hpp"
#include "flipkit/datasets.hpp"
#include "flipkit/errors.hpp"
#include "flipkit/rb.hpp"

// Recomputes every headline number of the bundled expectations dataset
// through the library operations and compares at the published precision.
// Backs the reproduce-paper subcommand and the acceptance suite.
namespace flipkit::repro {

struct Check {
  std::string group;
  std::string id;
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;  // absolute when relative == false
  bool relative = false;
  std::string unit;
  bool passed = false;
  std::string note;
};

namespace detail {

inline void finish(Check& check) {
  const double scale = check.relative ? std::abs(check.expected) : 1.0;
  check.passed = std::abs(check.actual - check.expected) <= check.tolerance * scale + 1e-12;
}

inline void add(std::vector<Check>& checks, Check check) {
  finish(check);
  checks.push_back(std::move(check));
}

}  // namespace detail

inline std::vector<Check> run_checks(std::string_view group_filter = "",
                                     const nlohmann::json* expectations_override = nullptr) {
  const nlohmann::json expect =
      expectations_override ? *expectations_override : bundled::expectations();
  const capnet::CapacitanceRecord caps =
      capnet::load_capacitance_record_text(bundled::find("tableS3"), "bundled:tableS3");
  const auto& device = expect.at("device_params");
  const auto& q1 = device.at("q1");
  const auto& q2 = device.at("q2");
  const double r_e = device.at("xy_impedance_ohm").get<double>();

  std::vector<Check> checks;
  const auto wanted = [&](std::string_view group) {
    return group_filter.empty() || group_filter == group;
  };

  if (wanted("purcell")) {
    struct QubitRow {
      const char* name;
      const char* cap_label;
      const char* xy_label;
      const nlohmann::json* params;
      const nlohmann::json* expected;
    };
    const auto& purcell = expect.at("purcell_us");
    const QubitRow rows[2] = {
        {"q1", "q1", "XY1", &q1, &purcell.at("q1")},
        {"q2", "q2", "XY2", &q2, &purcell.at("q2")},
    };
    for (const auto& row : rows) {
      const double f01 = row.params->at("f01_mhz").get<double>();
      const double fr = row.params->at("fr_mhz").get<double>();
      const double kappa = row.params->at("kappa_meas_mhz").get<double>();
      const double g = row.params->at("g_qr_meas_mhz").get<double>();
      const double c_self = caps.self_ff(row.cap_label);
      const double c_xy = caps.mutual_ff(row.cap_label, row.xy_label);
      const double tp_read = capnet::tp_read_us(kappa, g, f01 - fr);
      const double tp_xy = capnet::tp_xy_us(c_self, c_xy, f01, r_e);
      const capnet::PurcellBudget budget = capnet::tp_combined(tp_read, tp_xy);
      detail::add(checks, {"purcell", std::string("tp_read_") + row.name,
                           row.expected->at("read").get<double>(), tp_read, 0.02, true, "us",
                           false, "measured kappa, g and detuning"});
      detail::add(checks, {"purcell", std::string("tp_xy_") + row.name,
                           row.expected->at("xy").get<double>(), tp_xy, 0.02, true, "us", false,
                           "tableS3 capacitances"});
      detail::add(checks, {"purcell", std::string("tp_total_") + row.name,
                           row.expected->at("total").get<double>(), budget.tp_total_us, 0.02,
                           true, "us", false, "harmonic combination"});
    }
  }

  if (wanted("kappa")) {
    for (const auto& resonator : expect.at("resonators")) {
      const double fr = resonator.at("fr_sim_mhz").get<double>();
      const double qc = resonator.at("qc_sim").get<double>();
      const double listed = resonator.at("kappa_sim_mhz").get<double>();
      Check check{"kappa", "kappa_" + resonator.at("id").get<std::string>(), listed,
                  capnet::kappa_from_qc(fr, qc), 0.005, false, "MHz", false,
                  "fr_sim/qc_sim vs listed kappa at printed precision"};
      detail::add(checks, std::move(check));
    }
  }

  if (wanted("coupling")) {
    const auto& coupling = expect.at("coupling_sim_mhz");
    const double g1 = capnet::coupling_strength(
        q1.at("f01_mhz").get<double>(), q1.at("fr_mhz").get<double>(), caps.mutual_ff("q1", "res1"),
        caps.effective_self_ff("q1"), caps.effective_self_ff("res1"));
    detail::add(checks, {"coupling", "g_q1_res1", coupling.at("g_q1_res1").get<double>(), g1, 0.05,
                         true, "MHz", false, "measured f01/fr with tableS3 capacitances"});
    const double g2 = capnet::coupling_strength(
        q2.at("f01_mhz").get<double>(), q2.at("fr_mhz").get<double>(), caps.mutual_ff("q2", "res2"),
        caps.effective_self_ff("q2"), caps.effective_self_ff("res2"));
    detail::add(checks, {"coupling", "g_q2_res2", coupling.at("g_q2_res2").get<double>(), g2, 0.05,
                         true, "MHz", false, "measured f01/fr with tableS3 capacitances"});
    // qubit-coupler rows are excluded: no frequency pair reproduces them
  }

  if (wanted("fidelity")) {
    const auto& limits = expect.at("fidelity_limits_pct");
    const double tau_1q = device.at("gate_time_1q_ns").get<double>();
    const double tau_2q = device.at("gate_time_2q_ns").get<double>();
    const rb::CoherenceRecord rec1 = rb::make_coherence_record(
        q1.at("t1_us_at_bias").get<double>(), q1.at("t2star_us_at_bias").get<double>());
    const rb::CoherenceRecord rec2 = rb::make_coherence_record(
        q2.at("t1_us_at_bias").get<double>(), q2.at("t2star_us_at_bias").get<double>());
    const double f_q1 = rb::coherence_limit(1, tau_1q, {rec1}) * 100.0;
    const double f_q2 = rb::coherence_limit(1, tau_1q, {rec2}) * 100.0;
    const double f_2q = rb::coherence_limit(2, tau_2q, {rec1, rec2}) * 100.0;
    detail::add(checks, {"fidelity", "f_1q_q1", limits.at("q1_1q").get<double>(), f_q1, 0.001,
                         false, "%", false, "coherence limit at the operating bias"});
    detail::add(checks, {"fidelity", "f_1q_q2", limits.at("q2_1q").get<double>(), f_q2, 0.001,
                         false, "%", false, "coherence limit at the operating bias"});
    detail::add(checks, {"fidelity", "f_1q_mean", limits.at("mean_1q").get<double>(),
                         0.5 * (f_q1 + f_q2), 0.01, false, "%", false, "two-qubit average"});
    detail::add(checks, {"fidelity", "f_2q", limits.at("two_q").get<double>(), f_2q, 0.01, false,
                         "%", false, "two-qubit gate coherence limit"});
  }

  if (wanted("sensitivity")) {
    const auto& sens = expect.at("sensitivity");
    const charstats::SensitivityInput input{
        sens.at("ec_mhz").get<double>(), sens.at("ej_mhz").get<double>(),
        sens.at("rel_dec").get<double>(), sens.at("rel_dej").get<double>()};
    const double total_pct = charstats::frequency_sensitivity(input) * 100.0;
    detail::add(checks, {"sensitivity", "df01_rel", sens.at("df01_rel_pct").get<double>(),
                         total_pct, 0.1, false, "%", false, "worst-case linear propagation"});
  }

  if (wanted("metrology")) {
    const charstats::CornerDataset corners =
        charstats::load_corner_dataset(bundled::find("tableS7"), "bundled:tableS7");
    const auto& metrology = expect.at("metrology");
    const auto& fc2 = metrology.at("fc2_cq1");
    for (const auto& record : corners.records) {
      if (record.run == "FC2" && record.module == "CQ1") {
        const charstats::ModuleGeometry geometry = charstats::module_geometry(record);
        detail::add(checks, {"metrology", "fc2_cq1_d", fc2.at("d_um").get<double>(),
                             geometry.d_um, 0.005, false, "um", false, "per-module spacing"});
        detail::add(checks, {"metrology", "fc2_cq1_dd", fc2.at("dd_um").get<double>(),
                             geometry.delta_d_um, 0.005, false, "um", false, "per-module tilt"});
        detail::add(checks,
                    {"metrology", "fc2_cq1_dtheta", fc2.at("dtheta_urad").get<double>(),
                     geometry.delta_theta_urad, 0.5, false, "urad", false, "per-module tilt angle"});
      }
    }
    const charstats::PopulationStats stats = charstats::population_stats(
        corners.records, charstats::ExclusionPolicy::honor_flags);
    const auto& population = metrology.at("population");
    const auto add_pop = [&](const char* id, const charstats::QuantityStats& quantity,
                             const nlohmann::json& pair, double tol, const char* unit) {
      detail::add(checks, {"metrology", std::string(id) + "_mean", pair.at(0).get<double>(),
                           quantity.mean, tol, false, unit, false, "17 included modules"});
      detail::add(checks, {"metrology", std::string(id) + "_std", pair.at(1).get<double>(),
                           quantity.stddev, tol, false, unit, false, "sample std, n-1"});
    };
    add_pop("pop_d", stats.d_um, population.at("d_um"), 0.05, "um");
    add_pop("pop_dd", stats.delta_d_um, population.at("dd_um"), 0.05, "um");
    add_pop("pop_dtheta", stats.delta_theta_urad, population.at("dtheta_urad"), 0.5, "urad");
  }

  if (wanted("junction")) {
    const auto& junction = expect.at("junction");
    const double gap_uev = bundled::config().at("al_gap_uev").get<double>();
    const core::JunctionEnergy energy =
        core::ej_from_junction(junction.at("rn_ohm").get<double>(), gap_uev);
    detail::add(checks, {"junction", "ej_from_rn", junction.at("ej_target_mhz").get<double>(),
                         energy.ej_mhz, junction.at("tol_rel").get<double>(), true, "MHz", false,
                         "Ambegaokar-Baratoff with the configured gap"});
  }

  if (wanted("rb")) {
    const auto& rb_expect = expect.at("rb");
    const double r_cz = rb_expect.at("r_cz").get<double>();
    const double ratio = 1.0 - 4.0 / 3.0 * r_cz;  // p_int/p_ref implied by r_cz at d=4
    detail::add(checks, {"rb", "r_cz_from_ratio", r_cz, rb::interleaved_error(1.0, ratio, 4),
                         1e-12, false, "", false, "interleaved arithmetic round trip"});
    for (const char* id : {"r_1q_q1", "r_1q_q2", "r_2q"}) {
      const int dim = std::string_view(id) == "r_2q" ? 4 : 2;
      const double r = rb_expect.at(id).get<double>();
      const double round_trip = rb::error_from_decay(rb::decay_from_error(r, dim), dim);
      detail::add(checks, {"rb", std::string(id) + "_p_round_trip", r, round_trip, 1e-12, false,
                           "", false, "r <-> p bijection"});
    }
  }

  return checks;
}

inline bool all_passed(const std::vector<Check>& checks) {
  for (const auto& check : checks) {
    if (!check.passed) return false;
  }
  return true;
}

inline void print_table(std::ostream& out, const std::vector<Check>& checks) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-6s %-12s %-22s %14s %14s %12s %s", "state", "group",
                "check", "expected", "actual", "tolerance", "unit");
  out << line << "\n";
  int failed = 0;
  for (const auto& check : checks) {
    if (!check.passed) ++failed;
    std::snprintf(line, sizeof(line), "%-6s %-12s %-22s %14.6g %14.6g %11.3g%s %s",
                  check.passed ? "PASS" : "FAIL", check.group.c_str(), check.id.c_str(),
                  check.expected, check.actual, check.tolerance, check.relative ? "r" : "a",
                  check.unit.c_str());
    out << line << "\n";
  }
  std::snprintf(line, sizeof(line), "%zu checks, %d failed", checks.size(), failed);
  out << line << "\n";
}

}  // namespace flipkit::repro
