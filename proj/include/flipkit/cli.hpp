#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flipkit/capnet.hpp"
#include "flipkit/charstats.hpp"
#include "flipkit/core.hpp"
#include "flipkit/csv.hpp"
#include "flipkit/datasets.hpp"
#include "flipkit/errors.hpp"
#include "flipkit/rb.hpp"
#include "flipkit/report.hpp"
#include "flipkit/repro.hpp"
#include "flipkit/resonfit.hpp"
#include "flipkit/spectrum.hpp"
#include "flipkit/version.hpp"

// Command-line front end. All numbers in reports come from single library
// calls; this layer only parses flags, resolves inputs and formats output.
// Exit codes: 0 success, 2 validation error, 3 numerical non-convergence,
// 64 unknown subcommand.
namespace flipkit::cli {

struct Io {
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

struct CommonOptions {
  std::string output;
  std::string format = "json";
};

inline void add_common(CLI::App& app, CommonOptions& common,
                       const std::string& default_format = "json") {
  common.format = default_format;
  app.add_option("--output", common.output, "write the report to this file instead of stdout");
  app.add_option("--format", common.format, "report format")
      ->check(CLI::IsMember({"json", "csv"}));
}

inline int emit(const report::Report& rep, const CommonOptions& common, Io io) {
  std::ostringstream buffer;
  if (common.format == "csv") {
    report::write_csv(buffer, rep);
  } else {
    report::write_json(buffer, rep);
  }
  for (const auto& warning : rep.warnings) {
    io.err << "warning: " << warning << "\n";
  }
  if (common.output.empty()) {
    io.out << buffer.str();
  } else {
    std::ofstream file(common.output, std::ios::binary);
    if (!file) throw parse_error("cannot write output file '" + common.output + "'");
    file << buffer.str();
  }
  return 0;
}

inline int emit_text(const std::string& text, const std::string& output, Io io) {
  if (output.empty()) {
    io.out << text;
  } else {
    std::ofstream file(output, std::ios::binary);
    if (!file) throw parse_error("cannot write output file '" + output + "'");
    file << text;
  }
  return 0;
}

// CLI11 wants a reversed argument vector.
inline int parse_app(CLI::App& app, std::vector<std::string> args, Io io) {
  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    io.err << "error: " << e.what() << "\n";
    return 2;
  }
  return -1;  // parsed, run the command
}

}  // namespace detail

// ---- subcommands ----

inline int cmd_transmon(std::vector<std::string> args, Io io) {
  CLI::App app{"transmon parameters from spectrum, energies, or capacitance + junction"};
  detail::CommonOptions common;
  double f01 = 0, alpha = 0, ec = 0, ej = 0, c_self = 0, rn = 0;
  double gap = bundled::config().at("al_gap_uev").get<double>();
  double cz_f01 = 0, cz_alpha = 0;
  auto* o_f01 = app.add_option("--f01-mhz", f01, "measured |0>-|1> transition frequency");
  auto* o_alpha = app.add_option("--alpha-mhz", alpha, "measured anharmonicity (negative)");
  auto* o_ec = app.add_option("--ec-mhz", ec, "charging energy / h");
  auto* o_ej = app.add_option("--ej-mhz", ej, "Josephson energy / h");
  auto* o_c = app.add_option("--c-self-ff", c_self, "qubit self-capacitance");
  auto* o_rn = app.add_option("--rn-ohm", rn, "junction normal-state resistance");
  app.add_option("--gap-uev", gap, "superconducting gap (default: bundled config value)");
  auto* o_czf = app.add_option("--cz02-f01-mhz", cz_f01, "f01 of the second qubit for f_CZ02");
  auto* o_cza = app.add_option("--cz02-alpha-mhz", cz_alpha, "alpha of the second qubit");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  report::Report rep;
  rep.subcommand = "transmon";
  core::TransmonParams params;
  if (*o_f01 && *o_alpha) {
    params = core::transmon_from_spectrum(f01, alpha);
    rep.parameters = {{"f01_mhz", f01}, {"alpha_mhz", alpha}};
  } else if (*o_ec && *o_ej) {
    params = core::transmon_from_energies(ec, ej);
    rep.parameters = {{"ec_mhz", ec}, {"ej_mhz", ej}};
  } else if (*o_c) {
    const double ec_value = core::ec_from_capacitance(c_self);
    rep.parameters = {{"c_self_ff", c_self}};
    double ej_value = ej;
    if (*o_rn) {
      const core::JunctionEnergy junction = core::ej_from_junction(rn, gap);
      ej_value = junction.ej_mhz;
      rep.parameters["rn_ohm"] = rn;
      rep.parameters["gap_uev"] = gap;
      rep.results["ic_na"] = junction.ic_na;
    } else if (!*o_ej) {
      throw domain_error("transmon: --c-self-ff needs --ej-mhz or --rn-ohm");
    } else {
      rep.parameters["ej_mhz"] = ej;
    }
    params = core::transmon_from_energies(ec_value, ej_value);
  } else {
    throw domain_error(
        "transmon: give --f01-mhz/--alpha-mhz, --ec-mhz/--ej-mhz, or --c-self-ff with a junction");
  }
  rep.results["f01_mhz"] = params.f01_mhz;
  rep.results["alpha_mhz"] = params.alpha_mhz;
  rep.results["ec_mhz"] = params.ec_mhz;
  rep.results["ej_mhz"] = params.ej_mhz;
  rep.results["ej_over_ec"] = params.ej_over_ec;
  if (!core::transmon_approximation_ok(params.ec_mhz, params.ej_mhz)) {
    rep.warnings.push_back("E_J/E_C below 20: the transmon approximation degrades");
  }
  if (*o_czf || *o_cza) {
    if (!(*o_czf && *o_cza)) {
      throw domain_error("transmon: --cz02-f01-mhz and --cz02-alpha-mhz go together");
    }
    const core::TransmonParams other = core::transmon_from_spectrum(cz_f01, cz_alpha);
    rep.parameters["cz02_f01_mhz"] = cz_f01;
    rep.parameters["cz02_alpha_mhz"] = cz_alpha;
    rep.results["cz02_mhz"] = core::cz02_frequency(params, other);
  }
  return detail::emit(rep, common, io);
}

inline int cmd_junction(std::vector<std::string> args, Io io) {
  CLI::App app{"Josephson energy and critical current from junction resistance"};
  detail::CommonOptions common;
  double rn = 0;
  double gap = bundled::config().at("al_gap_uev").get<double>();
  app.add_option("--rn-ohm", rn, "normal-state resistance")->required();
  auto* o_gap =
      app.add_option("--gap-uev", gap, "superconducting gap (default: bundled config value)");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  report::Report rep;
  rep.subcommand = "junction";
  rep.parameters = {{"rn_ohm", rn}, {"gap_uev", gap}};
  const core::JunctionEnergy energy = core::ej_from_junction(rn, gap);
  rep.results["ej_mhz"] = energy.ej_mhz;
  rep.results["ic_na"] = energy.ic_na;
  if (!*o_gap) {
    for (const auto& note :
         bundled::config().at("provenance").at("notes").get<std::vector<std::string>>()) {
      rep.notes.push_back(note);
    }
  }
  return detail::emit(rep, common, io);
}

inline int cmd_coupling(std::vector<std::string> args, Io io) {
  CLI::App app{"capacitive coupling strength between two modes"};
  detail::CommonOptions common;
  double f1 = 0, f2 = 0, c12 = 0, c1 = 0, c2 = 0;
  std::string c1_kind = "lumped", c2_kind = "lumped", record_path, node_a, node_b;
  app.add_option("--f1-mhz", f1, "frequency of mode 1")->required();
  app.add_option("--f2-mhz", f2, "frequency of mode 2")->required();
  auto* o_c12 = app.add_option("--c12-ff", c12, "coupling capacitance");
  auto* o_c1 = app.add_option("--c1-ff", c1, "self-capacitance of mode 1 (raw)");
  auto* o_c2 = app.add_option("--c2-ff", c2, "self-capacitance of mode 2 (raw)");
  app.add_option("--c1-kind", c1_kind, "lumped or quarter_wave")
      ->check(CLI::IsMember({"lumped", "quarter_wave"}));
  app.add_option("--c2-kind", c2_kind, "lumped or quarter_wave")
      ->check(CLI::IsMember({"lumped", "quarter_wave"}));
  auto* o_record = app.add_option("--record", record_path,
                                  "capacitance record (path or bundled:tableS3/tableS4)");
  app.add_option("--node-a", node_a, "record node for mode 1");
  app.add_option("--node-b", node_b, "record node for mode 2");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  report::Report rep;
  rep.subcommand = "coupling";
  rep.parameters = {{"f1_mhz", f1}, {"f2_mhz", f2}};
  double c1_eff = 0, c2_eff = 0, c12_value = 0;
  if (*o_record) {
    if (node_a.empty() || node_b.empty()) {
      throw domain_error("coupling: --record needs --node-a and --node-b");
    }
    const bundled::InputDoc doc = bundled::resolve_input(record_path);
    const capnet::CapacitanceRecord record =
        capnet::load_capacitance_record_text(doc.content, doc.path);
    rep.inputs.push_back(report::to_ref(doc));
    rep.notes = record.notes;
    rep.parameters["node_a"] = node_a;
    rep.parameters["node_b"] = node_b;
    c12_value = record.mutual_ff(node_a, node_b);
    c1_eff = record.effective_self_ff(node_a);
    c2_eff = record.effective_self_ff(node_b);
  } else {
    if (!(*o_c12 && *o_c1 && *o_c2)) {
      throw domain_error("coupling: give --c12-ff/--c1-ff/--c2-ff or a --record with nodes");
    }
    rep.parameters["c12_ff"] = c12;
    rep.parameters["c1_ff"] = c1;
    rep.parameters["c2_ff"] = c2;
    rep.parameters["c1_kind"] = c1_kind;
    rep.parameters["c2_kind"] = c2_kind;
    c12_value = c12;
    c1_eff = capnet::effective_capacitance(c1, capnet::mode_kind_from_string(c1_kind));
    c2_eff = capnet::effective_capacitance(c2, capnet::mode_kind_from_string(c2_kind));
  }
  rep.results["c12_ff"] = c12_value;
  rep.results["c1_eff_ff"] = c1_eff;
  rep.results["c2_eff_ff"] = c2_eff;
  rep.results["g_mhz"] = capnet::coupling_strength(f1, f2, c12_value, c1_eff, c2_eff);
  return detail::emit(rep, common, io);
}

inline int cmd_purcell(std::vector<std::string> args, Io io) {
  CLI::App app{"Purcell budget via the readout resonator and the XY line"};
  detail::CommonOptions common;
  double kappa = 0, g = 0, detuning = 0, c_self = 0, c_xy = 0, f01 = 0;
  double r_e = bundled::config().at("xy_impedance_ohm").get<double>();
  app.add_option("--kappa-mhz", kappa, "resonator linewidth kappa/2pi")->required();
  app.add_option("--g-mhz", g, "qubit-resonator coupling")->required();
  app.add_option("--detuning-mhz", detuning, "qubit-resonator detuning f01 - fr")->required();
  app.add_option("--c-self-ff", c_self, "qubit self-capacitance")->required();
  app.add_option("--c-xy-ff", c_xy, "qubit-XY coupling capacitance")->required();
  app.add_option("--f01-mhz", f01, "qubit transition frequency")->required();
  app.add_option("--r-e-ohm", r_e, "XY line impedance (default: bundled config value)");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  report::Report rep;
  rep.subcommand = "purcell";
  rep.parameters = {{"kappa_mhz", kappa}, {"g_mhz", g},         {"detuning_mhz", detuning},
                    {"c_self_ff", c_self}, {"c_xy_ff", c_xy},   {"f01_mhz", f01},
                    {"r_e_ohm", r_e}};
  const double tp_read = capnet::tp_read_us(kappa, g, detuning);
  const double tp_xy = capnet::tp_xy_us(c_self, c_xy, f01, r_e);
  const capnet::PurcellBudget budget = capnet::tp_combined(tp_read, tp_xy);
  rep.results["tp_read_us"] = report::json_number(budget.tp_read_us);
  rep.results["tp_xy_us"] = report::json_number(budget.tp_xy_us);
  rep.results["tp_total_us"] = report::json_number(budget.tp_total_us);
  rep.results["qc_xy"] = report::json_number(capnet::qc_xy(c_self, c_xy, f01, r_e));
  return detail::emit(rep, common, io);
}

inline int cmd_kappa(std::vector<std::string> args, Io io) {
  CLI::App app{"resonator linewidth from frequency and coupling quality factor"};
  detail::CommonOptions common;
  double fr = 0, qc = 0;
  app.add_option("--fr-mhz", fr, "resonator frequency")->required();
  app.add_option("--qc", qc, "coupling quality factor")->required();
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  report::Report rep;
  rep.subcommand = "kappa";
  rep.parameters = {{"fr_mhz", fr}, {"qc", qc}};
  rep.results["kappa_over_2pi_mhz"] = capnet::kappa_from_qc(fr, qc);
  return detail::emit(rep, common, io);
}

inline int cmd_spectrum_sweep(std::vector<std::string> args, Io io) {
  CLI::App app{"flux sweep of a coupled-mode system; CSV level curve"};
  detail::CommonOptions common;
  std::string system_path, coupler;
  double fc0 = 0, flux_from = 0, flux_to = 0;
  std::size_t points = 0;
  int tracks = -1;
  std::vector<std::size_t> gap_tracks;
  app.add_option("--system", system_path, "system definition JSON")->required();
  app.add_option("--coupler", coupler, "label of the flux-tuned mode")->required();
  app.add_option("--fc0-mhz", fc0, "zero-bias coupler frequency")->required();
  app.add_option("--flux-from", flux_from, "sweep start, flux quanta")->required();
  app.add_option("--flux-to", flux_to, "sweep end, flux quanta")->required();
  app.add_option("--points", points, "number of grid points")->required();
  app.add_option("--tracks", tracks, "number of eigenvalue tracks (default all)");
  app.add_option("--gap-tracks", gap_tracks, "extract the avoided crossing between two tracks")
      ->expected(2);
  detail::add_common(app, common, "csv");
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  if (points < 2 || !(flux_to > flux_from)) {
    throw domain_error("spectrum-sweep: need at least 2 points and flux-to > flux-from");
  }
  const bundled::InputDoc doc = bundled::resolve_input(system_path);
  const spectrum::SystemDef system = spectrum::load_system_text(doc.content, doc.path);
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = flux_from + (flux_to - flux_from) * static_cast<double>(k) /
                              static_cast<double>(points - 1);
  }
  const spectrum::LevelCurve curve = spectrum::flux_sweep(system, coupler, fc0, grid, tracks);
  std::optional<spectrum::CrossingResult> crossing;
  if (!gap_tracks.empty()) {
    crossing = spectrum::avoided_crossing(curve, gap_tracks[0], gap_tracks[1]);
  }

  if (common.format == "csv") {
    std::ostringstream buffer;
    if (crossing) {
      buffer << "# min_gap_mhz=" << csv::format_double(crossing->min_gap_mhz)
             << " flux_at_min=" << csv::format_double(crossing->flux_at_min) << "\n";
    }
    spectrum::write_level_curve_csv(buffer, curve);
    return detail::emit_text(buffer.str(), common.output, io);
  }
  report::Report rep;
  rep.subcommand = "spectrum-sweep";
  rep.inputs.push_back(report::to_ref(doc));
  rep.parameters = {{"coupler", coupler},   {"fc0_mhz", fc0},   {"flux_from", flux_from},
                    {"flux_to", flux_to},   {"points", points}, {"tracks", tracks}};
  rep.results["flux"] = curve.flux_phi0;
  rep.results["tracks"] = curve.tracks;
  if (crossing) {
    rep.results["min_gap_mhz"] = crossing->min_gap_mhz;
    rep.results["flux_at_min"] = crossing->flux_at_min;
  }
  return detail::emit(rep, common, io);
}

inline int cmd_s21_fit(std::vector<std::string> args, Io io) {
  CLI::App app{"circle fit of a notch-type S21 trace"};
  detail::CommonOptions common;
  std::string input;
  app.add_option("--input", input, "trace CSV (freq_mhz, re, im)")->required();
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  const bundled::InputDoc doc = bundled::resolve_input(input);
  const resonfit::S21Trace trace = resonfit::load_trace_csv(doc.content, doc.path);
  const resonfit::ResonatorFit fit = resonfit::fit_trace(trace);
  report::Report rep;
  rep.subcommand = "s21-fit";
  rep.inputs.push_back(report::to_ref(doc));
  rep.results["fr_mhz"] = fit.fr_mhz;
  rep.results["ql"] = fit.ql;
  rep.results["qc_mag"] = fit.qc_mag;
  rep.results["phi_rad"] = fit.phi_rad;
  rep.results["qi"] = report::json_number(fit.qi);
  rep.results["kappa_over_2pi_mhz"] = fit.kappa_over_2pi_mhz;
  rep.results["amp"] = fit.amp;
  rep.results["phase_rad"] = fit.phase_rad;
  rep.results["delay_ns"] = fit.delay_ns;
  rep.results["residual_rms"] = fit.residual_rms;
  return detail::emit(rep, common, io);
}

inline int cmd_rb_fit(std::vector<std::string> args, Io io) {
  CLI::App app{"reference randomized-benchmarking decay fit"};
  detail::CommonOptions common;
  std::string input;
  int dim = 2;
  app.add_option("--input", input, "dataset CSV (m, sequence_index, fidelity)")->required();
  app.add_option("--dim", dim, "Hilbert dimension d = 2^N (default 2)");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  const bundled::InputDoc doc = bundled::resolve_input(input);
  const rb::RBDataset dataset = rb::load_dataset_csv(doc.content, dim, doc.path);
  const rb::RBFitResult fit = rb::fit_reference(dataset);
  report::Report rep;
  rep.subcommand = "rb-fit";
  rep.inputs.push_back(report::to_ref(doc));
  rep.parameters = {{"dim", dim}};
  rep.results["a"] = fit.a;
  rep.results["b"] = fit.b;
  rep.results["p"] = fit.p;
  rep.results["r"] = fit.r;
  rep.results["a_err"] = fit.a_err;
  rep.results["b_err"] = fit.b_err;
  rep.results["p_err"] = fit.p_err;
  rep.results["r_err"] = fit.r_err;
  rep.results["residual_rms"] = fit.residual_rms;
  rep.notes.push_back("standard errors are from the fit covariance, not bootstrap");
  return detail::emit(rep, common, io);
}

inline int cmd_rb_interleaved(std::vector<std::string> args, Io io) {
  CLI::App app{"per-gate error from reference and interleaved decay constants"};
  detail::CommonOptions common;
  double p_ref = 0, p_int = 0;
  int dim = 4;
  app.add_option("--p-ref", p_ref, "reference decay constant")->required();
  app.add_option("--p-int", p_int, "interleaved decay constant")->required();
  app.add_option("--dim", dim, "Hilbert dimension d = 2^N (default 4)");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  report::Report rep;
  rep.subcommand = "rb-interleaved";
  rep.parameters = {{"p_ref", p_ref}, {"p_int", p_int}, {"dim", dim}};
  rep.results["r_gate"] = rb::interleaved_error(p_ref, p_int, dim);
  if (rb::interleaved_inverted(p_ref, p_int)) {
    rep.warnings.push_back("interleaved decay is slower than the reference; r_gate is negative");
  }
  return detail::emit(rep, common, io);
}

inline int cmd_coherence_limit(std::vector<std::string> args, Io io) {
  CLI::App app{"coherence-limited average gate fidelity"};
  detail::CommonOptions common;
  double gate_ns = 0;
  std::vector<double> t1, t2star;
  app.add_option("--gate-ns", gate_ns, "gate duration")->required();
  app.add_option("--t1-us", t1, "relaxation time, one per qubit")->required();
  app.add_option("--t2star-us", t2star, "Ramsey decay time, one per qubit")->required();
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  if (t1.size() != t2star.size()) {
    throw domain_error("coherence-limit: --t1-us and --t2star-us counts differ");
  }
  report::Report rep;
  rep.subcommand = "coherence-limit";
  rep.parameters = {{"gate_ns", gate_ns}, {"t1_us", t1}, {"t2star_us", t2star}};
  std::vector<rb::CoherenceRecord> records;
  auto tphi = report::ordered_json::array();
  for (std::size_t k = 0; k < t1.size(); ++k) {
    records.push_back(rb::make_coherence_record(t1[k], t2star[k]));
    tphi.push_back(report::json_number(records.back().tphi_us));
    if (records.back().t2_limit_violated) {
      rep.warnings.push_back("qubit " + std::to_string(k) +
                             ": T2* exceeds 2 T1; pure dephasing clamped to infinity");
    }
  }
  const double fidelity =
      rb::coherence_limit(static_cast<int>(records.size()), gate_ns, records);
  rep.results["n_qubits"] = records.size();
  rep.results["fidelity"] = fidelity;
  rep.results["fidelity_pct"] = fidelity * 100.0;
  rep.results["tphi_us"] = tphi;
  return detail::emit(rep, common, io);
}

inline int cmd_metrology(std::vector<std::string> args, Io io) {
  CLI::App app{"interchip spacing and tilt statistics from corner gap data"};
  detail::CommonOptions common;
  std::string dataset_path = "bundled:tableS7";
  std::vector<std::string> excludes;
  std::string only_module;
  bool include_all = false, recompute = false;
  app.add_option("--dataset", dataset_path, "corner dataset CSV (default bundled:tableS7)");
  app.add_option("--exclude", excludes, "exclude a run (FC1) or module (FC2:CQ1); repeatable");
  app.add_flag("--include-all", include_all, "ignore the dataset's excluded flags");
  app.add_flag("--recompute-corners", recompute,
               "compute statistics from corner gaps instead of the tabulated columns");
  app.add_option("--module", only_module, "report a single module (RUN:MODULE)");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  const bundled::InputDoc doc = bundled::resolve_input(dataset_path);
  const charstats::CornerDataset corners = charstats::load_corner_dataset(doc.content, doc.path);
  report::Report rep;
  rep.subcommand = "metrology";
  rep.inputs.push_back(report::to_ref(doc));
  rep.notes = corners.notes;
  rep.parameters = {{"exclude", excludes},
                    {"include_all", include_all},
                    {"recompute_corners", recompute}};

  auto modules = report::ordered_json::array();
  for (const auto& record : corners.records) {
    const std::string id = record.run + ":" + record.module;
    if (!only_module.empty() && id != only_module) continue;
    const charstats::ModuleGeometry geometry = charstats::module_geometry(record);
    report::ordered_json row;
    row["run"] = record.run;
    row["module"] = record.module;
    row["d_um"] = geometry.d_um;
    row["dd_um"] = geometry.delta_d_um;
    row["dtheta_urad"] = geometry.delta_theta_urad;
    row["excluded"] = record.excluded;
    if (!record.exclusion_reason.empty()) row["reason"] = record.exclusion_reason;
    modules.push_back(std::move(row));
  }
  if (!only_module.empty() && modules.empty()) {
    throw domain_error("metrology: module '" + only_module + "' not in dataset");
  }
  rep.results["modules"] = modules;

  if (only_module.empty()) {
    const auto policy = include_all ? charstats::ExclusionPolicy::include_all
                                    : charstats::ExclusionPolicy::honor_flags;
    const charstats::PopulationStats stats =
        charstats::population_stats(corners.records, policy, excludes, recompute);
    const auto quantity = [](const charstats::QuantityStats& q) {
      return report::ordered_json{{"mean", q.mean}, {"std", q.stddev}, {"n", q.n}};
    };
    rep.results["population"] = {{"d_um", quantity(stats.d_um)},
                                 {"dd_um", quantity(stats.delta_d_um)},
                                 {"dtheta_urad", quantity(stats.delta_theta_urad)},
                                 {"source", recompute ? "corners" : "tabulated"}};
    auto discrepancies = report::ordered_json::array();
    for (const auto& item : charstats::tabulated_discrepancies(corners.records)) {
      discrepancies.push_back({{"run", item.run},
                               {"module", item.module},
                               {"quantity", item.quantity},
                               {"tabulated", item.tabulated},
                               {"recomputed", item.recomputed}});
    }
    rep.results["tabulated_discrepancies"] = discrepancies;
  }
  return detail::emit(rep, common, io);
}

inline int cmd_loss_q(std::vector<std::string> args, Io io) {
  CLI::App app{"equivalent Q factor from a participation-ratio loss budget"};
  detail::CommonOptions common;
  std::string input;
  app.add_option("--input", input, "loss budget JSON: [{name, p or raw_w, tan_delta}]")
      ->required();
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  const bundled::InputDoc doc = bundled::resolve_input(input);
  const std::vector<charstats::LossDomain> domains =
      charstats::load_loss_budget(bundled::parse_json(doc), doc.path);
  report::Report rep;
  rep.subcommand = "loss-q";
  rep.inputs.push_back(report::to_ref(doc));
  auto rows = report::ordered_json::array();
  for (const auto& domain : domains) {
    rows.push_back({{"name", domain.name},
                    {"p", domain.participation},
                    {"tan_delta", domain.tan_delta}});
  }
  rep.results["domains"] = rows;
  rep.results["q"] = report::json_number(charstats::loss_q(domains));
  return detail::emit(rep, common, io);
}

inline int cmd_sensitivity(std::vector<std::string> args, Io io) {
  CLI::App app{"qubit-frequency sensitivity to E_C and E_J variations"};
  detail::CommonOptions common;
  double ec = 0, ej = 0, rel_dec = 0, rel_dej = 0;
  bool quadrature = false;
  app.add_option("--ec-mhz", ec, "charging energy / h")->required();
  app.add_option("--ej-mhz", ej, "Josephson energy / h")->required();
  app.add_option("--rel-dec", rel_dec, "fractional E_C variation")->required();
  app.add_option("--rel-dej", rel_dej, "fractional E_J variation")->required();
  app.add_flag("--quadrature", quadrature, "combine terms in quadrature instead of worst case");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  report::Report rep;
  rep.subcommand = "sensitivity";
  rep.parameters = {{"ec_mhz", ec},
                    {"ej_mhz", ej},
                    {"rel_dec", rel_dec},
                    {"rel_dej", rel_dej},
                    {"mode", quadrature ? "quadrature" : "worst_case"}};
  const charstats::SensitivityInput input{ec, ej, rel_dec, rel_dej};
  const auto mode = quadrature ? charstats::SensitivityMode::quadrature
                               : charstats::SensitivityMode::worst_case;
  const charstats::SensitivityBreakdown breakdown =
      charstats::frequency_sensitivity_terms(input, mode);
  rep.results["f01_mhz"] = core::f01_from_energies(ec, ej);
  rep.results["ec_term"] = breakdown.ec_term;
  rep.results["ej_term"] = breakdown.ej_term;
  rep.results["df01_rel"] = breakdown.total;
  rep.results["df01_rel_pct"] = breakdown.total * 100.0;
  return detail::emit(rep, common, io);
}

inline int cmd_spacing_sweep(std::vector<std::string> args, Io io) {
  CLI::App app{"device-parameter variation against interchip spacing"};
  detail::CommonOptions common;
  std::string spec_path;
  std::vector<double> at;
  app.add_option("--spec", spec_path, "sweep spec JSON")->required();
  app.add_option("--at", at, "evaluate at these spacings (um); repeatable");
  detail::add_common(app, common);
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  const bundled::InputDoc doc = bundled::resolve_input(spec_path);
  charstats::SweepSpec spec = charstats::load_sweep_spec(bundled::parse_json(doc), doc.path);
  if (!at.empty()) spec.eval_at_um = at;
  const std::vector<charstats::SweepRow> rows = charstats::spacing_sweep(spec);

  if (common.format == "csv") {
    std::ostringstream buffer;
    buffer << "quantity,d_um,value,ref_value,rel_change,abs_change\n";
    for (const auto& row : rows) {
      buffer << row.quantity << "," << csv::format_double(row.d_um) << ","
             << csv::format_double(row.value) << "," << csv::format_double(row.ref_value) << ","
             << csv::format_double(row.rel_change) << "," << csv::format_double(row.abs_change)
             << "\n";
    }
    return detail::emit_text(buffer.str(), common.output, io);
  }
  report::Report rep;
  rep.subcommand = "spacing-sweep";
  rep.inputs.push_back(report::to_ref(doc));
  rep.parameters = {{"d_target_um", spec.d_target_um}};
  auto out_rows = report::ordered_json::array();
  for (const auto& row : rows) {
    out_rows.push_back({{"quantity", row.quantity},
                        {"d_um", row.d_um},
                        {"value", row.value},
                        {"ref_value", row.ref_value},
                        {"rel_change", row.rel_change},
                        {"abs_change", row.abs_change}});
  }
  rep.results["rows"] = out_rows;
  return detail::emit(rep, common, io);
}

inline int cmd_reproduce_paper(std::vector<std::string> args, Io io) {
  CLI::App app{"recompute the bundled expectations and print a pass/fail table"};
  detail::CommonOptions common;
  common.format = "table";
  std::string filter;
  app.add_option("--filter", filter,
                 "run one group (purcell, kappa, coupling, fidelity, sensitivity, metrology, "
                 "junction, rb)");
  app.add_option("--output", common.output, "write the table/report to this file");
  app.add_option("--format", common.format, "output format")
      ->check(CLI::IsMember({"table", "json"}));
  if (const int code = detail::parse_app(app, std::move(args), io); code >= 0) return code;

  const std::vector<repro::Check> checks = repro::run_checks(filter);
  if (checks.empty()) {
    throw domain_error("reproduce-paper: no checks match filter '" + filter + "'");
  }
  if (common.format == "json") {
    report::Report rep;
    rep.subcommand = "reproduce-paper";
    rep.parameters = {{"filter", filter}};
    auto rows = report::ordered_json::array();
    for (const auto& check : checks) {
      rows.push_back({{"group", check.group},
                      {"id", check.id},
                      {"expected", check.expected},
                      {"actual", check.actual},
                      {"tolerance", check.tolerance},
                      {"relative", check.relative},
                      {"unit", check.unit},
                      {"passed", check.passed}});
    }
    rep.results["checks"] = rows;
    rep.results["all_passed"] = repro::all_passed(checks);
    detail::emit(rep, common, io);
  } else {
    std::ostringstream buffer;
    repro::print_table(buffer, checks);
    detail::emit_text(buffer.str(), common.output, io);
  }
  return repro::all_passed(checks) ? 0 : 1;
}

// ---- dispatcher ----

struct Subcommand {
  std::string_view name;
  std::string_view summary;
  int (*handler)(std::vector<std::string>, Io);
};

inline const std::vector<Subcommand>& subcommands() {
  static const std::vector<Subcommand> table = {
      {"transmon", "transmon parameters from spectrum, energies, or capacitance", cmd_transmon},
      {"junction", "Josephson energy from junction resistance", cmd_junction},
      {"coupling", "capacitive coupling strength", cmd_coupling},
      {"purcell", "Purcell decay budget", cmd_purcell},
      {"kappa", "resonator linewidth from fr and Qc", cmd_kappa},
      {"spectrum-sweep", "flux sweep and avoided-crossing extraction", cmd_spectrum_sweep},
      {"s21-fit", "notch resonator circle fit", cmd_s21_fit},
      {"rb-fit", "randomized-benchmarking decay fit", cmd_rb_fit},
      {"rb-interleaved", "interleaved gate error", cmd_rb_interleaved},
      {"coherence-limit", "coherence-limited gate fidelity", cmd_coherence_limit},
      {"metrology", "interchip spacing and tilt statistics", cmd_metrology},
      {"loss-q", "participation-ratio loss budget", cmd_loss_q},
      {"sensitivity", "qubit-frequency sensitivity propagation", cmd_sensitivity},
      {"spacing-sweep", "parameter variation vs interchip spacing", cmd_spacing_sweep},
      {"reproduce-paper", "recompute bundled expectations", cmd_reproduce_paper},
  };
  return table;
}

inline void print_usage(std::ostream& out) {
  out << kToolName << " " << kVersion
      << " - design and characterization toolkit for flip-chip superconducting devices\n\n"
      << "usage: " << kToolName << " <subcommand> [options]\n\nsubcommands:\n";
  for (const auto& subcommand : subcommands()) {
    out << "  ";
    out.width(16);
    out << std::left << std::string(subcommand.name) << std::string(subcommand.summary) << "\n";
  }
  out << "\nrun '" << kToolName << " <subcommand> --help' for options\n";
}

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  const Io io{out, err};
  if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    print_usage(out);
    return args.empty() ? 64 : 0;
  }
  if (args[0] == "--version") {
    out << kToolName << " " << kVersion << "\n";
    return 0;
  }
  const std::string name = args[0];
  args.erase(args.begin());
  for (const auto& subcommand : subcommands()) {
    if (subcommand.name == name) {
      try {
        return subcommand.handler(std::move(args), io);
      } catch (const numerics_error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
      } catch (const domain_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
      } catch (const parse_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
      } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
      }
    }
  }
  err << "unknown subcommand '" << name << "'\n\n";
  print_usage(err);
  return 64;
}

}  // namespace flipkit::cli
