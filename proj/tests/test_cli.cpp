#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flipkit/capnet.hpp"
#include "flipkit/charstats.hpp"
#include "flipkit/cli.hpp"
#include "flipkit/core.hpp"
#include "flipkit/resonfit.hpp"

using namespace flipkit;

namespace {

struct RunResult {
  int code = 0;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json results_of(const RunResult& result) {
  REQUIRE(result.code == 0);
  return nlohmann::json::parse(result.out).at("results");
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("cli_test_" + name) {
    std::ofstream file(path, std::ios::binary);
    file << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("purcell output is traceable to single library calls") {
  const RunResult result =
      run_cli({"purcell", "--kappa-mhz", "0.63", "--g-mhz", "95", "--detuning-mhz", "-2064",
               "--c-self-ff", "97.48", "--c-xy-ff", "0.108", "--f01-mhz", "4146"});
  const auto results = results_of(result);
  // exact equality: the CLI must not do its own arithmetic
  CHECK(results.at("tp_read_us").get<double>() == capnet::tp_read_us(0.63, 95.0, -2064.0));
  CHECK(results.at("tp_xy_us").get<double>() == capnet::tp_xy_us(97.48, 0.108, 4146.0, 50.0));
  CHECK(results.at("tp_total_us").get<double>() ==
        capnet::tp_combined(capnet::tp_read_us(0.63, 95.0, -2064.0),
                            capnet::tp_xy_us(97.48, 0.108, 4146.0, 50.0))
            .tp_total_us);
  CHECK(results.at("qc_xy").get<double>() == capnet::qc_xy(97.48, 0.108, 4146.0, 50.0));
}

TEST_CASE("identical invocations give byte-identical reports") {
  const std::vector<std::string> args{"purcell", "--kappa-mhz", "0.63", "--g-mhz", "95",
                                      "--detuning-mhz", "-2064", "--c-self-ff", "97.48",
                                      "--c-xy-ff", "0.108", "--f01-mhz", "4146"};
  CHECK(run_cli(args).out == run_cli(args).out);
  const std::vector<std::string> csv_args = [&] {
    auto copy = args;
    copy.push_back("--format");
    copy.push_back("csv");
    return copy;
  }();
  const RunResult csv = run_cli(csv_args);
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("key,value\n", 0) == 0);
  CHECK(csv.out == run_cli(csv_args).out);
}

TEST_CASE("unknown subcommand prints usage and exits 64") {
  const RunResult result = run_cli({"frobnicate"});
  CHECK(result.code == 64);
  CHECK(result.err.find("unknown subcommand") != std::string::npos);
  CHECK(result.err.find("usage:") != std::string::npos);
  CHECK(run_cli({}).code == 64);
  CHECK(run_cli({"--help"}).code == 0);
  CHECK(run_cli({"purcell", "--help"}).code == 0);
}

TEST_CASE("validation failures exit 2") {
  TempFile empty("empty.csv", "");
  CHECK(run_cli({"rb-fit", "--input", empty.path}).code == 2);
  CHECK(run_cli({"rb-fit", "--input", "/does/not/exist.csv"}).code == 2);
  CHECK(run_cli({"purcell", "--kappa-mhz", "0.63"}).code == 2);  // missing required flags
  CHECK(run_cli({"kappa", "--fr-mhz", "6107", "--qc", "-1"}).code == 2);
  CHECK(run_cli({"transmon"}).code == 2);
}

TEST_CASE("transmon subcommand covers all three input paths") {
  const auto from_spectrum =
      results_of(run_cli({"transmon", "--f01-mhz", "4146", "--alpha-mhz", "-217"}));
  CHECK(from_spectrum.at("ec_mhz").get<double>() == 217.0);
  CHECK(from_spectrum.at("ej_mhz").get<double>() ==
        core::energies_from_spectrum(4146.0, -217.0).ej_mhz);

  const auto from_energies =
      results_of(run_cli({"transmon", "--ec-mhz", "200", "--ej-mhz", "11000"}));
  CHECK(from_energies.at("f01_mhz").get<double>() == core::f01_from_energies(200.0, 11000.0));

  const auto from_cap = results_of(run_cli(
      {"transmon", "--c-self-ff", "97.48", "--rn-ohm", "12500", "--gap-uev", "180"}));
  CHECK(from_cap.at("ec_mhz").get<double>() == core::ec_from_capacitance(97.48));
  CHECK(from_cap.at("ej_mhz").get<double>() == core::ej_from_junction(12500.0, 180.0).ej_mhz);
  CHECK(from_cap.at("ic_na").get<double>() == core::ej_from_junction(12500.0, 180.0).ic_na);

  // low-ratio warning goes to stderr, not an error
  const RunResult warned = run_cli({"transmon", "--ec-mhz", "200", "--ej-mhz", "3000"});
  CHECK(warned.code == 0);
  CHECK(warned.err.find("E_J/E_C") != std::string::npos);

  const auto with_cz = results_of(run_cli({"transmon", "--f01-mhz", "4146", "--alpha-mhz",
                                           "-217", "--cz02-f01-mhz", "4776",
                                           "--cz02-alpha-mhz", "-210"}));
  CHECK(with_cz.at("cz02_mhz").get<double>() == doctest::Approx(420.0));
}

TEST_CASE("junction subcommand notes the bundled gap default") {
  const RunResult defaulted = run_cli({"junction", "--rn-ohm", "12500"});
  const auto doc = nlohmann::json::parse(defaulted.out);
  CHECK(doc.at("results").at("ej_mhz").get<double>() ==
        core::ej_from_junction(12500.0, 180.0).ej_mhz);
  CHECK_FALSE(doc.at("notes").empty());
  const RunResult explicit_gap = run_cli({"junction", "--rn-ohm", "12500", "--gap-uev", "200"});
  CHECK(nlohmann::json::parse(explicit_gap.out).at("notes").empty());
}

TEST_CASE("coupling record mode agrees with explicit flags") {
  const auto from_record = results_of(run_cli({"coupling", "--record", "bundled:tableS3",
                                               "--node-a", "q1", "--node-b", "res1", "--f1-mhz",
                                               "4146", "--f2-mhz", "6210"}));
  const auto from_flags = results_of(run_cli({"coupling", "--f1-mhz", "4146", "--f2-mhz", "6210",
                                              "--c12-ff", "8.37", "--c1-ff", "97.48", "--c2-ff",
                                              "590.78"}));
  CHECK(from_record.at("g_mhz").get<double>() == from_flags.at("g_mhz").get<double>());
  CHECK(from_record.at("g_mhz").get<double>() ==
        capnet::coupling_strength(4146.0, 6210.0, 8.37, 97.48, 590.78));

  // raw quarter-wave self-capacitance gets the field correction
  const auto corrected = results_of(run_cli({"coupling", "--f1-mhz", "4146", "--f2-mhz", "6210",
                                             "--c12-ff", "8.37", "--c1-ff", "97.48", "--c2-ff",
                                             "928.0", "--c2-kind", "quarter_wave"}));
  CHECK(corrected.at("c2_eff_ff").get<double>() ==
        capnet::effective_capacitance(928.0, capnet::ModeKind::quarter_wave));
}

TEST_CASE("kappa subcommand") {
  const auto results = results_of(run_cli({"kappa", "--fr-mhz", "6107", "--qc", "12723"}));
  CHECK(results.at("kappa_over_2pi_mhz").get<double>() == capnet::kappa_from_qc(6107.0, 12723.0));
}

TEST_CASE("absent decay channels are reported as explicit infinities") {
  const auto results =
      run_cli({"purcell", "--kappa-mhz", "0.63", "--g-mhz", "95", "--detuning-mhz", "-2064",
               "--c-self-ff", "97.48", "--c-xy-ff", "0", "--f01-mhz", "4146"});
  const auto doc = results_of(results);
  CHECK(doc.at("tp_xy_us").get<std::string>() == "inf");
  CHECK(doc.at("qc_xy").get<std::string>() == "inf");
  // the combined budget collapses to the remaining channel
  CHECK(doc.at("tp_total_us").get<double>() == capnet::tp_read_us(0.63, 95.0, -2064.0));
}

TEST_CASE("metrology reproduces the population statistics") {
  const RunResult result = run_cli({"metrology", "--dataset", "bundled:tableS7", "--exclude",
                                    "FC1", "--exclude", "FC4a"});
  const auto results = results_of(result);
  const auto& population = results.at("population");
  CHECK(population.at("d_um").at("mean").get<double>() == doctest::Approx(7.8).epsilon(0.05 / 7.8));
  CHECK(population.at("d_um").at("std").get<double>() == doctest::Approx(0.8).epsilon(0.05 / 0.8));
  CHECK(population.at("dd_um").at("mean").get<double>() == doctest::Approx(1.7).epsilon(0.05 / 1.7));
  CHECK(population.at("dtheta_urad").at("mean").get<double>() ==
        doctest::Approx(126.0).epsilon(0.5 / 126.0));
  CHECK(population.at("dtheta_urad").at("std").get<double>() ==
        doctest::Approx(76.0).epsilon(0.5 / 76.0));
  CHECK(population.at("d_um").at("n").get<int>() == 17);
  CHECK(results.at("modules").size() == 23);
  CHECK(results.at("tabulated_discrepancies").size() == 4);

  const auto single = results_of(run_cli({"metrology", "--module", "FC2:CQ1"}));
  CHECK(single.at("modules").size() == 1);
  CHECK(single.at("modules")[0].at("d_um").get<double>() == doctest::Approx(8.125));
}

TEST_CASE("s21-fit runs the circle fit on a trace file") {
  const double ql = 1.0 / (1.0 / 1e7 + 1.0 / 12723.0);
  const resonfit::S21Params truth{6107.0, ql, 12723.0, 0.0, 1.0, 0.0, 0.0};
  const double span = 10.0 * 6107.0 / ql;
  const resonfit::S21Trace trace =
      resonfit::make_trace(truth, 6107.0 - span / 2.0, 6107.0 + span / 2.0, 801);
  std::ostringstream csv_text;
  resonfit::write_trace_csv(csv_text, trace);
  TempFile file("trace.csv", csv_text.str());

  const auto results = results_of(run_cli({"s21-fit", "--input", file.path}));
  CHECK(results.at("fr_mhz").get<double>() == doctest::Approx(6107.0).epsilon(1e-6));
  CHECK(results.at("qc_mag").get<double>() == doctest::Approx(12723.0).epsilon(1e-4));
  CHECK(results.at("kappa_over_2pi_mhz").get<double>() == doctest::Approx(0.48).epsilon(0.01));
  CHECK(results.at("qi").get<double>() == doctest::Approx(1e7).epsilon(1e-3));
}

TEST_CASE("rb-fit and rb-interleaved") {
  const rb::RBDataset dataset =
      rb::synth_dataset(0.99956, 0.45, 0.5, {1, 50, 100, 200, 400, 800, 1600, 3200}, 8, 0.0, 3);
  std::ostringstream csv_text;
  csv_text << "m,sequence_index,fidelity\n";
  for (std::size_t i = 0; i < dataset.lengths.size(); ++i) {
    for (std::size_t k = 0; k < dataset.fidelities[i].size(); ++k) {
      csv_text << dataset.lengths[i] << "," << k << ","
               << csv::format_double(dataset.fidelities[i][k]) << "\n";
    }
  }
  TempFile file("rb.csv", csv_text.str());
  const auto results = results_of(run_cli({"rb-fit", "--input", file.path, "--dim", "2"}));
  CHECK(results.at("p").get<double>() == doctest::Approx(0.99956).epsilon(1e-6));
  CHECK(results.at("r").get<double>() == doctest::Approx(2.2e-4).epsilon(1e-3));

  const auto interleaved = results_of(
      run_cli({"rb-interleaved", "--p-ref", "1.0", "--p-int", "0.982", "--dim", "4"}));
  CHECK(interleaved.at("r_gate").get<double>() == rb::interleaved_error(1.0, 0.982, 4));

  const RunResult flipped =
      run_cli({"rb-interleaved", "--p-ref", "0.98", "--p-int", "0.99", "--dim", "4"});
  CHECK(flipped.code == 0);
  CHECK(flipped.err.find("warning") != std::string::npos);
}

TEST_CASE("coherence-limit matches the library") {
  const auto results = results_of(run_cli({"coherence-limit", "--gate-ns", "295", "--t1-us",
                                           "55", "--t1-us", "36", "--t2star-us", "62",
                                           "--t2star-us", "59"}));
  const std::vector<rb::CoherenceRecord> records{rb::make_coherence_record(55.0, 62.0),
                                                 rb::make_coherence_record(36.0, 59.0)};
  CHECK(results.at("fidelity").get<double>() == rb::coherence_limit(2, 295.0, records));
  CHECK(run_cli({"coherence-limit", "--gate-ns", "20", "--t1-us", "55", "--t2star-us", "62",
                 "--t2star-us", "59"})
            .code == 2);
}

TEST_CASE("loss-q consumes raw energies or participations") {
  TempFile budget("budget.json",
                  R"([{"name":"sub","raw_w":3.0,"tan_delta":1e-7},
                      {"name":"ma","raw_w":1.0,"tan_delta":1e-5}])");
  const auto results = results_of(run_cli({"loss-q", "--input", budget.path}));
  CHECK(results.at("q").get<double>() ==
        charstats::loss_q({{"sub", 0.75, 1e-7}, {"ma", 0.25, 1e-5}}));
  CHECK(results.at("domains")[0].at("p").get<double>() == 0.75);
}

TEST_CASE("sensitivity subcommand") {
  const auto results = results_of(run_cli({"sensitivity", "--ec-mhz", "200", "--ej-mhz", "11000",
                                           "--rel-dec", "0.026", "--rel-dej", "0.055"}));
  CHECK(results.at("df01_rel").get<double>() ==
        charstats::frequency_sensitivity({200.0, 11000.0, 0.026, 0.055}));
  CHECK(results.at("df01_rel_pct").get<double>() == doctest::Approx(4.1226).epsilon(1e-4));
}

TEST_CASE("spacing-sweep consumes a spec document") {
  TempFile spec("sweep.json", R"({
    "d_target": 8.0,
    "samples": [
      {"d": 7.0, "params": {"c_q_self_ff": 102.6}},
      {"d": 8.0, "params": {"c_q_self_ff": 100.0}},
      {"d": 9.0, "params": {"c_q_self_ff": 97.4}}
    ],
    "derive": ["ec_mhz"],
    "constants": {"ej_mhz": 11000.0}
  })");
  const RunResult csv_run = run_cli({"spacing-sweep", "--spec", spec.path, "--format", "csv"});
  CHECK(csv_run.code == 0);
  CHECK(csv_run.out.rfind("quantity,d_um,value,ref_value,rel_change,abs_change\n", 0) == 0);

  const auto results = results_of(run_cli({"spacing-sweep", "--spec", spec.path}));
  bool found = false;
  for (const auto& row : results.at("rows")) {
    if (row.at("quantity") == "c_q_self_ff" && row.at("d_um").get<double>() == 7.0) {
      CHECK(row.at("rel_change").get<double>() == doctest::Approx(0.026).epsilon(1e-12));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("spectrum-sweep emits the level-curve CSV and gap extraction") {
  TempFile system("system.json", R"({
    "modes": [
      {"label": "q2", "f01": 4776, "alpha": -210, "dim": 3},
      {"label": "c", "f01": 7920, "alpha": -75, "dim": 3}
    ],
    "couplings": [{"a": "q2", "b": "c", "g": 30}]
  })");
  const RunResult result =
      run_cli({"spectrum-sweep", "--system", system.path, "--coupler", "c", "--fc0-mhz", "7920",
               "--flux-from", "0.3", "--flux-to", "0.45", "--points", "301", "--tracks", "3",
               "--gap-tracks", "1", "--gap-tracks", "2"});
  CHECK(result.code == 0);
  CHECK(result.out.find("# min_gap_mhz=60.0") != std::string::npos);
  CHECK(result.out.find("flux,lambda0,lambda1,lambda2\n") != std::string::npos);

  const RunResult json_result =
      run_cli({"spectrum-sweep", "--system", system.path, "--coupler", "c", "--fc0-mhz", "7920",
               "--flux-from", "0.3", "--flux-to", "0.45", "--points", "301", "--tracks", "3",
               "--gap-tracks", "1", "--gap-tracks", "2", "--format", "json"});
  const auto results = results_of(json_result);
  CHECK(results.at("min_gap_mhz").get<double>() == doctest::Approx(60.0).epsilon(0.02));
}

TEST_CASE("reports can be written to a file") {
  const std::string path = "cli_test_report.json";
  const RunResult result = run_cli({"kappa", "--fr-mhz", "6107", "--qc", "12723", "--output",
                                    path});
  CHECK(result.code == 0);
  CHECK(result.out.empty());
  std::ifstream file(path);
  REQUIRE(file.good());
  std::stringstream buffer;
  buffer << file.rdbuf();
  CHECK(nlohmann::json::parse(buffer.str()).at("results").at("kappa_over_2pi_mhz").get<double>() ==
        capnet::kappa_from_qc(6107.0, 12723.0));
  std::remove(path.c_str());
}

TEST_CASE("reproduce-paper exits nonzero on the known flagged row") {
  const RunResult full = run_cli({"reproduce-paper"});
  CHECK(full.code == 1);  // kappa_res4 is inconsistent at the source
  CHECK(full.out.find("FAIL") != std::string::npos);
  CHECK(full.out.find("kappa_res4") != std::string::npos);

  const RunResult purcell = run_cli({"reproduce-paper", "--filter", "purcell"});
  CHECK(purcell.code == 0);
  CHECK(purcell.out.find("FAIL") == std::string::npos);
  CHECK(purcell.out.find("tp_read_q1") != std::string::npos);

  const RunResult json_out = run_cli({"reproduce-paper", "--filter", "fidelity", "--format",
                                      "json"});
  CHECK(json_out.code == 0);
  CHECK(nlohmann::json::parse(json_out.out).at("results").at("all_passed").get<bool>());

  CHECK(run_cli({"reproduce-paper", "--filter", "nonsense"}).code == 2);
}

TEST_CASE("numerical failures exit 3") {
  // monotone gap: avoided crossing minimum sits on the sweep boundary
  TempFile system("mono.json", R"({
    "modes": [
      {"label": "q", "f01": 4776, "dim": 2},
      {"label": "c", "f01": 7920, "dim": 2}
    ],
    "couplings": [{"a": "q", "b": "c", "g": 30}]
  })");
  const RunResult result =
      run_cli({"spectrum-sweep", "--system", system.path, "--coupler", "c", "--fc0-mhz", "7920",
               "--flux-from", "0.44", "--flux-to", "0.48", "--points", "51", "--gap-tracks", "1",
               "--gap-tracks", "2"});
  CHECK(result.code == 3);
  CHECK(result.err.find("boundary") != std::string::npos);
}
