#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "flipkit/capnet.hpp"

using namespace flipkit;
using namespace flipkit::capnet;

namespace {

nlohmann::json minimal_record_doc() {
  return nlohmann::json{{"labels", {"q", "res"}},
                        {"unit", "fF"},
                        {"spacing_um", 8.0},
                        {"kinds", {{"q", "lumped"}, {"res", "quarter_wave"}}},
                        {"matrix", {{97.48, 8.37}, {8.37, 928.0}}}};
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("record loading validates and symmetrizes") {
  const CapacitanceRecord record = load_capacitance_record(minimal_record_doc());
  CHECK(record.self_ff("q") == 97.48);
  CHECK(record.mutual_ff("q", "res") == 8.37);
  CHECK(record.spacing_um == 8.0);
  CHECK(record.kind_of("res") == ModeKind::quarter_wave);
  CHECK(record.effective_self_ff("res") == doctest::Approx(590.7831487571156).epsilon(1e-12));
  CHECK_THROWS_AS(record.self_ff("nope"), domain_error);
}

TEST_CASE("single-node record is valid") {
  nlohmann::json doc{{"labels", {"only"}}, {"unit", "fF"}, {"matrix", {{100.0}}}};
  const CapacitanceRecord record = load_capacitance_record(doc);
  CHECK(record.self_ff("only") == 100.0);
  CHECK(record.kind_of("only") == ModeKind::lumped);
}

TEST_CASE("sub-tolerance asymmetry is averaged away") {
  auto doc = minimal_record_doc();
  doc["matrix"][0][1] = 8.37 + 4e-7;
  const CapacitanceRecord record = load_capacitance_record(doc);
  CHECK(record.mutual_ff("q", "res") == doctest::Approx(8.37 + 2e-7).epsilon(1e-12));
  CHECK(record.mutual_ff("q", "res") == record.mutual_ff("res", "q"));
}

TEST_CASE("record loading rejects bad documents") {
  auto asym = minimal_record_doc();
  asym["matrix"][0][1] = 8.38;  // 0.01 fF across the diagonal
  CHECK_THROWS_AS(load_capacitance_record(asym), domain_error);

  auto negative = minimal_record_doc();
  negative["matrix"][0][0] = -1.0;
  CHECK_THROWS_AS(load_capacitance_record(negative), domain_error);

  auto dup = minimal_record_doc();
  dup["labels"] = {"q", "q"};
  CHECK_THROWS_AS(load_capacitance_record(dup), parse_error);

  auto ragged = minimal_record_doc();
  ragged["matrix"] = {{1.0, 2.0}, {2.0}};
  CHECK_THROWS_AS(load_capacitance_record(ragged), parse_error);

  auto unit = minimal_record_doc();
  unit["unit"] = "pF";
  CHECK_THROWS_AS(load_capacitance_record(unit), parse_error);

  auto orphan_kind = minimal_record_doc();
  orphan_kind["kinds"]["ghost"] = "lumped";
  CHECK_THROWS_AS(load_capacitance_record(orphan_kind), domain_error);

  CHECK_THROWS_AS(load_capacitance_record_text("not json", "broken"), parse_error);
}

TEST_CASE("effective capacitance applies the quarter-wave field factor") {
  CHECK(effective_capacitance(590.78, ModeKind::lumped) == 590.78);
  CHECK(effective_capacitance(928.0, ModeKind::quarter_wave) ==
        doctest::Approx(590.7831487571156).epsilon(1e-12));
  CHECK(effective_capacitance(100.0, ModeKind::quarter_wave) ==
        doctest::Approx(63.66197723675813).epsilon(1e-12));
  CHECK_THROWS_AS(effective_capacitance(0.0, ModeKind::lumped), domain_error);
}

TEST_CASE("coupling strength reproduces the lumped-element values") {
  CHECK(coupling_strength(4146.0, 6210.0, 8.37, 97.48, 590.78) ==
        doctest::Approx(88.48817919583728).epsilon(1e-12));
  CHECK(coupling_strength(4776.0, 6370.0, 8.37, 98.50, 574.23) ==
        doctest::Approx(97.05910523046404).epsilon(1e-12));
  CHECK(coupling_strength(4146.0, 6210.0, 0.0, 97.48, 590.78) == 0.0);
}

TEST_CASE("coupling strength is linear in c12 and exchange symmetric") {
  const double base = coupling_strength(4146.0, 6210.0, 8.37, 97.48, 590.78);
  CHECK(coupling_strength(4146.0, 6210.0, 2.0 * 8.37, 97.48, 590.78) ==
        doctest::Approx(2.0 * base).epsilon(1e-15));
  CHECK(coupling_strength(6210.0, 4146.0, 8.37, 590.78, 97.48) ==
        doctest::Approx(base).epsilon(1e-15));
  CHECK_THROWS_AS(coupling_strength(0.0, 6210.0, 8.37, 97.48, 590.78), domain_error);
}

TEST_CASE("XY coupling quality factor") {
  CHECK(qc_xy(97.48, 0.108, 4146.0, 50.0) ==
        doctest::Approx(6416361.7189812735).epsilon(1e-12));
  CHECK(qc_xy(97.48, 0.0, 4146.0, 50.0) == kInf);
  // halving c_xy quadruples Q
  CHECK(qc_xy(97.48, 0.054, 4146.0, 50.0) ==
        doctest::Approx(4.0 * qc_xy(97.48, 0.108, 4146.0, 50.0)).epsilon(1e-12));
  CHECK_THROWS_AS(qc_xy(97.48, -0.1, 4146.0, 50.0), domain_error);
}

TEST_CASE("XY Purcell lifetime and its Q duality") {
  CHECK(tp_xy_us(97.48, 0.108, 4146.0, 50.0) ==
        doctest::Approx(246.3086551474868).epsilon(1e-12));
  CHECK(tp_xy_us(98.50, 0.108, 4776.0, 50.0) ==
        doctest::Approx(187.55573235092461).epsilon(1e-12));
  CHECK(tp_xy_us(97.48, 0.0, 4146.0, 50.0) == kInf);

  // rate-Q duality: tp_xy * omega01 = qc_xy over a parameter grid
  for (double c_self : {60.0, 97.48, 140.0}) {
    for (double c_xy : {0.05, 0.108, 0.3}) {
      for (double f01 : {3800.0, 4776.0, 5600.0}) {
        const double omega01_per_us = 2.0 * 3.14159265358979323846 * f01;  // 1/us
        CHECK(tp_xy_us(c_self, c_xy, f01, 50.0) * omega01_per_us ==
              doctest::Approx(qc_xy(c_self, c_xy, f01, 50.0)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("readout Purcell lifetime") {
  CHECK(tp_read_us(0.63, 95.0, -2064.0) == doctest::Approx(119.24817947430172).epsilon(1e-12));
  CHECK(tp_read_us(0.76, 115.0, -1594.0) == doctest::Approx(40.233470200561044).epsilon(1e-12));
  CHECK(tp_read_us(0.63, 0.0, -2064.0) == kInf);
  CHECK_THROWS_AS(tp_read_us(0.63, 95.0, 0.0), domain_error);
}

TEST_CASE("readout Purcell lifetime depends only on g/detuning") {
  const double base = tp_read_us(0.63, 95.0, -2064.0);
  for (double k : {0.1, 2.0, 7.5}) {
    CHECK(tp_read_us(0.63, k * 95.0, k * -2064.0) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("combined Purcell budget") {
  const PurcellBudget q1 = tp_combined(119.0, 248.0);
  CHECK(q1.tp_total_us == doctest::Approx(80.414168937329695).epsilon(1e-9));
  const PurcellBudget q2 = tp_combined(40.0, 187.0);
  CHECK(q2.tp_total_us == doctest::Approx(32.951541850220265).epsilon(1e-9));
  CHECK(tp_combined(119.0, kInf).tp_total_us == 119.0);
  CHECK(tp_combined(kInf, kInf).tp_total_us == kInf);
  CHECK_THROWS_AS(tp_combined(-1.0, 10.0), domain_error);
}

TEST_CASE("budget combination is symmetric, bounded and associative") {
  for (double a : {20.0, 119.0, 400.0}) {
    for (double b : {40.0, 187.0, kInf}) {
      const double ab = tp_combined(a, b).tp_total_us;
      CHECK(ab == tp_combined(b, a).tp_total_us);
      CHECK(ab <= a);
      CHECK(ab <= b);
      // rate invariant: 1/total = 1/read + 1/xy
      CHECK(1.0 / ab == doctest::Approx(1.0 / a + 1.0 / b).epsilon(1e-12));
      // folding over a third channel commutes
      const double c = 77.0;
      CHECK(tp_combined(ab, c).tp_total_us ==
            doctest::Approx(tp_combined(tp_combined(a, c).tp_total_us, b).tp_total_us)
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("resonator linewidth from coupling quality factor") {
  CHECK(kappa_from_qc(6107.0, 12723.0) == doctest::Approx(0.4799968560874008).epsilon(1e-12));
  CHECK(kappa_from_qc(6812.0, 16471.0) == doctest::Approx(0.4135753749013418).epsilon(1e-12));
  CHECK(kappa_from_qc(6107.0, 1e18) < 1e-14);  // closed resonator
  CHECK_THROWS_AS(kappa_from_qc(6107.0, 0.0), domain_error);
}

TEST_CASE("mode summary pairs a frequency with the effective capacitance") {
  const CapacitanceRecord record = load_capacitance_record(minimal_record_doc());
  const ModeSummary summary = make_mode_summary(record, "res", 6210.0);
  CHECK(summary.c_eff_ff == doctest::Approx(590.7831487571156).epsilon(1e-12));
  CHECK_THROWS_AS(make_mode_summary(record, "res", 0.0), domain_error);
}
