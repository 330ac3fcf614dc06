#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flipkit/core.hpp"
#include "flipkit/numerics.hpp"

using namespace flipkit;
using namespace flipkit::core;

TEST_CASE("f01 from energies matches direct evaluation") {
  CHECK(f01_from_energies(200.0, 11000.0) == doctest::Approx(3995.2353926806063).epsilon(1e-12));
  // Table-style anchor: E_C = 194, E_J = 63 E_C
  CHECK(f01_from_energies(194.0, 12222.0) == doctest::Approx(4161.289198204868).epsilon(1e-12));
}

TEST_CASE("f01 vanishes with the charging energy") {
  CHECK(f01_from_energies(1e-9, 11000.0) < 1e-2);
  CHECK(f01_from_energies(1e-12, 11000.0) < 1e-3);
}

TEST_CASE("f01 rejects non-positive energies") {
  CHECK_THROWS_AS(f01_from_energies(0.0, 11000.0), domain_error);
  CHECK_THROWS_AS(f01_from_energies(200.0, -1.0), domain_error);
}

TEST_CASE("f01 is strictly increasing in E_J at fixed E_C") {
  double previous = 0.0;
  for (double ej = 4000.0; ej <= 20000.0; ej += 250.0) {
    const double f01 = f01_from_energies(200.0, ej);
    CHECK(f01 > previous);
    CHECK(std::isfinite(f01));
    previous = f01;
  }
}

TEST_CASE("spectrum inversion reproduces the first-order identification") {
  const Energies q1 = energies_from_spectrum(4146.0, -217.0);
  CHECK(q1.ec_mhz == 217.0);
  CHECK(q1.ej_mhz == doctest::Approx(10965.304723502304).epsilon(1e-12));
  const Energies q2 = energies_from_spectrum(4776.0, -210.0);
  CHECK(q2.ec_mhz == 210.0);
  CHECK(q2.ej_mhz == doctest::Approx(14797.735714285714).epsilon(1e-12));
}

TEST_CASE("spectrum inversion round trip is exact") {
  for (double f01 : {3854.0, 4146.0, 4776.0, 4890.0}) {
    for (double alpha : {-172.0, -210.0, -222.0}) {
      const Energies energies = energies_from_spectrum(f01, alpha);
      CHECK(energies.ec_mhz == -alpha);  // exact by construction
      CHECK(f01_from_energies(energies.ec_mhz, energies.ej_mhz) ==
            doctest::Approx(f01).epsilon(1e-12));
    }
  }
}

TEST_CASE("spectrum inversion rejects non-negative alpha") {
  CHECK_THROWS_AS(energies_from_spectrum(4146.0, 0.0), domain_error);
  CHECK_THROWS_AS(energies_from_spectrum(4146.0, 217.0), domain_error);
  CHECK_THROWS_AS(energies_from_spectrum(-4146.0, -217.0), domain_error);
}

TEST_CASE("charging energy from self-capacitance") {
  CHECK(ec_from_capacitance(97.48) == doctest::Approx(198.70977969490272).epsilon(1e-12));
  CHECK(ec_from_capacitance(98.50) == doctest::Approx(196.65207436202152).epsilon(1e-12));
  // doubling the capacitance halves E_C
  CHECK(ec_from_capacitance(2.0 * 97.48) ==
        doctest::Approx(0.5 * ec_from_capacitance(97.48)).epsilon(1e-15));
  CHECK_THROWS_AS(ec_from_capacitance(0.0), domain_error);
  CHECK_THROWS_AS(ec_from_capacitance(-5.0), domain_error);
}

TEST_CASE("junction energy and critical current from normal-state resistance") {
  const JunctionEnergy junction = ej_from_junction(12500.0, 180.0);
  CHECK(junction.ej_mhz == doctest::Approx(11234.716334029374).epsilon(1e-12));
  CHECK(junction.ic_na == doctest::Approx(22.61946710584651).epsilon(1e-12));
  CHECK(ej_from_junction(25000.0, 180.0).ej_mhz ==
        doctest::Approx(0.5 * junction.ej_mhz).epsilon(1e-15));
  CHECK_THROWS_AS(ej_from_junction(0.0, 180.0), domain_error);
  CHECK_THROWS_AS(ej_from_junction(12500.0, 0.0), domain_error);
}

TEST_CASE("ej * rn is constant for a fixed gap") {
  const double reference = ej_from_junction(5000.0, 180.0).ej_mhz * 5000.0;
  for (double rn = 1000.0; rn <= 30000.0; rn += 1700.0) {
    CHECK(ej_from_junction(rn, 180.0).ej_mhz * rn == doctest::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("junction consistency validator") {
  const JunctionParams good = junction_from_resistance(12500.0, 180.0);
  CHECK(junction_consistent(good));
  JunctionParams bad = good;
  bad.ic_na *= 1.0 + 1e-6;
  CHECK_FALSE(junction_consistent(bad));
}

TEST_CASE("coupler frequency flux dependence") {
  CHECK(coupler_frequency(7920.0, 0.0) == 7920.0);
  CHECK(coupler_frequency(7920.0, 0.5) < 1e-3);
  // ideal-SQUID model value; the measured 5554 at this bias is a known offset
  CHECK(coupler_frequency(7920.0, 0.34) == doctest::Approx(5497.151413520808).epsilon(1e-12));
  CHECK_THROWS_AS(coupler_frequency(0.0, 0.1), domain_error);
}

TEST_CASE("coupler frequency is 1-periodic and even in flux") {
  for (double flux = -1.3; flux < 1.3; flux += 0.07) {
    const double base = coupler_frequency(7920.0, flux);
    CHECK(coupler_frequency(7920.0, flux + 1.0) == doctest::Approx(base).epsilon(1e-9));
    CHECK(coupler_frequency(7920.0, -flux) == doctest::Approx(base).epsilon(1e-9));
    CHECK(std::isfinite(base));
  }
}

TEST_CASE("cz02 resonance condition") {
  const TransmonParams q1 = transmon_from_spectrum(4146.0, -217.0);
  const TransmonParams q2 = transmon_from_spectrum(4776.0, -210.0);
  CHECK(cz02_frequency(q1, q2) == doctest::Approx(420.0).epsilon(1e-12));
  CHECK(cz02_frequency(q2, q1) == doctest::Approx(-847.0).epsilon(1e-12));

  TransmonParams degenerate = q1;
  degenerate.alpha_mhz = 0.0;
  CHECK(cz02_frequency(q1, degenerate) == 0.0);
}

TEST_CASE("transmon builders fill every field consistently") {
  const TransmonParams params = transmon_from_energies(200.0, 11000.0);
  CHECK(params.alpha_mhz == -200.0);
  CHECK(params.ej_over_ec == doctest::Approx(55.0));
  CHECK(transmon_approximation_ok(params.ec_mhz, params.ej_mhz));
  CHECK_FALSE(transmon_approximation_ok(200.0, 3000.0));  // ratio 15: warn, not error
}
