#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "qkdcoex/error.hpp"
#include "qkdcoex/grid.hpp"

using namespace qkdcoex;

TEST_SUITE("grid") {

TEST_CASE("channel frequencies and wavelengths match the golden grid") {
    const auto golden = test::load_fixture("physics_golden.json");
    const GridSpec grid = GridSpec::standard();
    for (const auto& g : golden.at("grid")) {
        const int idx = g.at("index").get<int>();
        const Thz f = channel_to_frequency(idx, grid);
        CHECK(f.value == doctest::Approx(g.at("thz").get<double>()).epsilon(1e-13));
        CHECK(frequency_to_wavelength(f).value == doctest::Approx(g.at("nm").get<double>()).epsilon(1e-12));
        CHECK(nearest_channel(f, grid) == idx);
    }
}

TEST_CASE("1554.134 nm is channel 34 and the quantum channel sits near channel 40") {
    const GridSpec grid = GridSpec::standard();
    CHECK(nearest_channel(wavelength_to_frequency(Nm{1554.134}), grid) == 34);
    QuantumChannelSpec q;
    CHECK(nearest_channel(Thz{q.center_frequency_thz()}, grid) == 40);
    int inband = 0;
    for (int i = 0; i < 120; ++i) {
        if (q.in_band(channel_to_frequency(i, grid).value)) {
            ++inband;
            CHECK(i == 40);
        }
    }
    CHECK(inband == 1);
}

TEST_CASE("wavelength/frequency conversion round-trips") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> nm(1500.0, 1600.0);
    for (int i = 0; i < 1000; ++i) {
        const double w = nm(rng);
        CHECK(frequency_to_wavelength(wavelength_to_frequency(Nm{w})).value == doctest::Approx(w).epsilon(1e-14));
    }
    CHECK_THROWS_AS(frequency_to_wavelength(Thz{0.0}), std::invalid_argument);
    CHECK_THROWS_AS(wavelength_to_frequency(Nm{-1.0}), std::invalid_argument);
}

TEST_CASE("power helpers") {
    CHECK(dbm_to_mw(0.0) == 1.0);
    CHECK(dbm_to_mw(-30.0) == doctest::Approx(1e-3));
    CHECK(mw_to_dbm(0.0) == -std::numeric_limits<double>::infinity());
    const std::vector<double> four(4, -25.0);
    CHECK(total_power_dbm(four) == doctest::Approx(-25.0 + 10.0 * std::log10(4.0)));
    CHECK(total_power_dbm(std::vector<double>{}) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("grid spec rejects non-positive parameters") {
    CHECK_THROWS_AS(GridSpec(0.0, 50.0), ConfigError);
    CHECK_THROWS_AS(GridSpec(191.2, -1.0), ConfigError);
    CHECK_THROWS_AS(channel_to_frequency(-1, GridSpec::standard()), std::invalid_argument);
}

TEST_CASE("channel set derives spacings and total power") {
    const GridSpec grid = GridSpec::standard();
    const std::vector<int> idx{35, 37, 43, 45};
    const auto set = ClassicalChannelSet::uniform(idx, -25.0, grid);
    REQUIRE(set.size() == 4);
    REQUIRE(set.spacings_ghz().size() == 3);
    CHECK(set.spacings_ghz()[0] == doctest::Approx(100.0));
    CHECK(set.spacings_ghz()[1] == doctest::Approx(300.0));
    CHECK(set.total_power_dbm() == doctest::Approx(-25.0 + 10.0 * std::log10(4.0)));
    CHECK(ClassicalChannelSet().empty());
}

TEST_CASE("validate_channel_set reports each defect") {
    QuantumChannelSpec q;
    const GridSpec grid = GridSpec::standard();
    CHECK(validate_channel_set(ClassicalChannelSet::uniform(std::vector<int>{35, 45}, -25.0, grid), q).empty());

    const auto overlap = validate_channel_set(ClassicalChannelSet::uniform(std::vector<int>{39, 40}, -25.0, grid), q);
    REQUIRE(overlap.size() == 1);
    CHECK(overlap[0].kind == ViolationKind::QuantumBandOverlap);

    const auto unordered = validate_channel_set(ClassicalChannelSet({193.0, 192.0}, {-25.0, -25.0}), q);
    REQUIRE_FALSE(unordered.empty());
    CHECK(unordered[0].kind == ViolationKind::NotStrictlyIncreasing);

    CHECK_THROWS_AS(ClassicalChannelSet({193.0, 193.5}, {-25.0}), std::invalid_argument);

    QuantumChannelSpec broken = q;
    broken.filter_bandwidth_ghz = 0.0;
    const auto spec = validate_channel_set(ClassicalChannelSet({193.0}, {-25.0}), broken);
    REQUIRE(spec.size() == 1);
    CHECK(spec[0].kind == ViolationKind::InvalidQuantumSpec);

    const auto nan = validate_channel_set(ClassicalChannelSet({193.0}, {std::nan("")}), q);
    REQUIRE_FALSE(nan.empty());
    CHECK(nan[0].kind == ViolationKind::NonFiniteValue);
}

TEST_CASE("sorted() keeps powers attached to their channels") {
    const ClassicalChannelSet set({193.5, 192.0, 193.0}, {-20.0, -21.0, -22.0});
    const auto s = set.sorted();
    CHECK(s.frequencies_thz() == std::vector<double>{192.0, 193.0, 193.5});
    CHECK(s.powers_dbm() == std::vector<double>{-21.0, -22.0, -20.0});
    CHECK(s.total_power_dbm() == doctest::Approx(set.total_power_dbm()));
}

TEST_CASE("default fiber profiles are valid and distinct") {
    const auto fibers = default_fiber_profiles();
    REQUIRE(fibers.size() == 3);
    CHECK(fibers[0].name == "lab");
    CHECK(fibers[1].name == "campus");
    CHECK(fibers[2].name == "city");
    for (const auto& f : fibers) {
        CHECK_NOTHROW(f.validate());
        CHECK(f.transmittance() == doctest::Approx(std::pow(10.0, -f.end_to_end_loss_db / 10.0)));
    }
    FiberProfile bad = fibers[0];
    bad.length_km = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}
