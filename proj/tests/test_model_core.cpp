#include <doctest.h>

#include <cmath>

#include "modeshift/errors.hpp"
#include "modeshift/model_core.hpp"
#include "test_util.hpp"

using namespace modeshift;
using test_util::attr;

namespace {

ZoneIndex two_zones() {
    return {{"m1", Zone{"m1", "Manhattan", "Midtown"}}, {"q1", Zone{"q1", "Queens", "Astoria"}}};
}

AttributeTable small_table() {
    AttributeTable t;
    for (const auto& [o, d] : {std::pair{"m1", "q1"}, std::pair{"q1", "m1"}}) {
        AttributeRow row = unavailable_row();
        row[idx(Mode::taxi)] = attr(0.3, 10.0, 3.0);
        row[idx(Mode::transit)] = attr(0.6, 2.75, 3.0);
        row[idx(Mode::fhv)] = attr(0.35, 9.0, 3.0);
        row[idx(Mode::sfhv)] = attr(0.45, 6.0, 3.0);
        t.emplace(OdPair{o, d}, row);
    }
    return t;
}

}  // namespace

TEST_CASE("mode names round-trip") {
    for (Mode m : kAllModes) {
        const auto parsed = parse_mode(mode_name(m));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == m);
    }
    CHECK_FALSE(parse_mode("bike").has_value());
}

TEST_CASE("mode sets") {
    CHECK(ModeSet::all().size() == 6);
    CHECK(ModeSet::four_mode().size() == 4);
    CHECK(ModeSet::taxi_nest().contains(Mode::sfhv));
    CHECK_FALSE(ModeSet::four_mode().contains(Mode::fhv));
    CHECK(ModeSet::taxi_nest().subset_of(ModeSet::all()));
    CHECK((ModeSet::four_mode() & ModeSet::taxi_nest()) == ModeSet{Mode::taxi});
}

TEST_CASE("generalized cost examples") {
    CHECK(generalized_cost(attr(0.5, 2.75), 20.0, 1.0) == doctest::Approx(12.75).epsilon(1e-12));
    CHECK(generalized_cost(ModeAttributes::unavailable(), 20.0, 1.0) == kInf);
    CHECK(generalized_cost(attr(1.0, 0.0), 30.0, 0.71) == doctest::Approx(21.30).epsilon(1e-12));
}

TEST_CASE("generalized cost overrides and errors") {
    CHECK(generalized_cost(attr(0.5, 2.75), 20.0, 1.0, 1.0, 0.0) == doctest::Approx(20.0));
    CHECK_THROWS_AS(generalized_cost(attr(0.5, 2.75), 20.0, 1.0, -0.1), InvalidInput);
    CHECK_THROWS_AS(generalized_cost(attr(0.5, 2.75), 20.0, 1.0, std::nullopt, -1.0), InvalidInput);
    CHECK_THROWS_AS(generalized_cost(attr(0.5, 2.75), 0.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(generalized_cost(attr(0.5, 2.75), 20.0, 0.0), InvalidInput);
}

TEST_CASE("generalized cost is monotone in time, cost, wage and beta") {
    const double base = generalized_cost(attr(0.5, 3.0), 20.0, 0.7);
    CHECK(generalized_cost(attr(0.6, 3.0), 20.0, 0.7) >= base);
    CHECK(generalized_cost(attr(0.5, 3.5), 20.0, 0.7) >= base);
    CHECK(generalized_cost(attr(0.5, 3.0), 25.0, 0.7) >= base);
    CHECK(generalized_cost(attr(0.5, 3.0), 20.0, 0.9) >= base);
}

TEST_CASE("attribute validation") {
    CHECK_NOTHROW(ModeAttributes::unavailable().validate());
    CHECK_NOTHROW(attr(0.5, 2.0).validate());
    CHECK_THROWS_AS(attr(-0.5, 2.0).validate(), InvalidInput);
    CHECK_THROWS_AS(attr(0.5, kInf).validate(), InvalidInput);
}

TEST_CASE("empty scenario leaves the table identical") {
    const auto t = small_table();
    CHECK(apply_scenario(t, two_zones(), Scenario{}) == t);
}

TEST_CASE("removal makes the mode unavailable and leaves other rows alone") {
    const auto t = small_table();
    const auto out = apply_scenario(t, two_zones(), presets::no_sfhv());
    for (const auto& [od, row] : out) {
        CHECK_FALSE(row[idx(Mode::sfhv)].available());
        for (Mode m : kAllModes) {
            if (m != Mode::sfhv) CHECK(row[idx(m)] == t.at(od)[idx(m)]);
        }
    }
    // Input untouched, removal idempotent.
    CHECK(t.begin()->second[idx(Mode::sfhv)].available());
    CHECK(apply_scenario(out, two_zones(), presets::no_sfhv()) == out);
}

TEST_CASE("surcharge applies to rows originating in the filtered borough") {
    const auto t = small_table();
    const auto out = apply_scenario(t, two_zones(), presets::congestion_surcharge("Manhattan"));
    const auto& m_row = out.at(OdPair{"m1", "q1"});
    CHECK(m_row[idx(Mode::taxi)].cost_mean == doctest::Approx(12.50));
    CHECK(m_row[idx(Mode::fhv)].cost_mean == doctest::Approx(11.75));
    CHECK(m_row[idx(Mode::sfhv)].cost_mean == doctest::Approx(7.50));
    CHECK(m_row[idx(Mode::transit)] == t.at(OdPair{"m1", "q1"})[idx(Mode::transit)]);
    CHECK_FALSE(m_row[idx(Mode::drive)].available());
    CHECK(out.at(OdPair{"q1", "m1"}) == t.at(OdPair{"q1", "m1"}));
}

TEST_CASE("shared FHV surcharge is per passenger times occupancy") {
    const Scenario s = presets::congestion_surcharge();
    CHECK(s.surcharges[idx(Mode::sfhv)] == doctest::Approx(1.50));
    CHECK(s.surcharges[idx(Mode::taxi)] == doctest::Approx(2.50));
    CHECK(s.surcharges[idx(Mode::fhv)] == doctest::Approx(2.75));
    CHECK(*s.surcharge_origin_borough == "Manhattan");
}

TEST_CASE("repeated surcharges add up") {
    const auto t = small_table();
    const Scenario s = presets::congestion_surcharge("Manhattan");
    const auto twice = apply_scenario(apply_scenario(t, two_zones(), s), two_zones(), s);
    CHECK(twice.at(OdPair{"m1", "q1"})[idx(Mode::taxi)].cost_mean == doctest::Approx(15.0));
}

TEST_CASE("removal wins over surcharge") {
    Scenario s = presets::congestion_surcharge("Manhattan");
    s.removed_modes.insert(Mode::taxi);
    const auto out = apply_scenario(small_table(), two_zones(), s);
    CHECK_FALSE(out.at(OdPair{"m1", "q1"})[idx(Mode::taxi)].available());
}

TEST_CASE("sequential application equals the merged scenario") {
    const auto t = small_table();
    const Scenario remove = presets::no_sfhv();
    const Scenario surcharge = presets::congestion_surcharge("Manhattan");
    const auto sequential = apply_scenario(apply_scenario(t, two_zones(), remove), two_zones(), surcharge);
    const auto merged = apply_scenario(t, two_zones(), merge_scenarios(remove, surcharge));
    CHECK(sequential == merged);
}

TEST_CASE("merging surcharges with different filters is rejected") {
    CHECK_THROWS_AS(merge_scenarios(presets::congestion_surcharge("Manhattan"),
                                    presets::congestion_surcharge("Queens")),
                    InvalidInput);
}

TEST_CASE("unknown origin zone") {
    AttributeTable t = small_table();
    t.emplace(OdPair{"x9", "m1"}, unavailable_row());
    CHECK_THROWS_AS(apply_scenario(t, two_zones(), Scenario{}), MissingZone);
}

TEST_CASE("negative surcharge is rejected") {
    Scenario s;
    s.surcharges[idx(Mode::taxi)] = -1.0;
    CHECK_THROWS_AS(apply_scenario(small_table(), two_zones(), s), InvalidInput);
}

TEST_CASE("hourly wage from an annual bracket") {
    CHECK(hourly_wage_from_bracket(40000.0, 60000.0) == doctest::Approx(50000.0 / 2080.0));
    CHECK_THROWS_AS(hourly_wage_from_bracket(60000.0, 40000.0), InvalidInput);
}

TEST_CASE("demand cell total") {
    DemandCell c{"a", "b", "", {}};
    c.trips[idx(Mode::taxi)] = 1.5;
    c.trips[idx(Mode::walk)] = 2.0;
    CHECK(c.total() == doctest::Approx(3.5));
}
