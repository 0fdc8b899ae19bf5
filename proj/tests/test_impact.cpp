#include <doctest.h>

#include <cmath>

#include "modeshift/errors.hpp"
#include "modeshift/impact.hpp"
#include "test_util.hpp"

using namespace modeshift;
using test_util::attr;

namespace {

constexpr std::size_t M(Mode m) { return idx(m); }

double metric(const ImpactVector& v, Metric m) { return v[static_cast<std::size_t>(m)]; }

AttributeRow row(double sfhv_distance = 4.0) {
    AttributeRow r;
    r[M(Mode::taxi)] = attr(0.30, 14.0, 4.0);
    r[M(Mode::transit)] = attr(0.70, 2.75, 4.0);
    r[M(Mode::walk)] = attr(1.40, 0.0, 4.0);
    r[M(Mode::drive)] = attr(0.35, 12.0, 4.0);
    r[M(Mode::fhv)] = attr(0.33, 13.0, 4.0);
    r[M(Mode::sfhv)] = attr(0.50, 7.0, sfhv_distance);
    return r;
}

struct World {
    ZoneIndex zones{{"a", Zone{"a", "Manhattan", "A"}}, {"b", Zone{"b", "Queens", "B"}}};
    AttributeTable attrs{{OdPair{"a", "b"}, row()}, {OdPair{"b", "a"}, row(6.0)}};
    WageTable wages{{"lo", WageGroup{"lo", 18.0}}, {"hi", WageGroup{"hi", 55.0}}};
    DemandSet demand;

    World() {
        demand.modes = ModeSet::four_mode();
        auto add = [&](const char* o, const char* d, const char* w, double taxi, double transit, double walk,
                       double drive) {
            DemandCell c{o, d, w, {}};
            c.trips[M(Mode::taxi)] = taxi;
            c.trips[M(Mode::transit)] = transit;
            c.trips[M(Mode::walk)] = walk;
            c.trips[M(Mode::drive)] = drive;
            demand.cells.push_back(c);
        };
        add("a", "b", "lo", 120.5, 300.0, 10.0, 80.0);
        add("a", "b", "hi", 200.0, 90.0, 3.0, 150.25);
        add("b", "a", "lo", 33.0, 410.0, 7.0, 61.0);
        add("b", "a", "hi", 70.0, 55.5, 1.0, 95.0);
    }

    ScenarioInputs inputs() const { return {&demand, &attrs, &zones, &wages}; }
};

std::vector<ParameterSample> single(const SimParams& p) { return {ParameterSample{p, 0.0, 0.0, 1.0}}; }

const SimParams kParams{0.71, 0.38, 0.31, 0.58};

CellShift one_cell(Mode from, Mode to, double n) {
    CellShift c{{"a", "b"}, "lo", {}};
    c.shift.counts[M(from)][M(to)] = n;
    return c;
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("one trip from transit to shared FHV") {
    World w;
    const CellShift c = one_cell(Mode::transit, Mode::sfhv, 1.0);
    const ImpactTotals t = translate_impacts(std::span(&c, 1), w.attrs, w.attrs, w.wages, ImpactConstants{});
    const ImpactVector v = impact_metrics(t, ImpactConstants{});
    CHECK(metric(v, Metric::delta_miles) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(metric(v, Metric::fuel_gallons) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(metric(v, Metric::co2_kg) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(metric(v, Metric::delta_time_hours) == doctest::Approx(0.50 - 0.70));
    CHECK(metric(v, Metric::time_cost_value) == doctest::Approx(18.0 * (0.50 - 0.70)));
    CHECK(metric(v, Metric::transit_revenue_delta) == doctest::Approx(-2.75));
    CHECK(metric(v, Metric::fhv_revenue_delta) == doctest::Approx(7.0));
    CHECK(metric(v, Metric::taxi_revenue_delta) == 0.0);
    CHECK(t.baseline_miles == 0.0);
    // Transit carried no vehicle-miles, so the percentage is undefined.
    CHECK(std::isnan(metric(v, Metric::delta_miles_pct)));
}

TEST_CASE("extra vehicle-miles convert to fuel and CO2") {
    ImpactTotals t;
    t.delta_miles = 940000.0;
    const ImpactVector v = impact_metrics(t, ImpactConstants{});
    CHECK(metric(v, Metric::fuel_gallons) == 47000.0);
    CHECK(metric(v, Metric::co2_kg) == 376000.0);
    CHECK(std::abs(metric(v, Metric::co2_kg) - 375000.0) / 375000.0 <= 0.01);

    ImpactConstants c;
    c.miles_per_gallon = 25.0;
    c.co2_kg_per_gallon = 9.0;
    CHECK(metric(impact_metrics(t, c), Metric::co2_kg) == doctest::Approx(940000.0 / 25.0 * 9.0));
    c.miles_per_gallon = 0.0;
    CHECK_THROWS_AS(impact_metrics(t, c), InvalidParameter);
}

TEST_CASE("zero shift gives zero impacts") {
    World w;
    CellShift c{{"a", "b"}, "hi", {}};
    const ImpactTotals t = translate_impacts(std::span(&c, 1), w.attrs, w.attrs, w.wages, ImpactConstants{});
    for (double v : impact_metrics(t, ImpactConstants{})) CHECK(v == 0.0);
}

TEST_CASE("staying put on the same mode changes nothing but the baseline") {
    World w;
    const CellShift c = one_cell(Mode::drive, Mode::drive, 10.0);
    const ImpactTotals t = translate_impacts(std::span(&c, 1), w.attrs, w.attrs, w.wages, ImpactConstants{});
    CHECK(t.baseline_miles == doctest::Approx(40.0));
    CHECK(t.baseline_time_hours == doctest::Approx(3.5));
    for (double v : impact_metrics(t, ImpactConstants{})) CHECK(v == 0.0);
}

TEST_CASE("surcharged fares flow into revenue") {
    World w;
    const AttributeTable b = apply_scenario(w.attrs, w.zones, presets::congestion_surcharge("Manhattan"));
    const CellShift c = one_cell(Mode::taxi, Mode::taxi, 4.0);
    const ImpactTotals t = translate_impacts(std::span(&c, 1), w.attrs, b, w.wages, ImpactConstants{});
    CHECK(t.taxi_revenue_delta == doctest::Approx(4.0 * 2.50));
    CHECK(t.delta_time_hours == 0.0);
}

TEST_CASE("trips on an unavailable mode are a consistency error") {
    World w;
    const AttributeTable b = apply_scenario(w.attrs, w.zones, presets::no_sfhv());
    const CellShift c = one_cell(Mode::transit, Mode::sfhv, 1.0);
    CHECK_THROWS_AS(translate_impacts(std::span(&c, 1), w.attrs, b, w.wages, ImpactConstants{}), ConsistencyError);
    CellShift unknown = one_cell(Mode::taxi, Mode::taxi, 1.0);
    unknown.wage_group = "mid";
    CHECK_THROWS_AS(translate_impacts(std::span(&unknown, 1), w.attrs, w.attrs, w.wages, ImpactConstants{}),
                    InvalidInput);
}

TEST_CASE("vehicle miles per mode") {
    const ImpactConstants c;
    const ModeAttributes a = attr(0.5, 3.0, 6.0);
    CHECK(vehicle_miles(Mode::walk, a, c) == 0.0);
    CHECK(vehicle_miles(Mode::transit, a, c) == 0.0);
    CHECK(vehicle_miles(Mode::drive, a, c) == 6.0);
    CHECK(vehicle_miles(Mode::taxi, a, c) == 6.0);
    CHECK(vehicle_miles(Mode::fhv, a, c) == 6.0);
    CHECK(vehicle_miles(Mode::sfhv, a, c) == 3.0);
}

TEST_CASE("shift share examples") {
    ShiftMatrix all_taxi;
    all_taxi.counts[M(Mode::sfhv)][M(Mode::taxi)] = 7.0;
    const auto s = shift_shares(all_taxi, Mode::sfhv);
    CHECK(s[M(Mode::taxi)] == 1.0);

    ShiftMatrix uniform;
    for (Mode m : kAllModes) {
        if (m != Mode::sfhv) uniform.counts[M(Mode::sfhv)][M(m)] = 3.0;
    }
    uniform.counts[M(Mode::sfhv)][M(Mode::sfhv)] = 100.0;  // stayers are not displaced
    const auto u = shift_shares(uniform, Mode::sfhv);
    for (Mode m : kAllModes) CHECK(u[M(m)] == doctest::Approx(m == Mode::sfhv ? 0.0 : 0.2));

    CHECK_THROWS_AS(shift_shares(ShiftMatrix{}, Mode::sfhv), UndefinedMetric);
}

TEST_CASE("identical scenarios give exactly zero impacts") {
    World w;
    for (const Scenario& s : {Scenario{}, presets::no_sfhv(), presets::congestion_surcharge("Manhattan")}) {
        const auto out = run_scenario(w.inputs(), s, s, single(kParams), 300, 5);
        REQUIRE(out.size() == 1);
        for (double v : impact_metrics(out[0].citywide.totals, ImpactConstants{})) CHECK(v == 0.0);
        for (const auto& [zone, scope] : out[0].per_zone) {
            for (double v : impact_metrics(scope.totals, ImpactConstants{})) CHECK(v == 0.0);
        }
        for (std::size_t a = 0; a < kNumModes; ++a) {
            for (std::size_t b = 0; b < kNumModes; ++b) {
                if (a != b) CHECK(out[0].citywide.shift.counts[a][b] == 0.0);
            }
        }
    }
}

TEST_CASE("simulated shifts conserve trips") {
    World w;
    double demand = 0.0;
    for (const auto& c : w.demand.cells) demand += c.total();
    const std::vector<ParameterSample> post{{kParams, 0, 0, 0.5}, {SimParams{0.4, 0.9, 0.1, 0.2}, 0, 0, 0.5}};
    const auto out = run_scenario(w.inputs(), Scenario{}, presets::no_sfhv(), post, 257, 8);
    for (const auto& o : out) {
        CHECK(std::abs(o.citywide.shift.total() - demand) <= 1e-9 * demand);
        double zone_sum = 0.0;
        for (const auto& [z, scope] : o.per_zone) zone_sum += scope.shift.total();
        CHECK(std::abs(zone_sum - demand) <= 1e-9 * demand);
        double wage_sum = 0.0;
        for (const auto& [g, scope] : o.per_wage) wage_sum += scope.shift.total();
        CHECK(std::abs(wage_sum - demand) <= 1e-9 * demand);
        CHECK(o.citywide.shift.col_total(Mode::sfhv) == 0.0);
    }
}

TEST_CASE("zero noise reassigns every trip to the deterministic best mode") {
    World w;
    const SimParams p{0.71, 0.0, 0.0, 0.0};
    const auto out = run_scenario(w.inputs(), Scenario{}, presets::no_sfhv(), single(p), 10, 3);
    const auto& counts = out[0].citywide.shift.counts;
    // Without noise every trip in a cell sits on the argmin of its generalized cost.
    ShiftMatrix expected;
    for (const auto& c : w.demand.cells) {
        const AttributeRow& r = w.attrs.at(OdPair{c.origin, c.destination});
        const double wage = w.wages.at(c.wage_group).hourly_wage;
        auto best = [&](bool allow_sfhv) {
            std::size_t arg = 0;
            double g = kInf;
            for (Mode m : kAllModes) {
                if (m == Mode::sfhv && !allow_sfhv) continue;
                const double v = generalized_cost(r[M(m)], wage, p.beta);
                if (v < g) {
                    g = v;
                    arg = M(m);
                }
            }
            return arg;
        };
        expected.counts[best(true)][best(false)] += c.total();
    }
    for (std::size_t a = 0; a < kNumModes; ++a) {
        for (std::size_t b = 0; b < kNumModes; ++b) CHECK(counts[a][b] == doctest::Approx(expected.counts[a][b]));
    }
}

TEST_CASE("two-mode shift matches the normal-difference probability") {
    // Only taxi and transit exist; their noise is independent. Raising the taxi
    // fare can only push riders to transit, and the fraction who move is the
    // drop in the taxi choice probability.
    ZoneIndex zones{{"a", Zone{"a", "Manhattan", "A"}}};
    AttributeRow r = unavailable_row();
    r[M(Mode::taxi)] = attr(0.3, 12.0, 3.0);
    r[M(Mode::transit)] = attr(0.6, 2.75, 3.0);
    AttributeTable attrs{{OdPair{"a", "a"}, r}};
    WageTable wages{{"w", WageGroup{"w", 30.0}}};
    DemandSet d{ModeSet{Mode::taxi, Mode::transit}, {DemandCell{"a", "a", "w", {}}}};
    d.cells[0].trips[M(Mode::taxi)] = 1000.0;
    Scenario b;
    b.surcharges[M(Mode::taxi)] = 5.0;

    const SimParams p{0.7, 0.4, 0.0, 0.0};
    const std::size_t n = 40000;
    const auto out = run_scenario({&d, &attrs, &zones, &wages}, Scenario{}, b, single(p), n, 11);
    const auto& counts = out[0].citywide.shift.counts;

    auto p_taxi = [&](double surcharge) {
        const double gt = generalized_cost(r[M(Mode::taxi)], 30.0, p.beta) + surcharge;
        const double gr = generalized_cost(r[M(Mode::transit)], 30.0, p.beta);
        return phi((std::log(gr) - std::log(gt)) / (p.sigma * std::sqrt(2.0)));
    };
    const double moved = p_taxi(0.0) - p_taxi(5.0);
    const double mc_sd = 1000.0 * std::sqrt(moved * (1.0 - moved) / n);
    CHECK(std::abs(counts[M(Mode::taxi)][M(Mode::transit)] - 1000.0 * moved) <= 4.0 * mc_sd);
    CHECK(counts[M(Mode::transit)][M(Mode::taxi)] == 0.0);
    CHECK(std::abs(counts[M(Mode::taxi)][M(Mode::taxi)] - 1000.0 * p_taxi(5.0)) <=
          4.0 * 1000.0 * std::sqrt(p_taxi(5.0) * (1.0 - p_taxi(5.0)) / n));
}

TEST_CASE("a surcharge never adds riders to the surcharged modes") {
    World w;
    const auto out = run_scenario(w.inputs(), Scenario{}, presets::congestion_surcharge("Manhattan"),
                                  single(kParams), 2000, 21);
    const auto& s = out[0].citywide.shift;
    // The surcharge raises every mode in the group, so compare group totals.
    const double before = s.row_total(Mode::taxi) + s.row_total(Mode::fhv) + s.row_total(Mode::sfhv);
    const double after = s.col_total(Mode::taxi) + s.col_total(Mode::fhv) + s.col_total(Mode::sfhv);
    CHECK(after <= before);
    CHECK(out[0].citywide.totals.taxi_revenue_delta != 0.0);
    // Rows from Queens are not surcharged and see no change.
    const auto& queens = out[0].per_zone.at("b");
    for (double v : impact_metrics(queens.totals, ImpactConstants{})) CHECK(v == 0.0);
}

TEST_CASE("removing shared FHV follows the half-distance mileage rule") {
    World w;
    const auto out = run_scenario(w.inputs(), Scenario{}, presets::no_sfhv(), single(kParams), 3000, 2);
    const auto& zone_a = out[0].per_zone.at("a");
    const auto& zone_b = out[0].per_zone.at("b");
    const ImpactConstants c;
    double expected = 0.0;
    for (const auto* scope : {&zone_a, &zone_b}) {
        const AttributeRow& r = scope == &zone_a ? w.attrs.at(OdPair{"a", "b"}) : w.attrs.at(OdPair{"b", "a"});
        for (Mode m : kAllModes) {
            const double n = scope->shift.counts[M(Mode::sfhv)][M(m)];
            expected += n * (vehicle_miles(m, r[M(m)], c) - r[M(Mode::sfhv)].distance / 2.0);
        }
    }
    CHECK(out[0].citywide.totals.delta_miles == doctest::Approx(expected).epsilon(1e-12));
    CHECK(out[0].citywide.shift.row_total(Mode::sfhv) > 0.0);
}

TEST_CASE("percentages are consistent with the absolute deltas") {
    World w;
    const auto out = run_scenario(w.inputs(), Scenario{}, presets::no_sfhv(), single(kParams), 500, 4);
    const ImpactTotals& t = out[0].citywide.totals;
    const ImpactVector v = impact_metrics(t, ImpactConstants{});
    CHECK(metric(v, Metric::delta_time_pct) * t.baseline_time_hours / 100.0 ==
          doctest::Approx(t.delta_time_hours).epsilon(1e-9));
    CHECK(metric(v, Metric::delta_miles_pct) * t.baseline_miles / 100.0 ==
          doctest::Approx(t.delta_miles).epsilon(1e-9));
}

TEST_CASE("run_scenario is deterministic and validates inputs") {
    World w;
    const auto a = run_scenario(w.inputs(), Scenario{}, presets::no_sfhv(), single(kParams), 100, 6);
    const auto b = run_scenario(w.inputs(), Scenario{}, presets::no_sfhv(), single(kParams), 100, 6);
    CHECK(a[0].citywide.shift == b[0].citywide.shift);
    CHECK(a[0].citywide.totals == b[0].citywide.totals);
    CHECK_THROWS_AS(run_scenario(w.inputs(), Scenario{}, Scenario{}, {}, 100, 6), InvalidInput);
    CHECK_THROWS_AS(run_scenario(w.inputs(), Scenario{}, Scenario{}, single(kParams), 0, 6), InvalidInput);
    ScenarioInputs missing = w.inputs();
    missing.zones = nullptr;
    CHECK_THROWS_AS(run_scenario(missing, Scenario{}, Scenario{}, single(kParams), 10, 6), InvalidInput);
}

TEST_CASE("aggregating a single sample collapses the interval") {
    SampleOutcome o;
    o.citywide.totals.delta_miles = 123.0;
    o.citywide.totals.delta_time_hours = -4.0;
    const std::vector<SampleOutcome> outs{o};
    const std::vector<double> weights{1.0};
    const ImpactReport r = aggregate_posterior(outs, weights, ImpactConstants{});
    const auto& miles = r.citywide.metrics[static_cast<std::size_t>(Metric::delta_miles)];
    CHECK(miles.mean == 123.0);
    CHECK(miles.std == 0.0);
    CHECK(miles.ci95_low == 123.0);
    CHECK(miles.ci95_high == 123.0);
}

TEST_CASE("aggregating two samples with hand weights") {
    SampleOutcome a, b;
    a.citywide.totals.delta_miles = 100.0;
    b.citywide.totals.delta_miles = 300.0;
    a.citywide.totals.taxi_revenue_delta = 7.0;
    b.citywide.totals.taxi_revenue_delta = 7.0;
    a.citywide.shift.counts[0][1] = 4.0;
    b.citywide.shift.counts[0][1] = 8.0;
    const std::vector<SampleOutcome> outs{a, b};
    const std::vector<double> weights{0.25, 0.75};
    const ImpactReport r = aggregate_posterior(outs, weights, ImpactConstants{});
    const auto& miles = r.citywide.metrics[static_cast<std::size_t>(Metric::delta_miles)];
    CHECK(miles.mean == doctest::Approx(250.0));
    CHECK(miles.std == doctest::Approx(std::sqrt(0.25 * 150.0 * 150.0 + 0.75 * 50.0 * 50.0)));
    const auto& fuel = r.citywide.metrics[static_cast<std::size_t>(Metric::fuel_gallons)];
    CHECK(fuel.mean == doctest::Approx(12.5));
    const auto& taxi = r.citywide.metrics[static_cast<std::size_t>(Metric::taxi_revenue_delta)];
    CHECK(taxi.mean == doctest::Approx(7.0));
    CHECK(taxi.std == 0.0);
    CHECK(r.shift_matrix[0][1] == doctest::Approx(7.0));
    const std::vector<double> short_weights{1.0};
    CHECK_THROWS_AS(aggregate_posterior(outs, short_weights, ImpactConstants{}), InvalidInput);
}

TEST_CASE("an undefined percentage with positive weight reports NaN") {
    SampleOutcome a, b;
    a.citywide.totals.delta_miles = 5.0;  // on a zero baseline
    const std::vector<SampleOutcome> outs{a, b};
    const auto pct = static_cast<std::size_t>(Metric::delta_miles_pct);
    const std::vector<double> w1{0.5, 0.5};
    CHECK(std::isnan(aggregate_posterior(outs, w1, ImpactConstants{}).citywide.metrics[pct].mean));
    const std::vector<double> w2{0.0, 1.0};
    CHECK(aggregate_posterior(outs, w2, ImpactConstants{}).citywide.metrics[pct].mean == 0.0);
}

TEST_CASE("data uncertainty with exact attributes has zero spread") {
    World w;
    const auto u = data_uncertainty(w.demand, w.attrs, w.wages, kParams, 8, 200, 1);
    CHECK(u.n_resamples == 8);
    double total = 0.0;
    for (std::size_t m = 0; m < kNumModes; ++m) {
        CHECK(u.std[m] == 0.0);
        total += u.mean[m];
    }
    double demand = 0.0;
    for (const auto& c : w.demand.cells) demand += c.total();
    CHECK(total == doctest::Approx(demand).epsilon(1e-12));
    CHECK(u.mean[M(Mode::sfhv)] == 0.0);  // outside the demand's mode set
    CHECK_THROWS_AS(data_uncertainty(w.demand, w.attrs, w.wages, kParams, 0, 10, 1), InvalidInput);
}

TEST_CASE("small attribute noise gives a small spread") {
    World w;
    for (auto& [od, r] : w.attrs) {
        for (auto& a : r) {
            a.time_std = 0.01 * a.time_mean;
            a.cost_std = 0.01 * a.cost_mean;
        }
    }
    const auto u = data_uncertainty(w.demand, w.attrs, w.wages, kParams, 30, 500, 2);
    for (Mode m : ModeSet::four_mode().modes()) {
        CHECK(u.std[M(m)] > 0.0);
        CHECK(u.std[M(m)] < 0.05 * u.mean[M(m)]);
    }
}

TEST_CASE("data uncertainty matches an analytic propagation oracle") {
    // Two independent modes; only the drive cost is noisy. With many fixed
    // preference draws the drive share is close to Phi(ln(g_t / g_d(c)) / (sigma sqrt 2)),
    // so its spread across resamples follows from the spread of c.
    ZoneIndex zones{{"a", Zone{"a", "Queens", "A"}}};
    AttributeRow r = unavailable_row();
    const double cost_mean = 10.0, cost_std = 2.0;
    r[M(Mode::transit)] = attr(0.6, 2.75, 3.0);
    r[M(Mode::drive)] = attr(0.3, cost_mean, 3.0, 0.0, cost_std);
    AttributeTable attrs{{OdPair{"a", "a"}, r}};
    WageTable wages{{"w", WageGroup{"w", 25.0}}};
    DemandSet d{ModeSet{Mode::transit, Mode::drive}, {DemandCell{"a", "a", "w", {}}}};
    d.cells[0].trips[M(Mode::drive)] = 1000.0;
    const SimParams p{0.7, 0.3, 0.0, 0.0};

    const auto u = data_uncertainty(d, attrs, wages, p, 400, 20000, 9);

    const double gt = generalized_cost(r[M(Mode::transit)], 25.0, p.beta);
    auto share = [&](double c) {
        const double gd = generalized_cost(r[M(Mode::drive)], 25.0, p.beta, std::nullopt, c);
        return phi((std::log(gt) - std::log(gd)) / (p.sigma * std::sqrt(2.0)));
    };
    // Quadrature over the cost distribution (truncation at 0 is 5 sd away).
    double m1 = 0.0, m2 = 0.0, mass = 0.0;
    for (int k = -2500; k <= 2500; ++k) {
        const double z = k / 500.0;
        const double wz = std::exp(-0.5 * z * z);
        const double s = 1000.0 * share(cost_mean + cost_std * z);
        m1 += wz * s;
        m2 += wz * s * s;
        mass += wz;
    }
    m1 /= mass;
    const double oracle_sd = std::sqrt(m2 / mass - m1 * m1);
    CHECK(u.std[M(Mode::drive)] == doctest::Approx(oracle_sd).epsilon(0.2));
    // The mean over 400 resamples carries sampling error oracle_sd / sqrt(400)
    // plus the fixed preference-draw error of at most 1000 * sqrt(0.25 / 20000).
    const double mean_tol = 4.0 * (oracle_sd / std::sqrt(400.0) + 1000.0 * std::sqrt(0.25 / 20000.0));
    CHECK(std::abs(u.mean[M(Mode::drive)] - m1) <= mean_tol);
    CHECK(u.std[M(Mode::transit)] == doctest::Approx(u.std[M(Mode::drive)]).epsilon(1e-9));
}
