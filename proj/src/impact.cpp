#include "modeshift/impact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "modeshift/errors.hpp"
#include "modeshift/parallel.hpp"
#include "modeshift/rng.hpp"

namespace modeshift {

namespace {

constexpr std::array<std::string_view, kNumMetrics> kMetricNames{
    "delta_time_hours",      "delta_time_pct",     "delta_miles",        "delta_miles_pct",
    "fuel_gallons",          "co2_kg",             "time_cost_value",    "transit_revenue_delta",
    "taxi_revenue_delta",    "fhv_revenue_delta"};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double percent(double delta, double baseline) {
    if (delta == 0.0) return 0.0;
    if (baseline == 0.0) return kNaN;
    return 100.0 * delta / baseline;
}

const AttributeRow& row_for(const AttributeTable& table, const OdPair& od) {
    const auto it = table.find(od);
    if (it == table.end()) {
        throw MissingAttributes("missing attribute row for " + od.origin + "->" + od.destination);
    }
    return it->second;
}

const ModeAttributes& chosen(const AttributeRow& row, std::size_t m, const OdPair& od) {
    const ModeAttributes& a = row[m];
    if (!a.available() || !std::isfinite(a.cost_mean) || !std::isfinite(a.distance)) {
        throw ConsistencyError("trips assigned to unavailable mode '" +
                               std::string(mode_name(static_cast<Mode>(m))) + "' on " +
                               od.origin + "->" + od.destination);
    }
    return a;
}

bool is_fhv(std::size_t m) { return m == idx(Mode::fhv) || m == idx(Mode::sfhv); }

WeightedStats nan_stats() { return {kNaN, kNaN, kNaN, kNaN}; }

std::array<WeightedStats, kNumMetrics> stats_of(const std::vector<ImpactVector>& vectors,
                                                std::span<const double> weights) {
    std::array<WeightedStats, kNumMetrics> out{};
    std::vector<double> values(vectors.size());
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
        bool bad = false;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            values[i] = vectors[i][k];
            if (!std::isfinite(values[i])) {
                if (weights[i] > 0.0) bad = true;
                values[i] = 0.0;
            }
        }
        out[k] = bad ? nan_stats() : weighted_stats(values, weights);
    }
    return out;
}

}  // namespace

void ImpactConstants::validate() const {
    for (double v : {miles_per_gallon, co2_kg_per_gallon, transit_fare, sfhv_occupancy}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidParameter("impact constants must be positive and finite");
        }
    }
}

std::string_view metric_name(Metric m) noexcept { return kMetricNames[static_cast<std::size_t>(m)]; }
std::string_view metric_name(std::size_t i) noexcept { return kMetricNames[i]; }

ImpactTotals& ImpactTotals::operator+=(const ImpactTotals& o) noexcept {
    baseline_time_hours += o.baseline_time_hours;
    delta_time_hours += o.delta_time_hours;
    baseline_miles += o.baseline_miles;
    delta_miles += o.delta_miles;
    time_cost_value += o.time_cost_value;
    transit_revenue_delta += o.transit_revenue_delta;
    taxi_revenue_delta += o.taxi_revenue_delta;
    fhv_revenue_delta += o.fhv_revenue_delta;
    return *this;
}

ImpactVector impact_metrics(const ImpactTotals& t, const ImpactConstants& constants) {
    constants.validate();
    ImpactVector v{};
    const double fuel = t.delta_miles / constants.miles_per_gallon;
    v[static_cast<std::size_t>(Metric::delta_time_hours)] = t.delta_time_hours;
    v[static_cast<std::size_t>(Metric::delta_time_pct)] =
        percent(t.delta_time_hours, t.baseline_time_hours);
    v[static_cast<std::size_t>(Metric::delta_miles)] = t.delta_miles;
    v[static_cast<std::size_t>(Metric::delta_miles_pct)] = percent(t.delta_miles, t.baseline_miles);
    v[static_cast<std::size_t>(Metric::fuel_gallons)] = fuel;
    v[static_cast<std::size_t>(Metric::co2_kg)] = fuel * constants.co2_kg_per_gallon;
    v[static_cast<std::size_t>(Metric::time_cost_value)] = t.time_cost_value;
    v[static_cast<std::size_t>(Metric::transit_revenue_delta)] = t.transit_revenue_delta;
    v[static_cast<std::size_t>(Metric::taxi_revenue_delta)] = t.taxi_revenue_delta;
    v[static_cast<std::size_t>(Metric::fhv_revenue_delta)] = t.fhv_revenue_delta;
    return v;
}

double vehicle_miles(Mode mode, const ModeAttributes& attrs, const ImpactConstants& constants) {
    switch (mode) {
        case Mode::walk:
        case Mode::transit:
            return 0.0;
        case Mode::sfhv:
            return attrs.distance / constants.sfhv_occupancy;
        default:
            return attrs.distance;
    }
}

ImpactTotals translate_impacts(std::span<const CellShift> cells, const AttributeTable& attrs_a,
                               const AttributeTable& attrs_b, const WageTable& wages,
                               const ImpactConstants& constants) {
    constants.validate();
    CompensatedSum base_time, d_time, base_miles, d_miles, time_cost, transit, taxi, fhv;
    for (const CellShift& cell : cells) {
        const auto wage_it = wages.find(cell.wage_group);
        if (wage_it == wages.end()) {
            throw InvalidInput("unknown wage group '" + cell.wage_group + "'");
        }
        const double wage = wage_it->second.hourly_wage;
        const AttributeRow& row_a = row_for(attrs_a, cell.od);
        const AttributeRow& row_b = row_for(attrs_b, cell.od);
        for (std::size_t a = 0; a < kNumModes; ++a) {
            for (std::size_t b = 0; b < kNumModes; ++b) {
                const double n = cell.shift.counts[a][b];
                if (n == 0.0) continue;
                const ModeAttributes& xa = chosen(row_a, a, cell.od);
                const ModeAttributes& xb = chosen(row_b, b, cell.od);
                const double dt = xb.time_mean - xa.time_mean;
                const double va = vehicle_miles(static_cast<Mode>(a), xa, constants);
                const double vb = vehicle_miles(static_cast<Mode>(b), xb, constants);
                base_time.add(n * xa.time_mean);
                d_time.add(n * dt);
                base_miles.add(n * va);
                d_miles.add(n * (vb - va));
                time_cost.add(n * wage * dt);
                const std::size_t tr = idx(Mode::transit);
                if ((a == tr) != (b == tr)) {
                    transit.add((b == tr ? n : -n) * constants.transit_fare);
                }
                const std::size_t tx = idx(Mode::taxi);
                if (b == tx) taxi.add(n * xb.cost_mean);
                if (a == tx) taxi.add(-n * xa.cost_mean);
                if (is_fhv(b)) fhv.add(n * xb.cost_mean);
                if (is_fhv(a)) fhv.add(-n * xa.cost_mean);
            }
        }
    }
    return ImpactTotals{base_time.value(), d_time.value(),    base_miles.value(), d_miles.value(),
                        time_cost.value(), transit.value(), taxi.value(),       fhv.value()};
}

PerMode<double> shift_shares(const ShiftMatrix& matrix, Mode from) {
    const std::size_t f = idx(from);
    double total = 0.0;
    for (std::size_t b = 0; b < kNumModes; ++b) {
        if (b != f) total += matrix.counts[f][b];
    }
    if (!(total > 0.0)) {
        throw UndefinedMetric("no trips leave mode '" + std::string(mode_name(from)) + "'");
    }
    PerMode<double> shares{};
    for (std::size_t b = 0; b < kNumModes; ++b) {
        if (b != f) shares[b] = matrix.counts[f][b] / total;
    }
    return shares;
}

std::vector<SampleOutcome> run_scenario(const ScenarioInputs& in, const Scenario& scenario_a,
                                        const Scenario& scenario_b,
                                        std::span<const ParameterSample> posterior,
                                        std::size_t n_reps, std::uint64_t seed,
                                        const ImpactConstants& constants) {
    if (!in.demand || !in.attrs || !in.zones || !in.wages) {
        throw InvalidInput("run_scenario: incomplete inputs");
    }
    if (posterior.empty()) throw InvalidInput("run_scenario: empty posterior");
    if (n_reps == 0) throw InvalidInput("run_scenario: n_reps must be >= 1");
    constants.validate();
    for (const auto& s : posterior) s.params.validate();

    const AttributeTable attrs_a = apply_scenario(*in.attrs, *in.zones, scenario_a);
    const AttributeTable attrs_b = apply_scenario(*in.attrs, *in.zones, scenario_b);
    const auto& cells = in.demand->cells;

    struct CellInfo {
        const AttributeRow* row_a;
        const AttributeRow* row_b;
        double wage;
        double total;
    };
    std::vector<CellInfo> info(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const DemandCell& c = cells[i];
        const OdPair od{c.origin, c.destination};
        const auto wage = in.wages->find(c.wage_group);
        if (wage == in.wages->end()) {
            throw InvalidInput("demand cell " + c.origin + "->" + c.destination +
                               " has unknown wage group '" + c.wage_group + "'");
        }
        if (!in.zones->contains(c.origin)) {
            throw MissingZone("unknown origin zone '" + c.origin + "'");
        }
        info[i] = {&row_for(attrs_a, od), &row_for(attrs_b, od), wage->second.hourly_wage,
                   c.total()};
    }

    const std::size_t n_cells = cells.size();
    std::vector<SampleOutcome> out(posterior.size());
    std::vector<ShiftMatrix> shifts(n_cells);
    for (std::size_t s = 0; s < posterior.size(); ++s) {
        const SimParams& p = posterior[s].params;
        parallel_for(n_cells, [&](std::size_t i) {
            const CellInfo& ci = info[i];
            RngStream rng(seed, i, s);
            shifts[i] = simulate_cell(ci.total, generalized_costs(*ci.row_a, ci.wage, p.beta),
                                      generalized_costs(*ci.row_b, ci.wage, p.beta), p, n_reps,
                                      rng);
        });
        // Keyed reduction in cell order keeps the result independent of threads.
        SampleOutcome& o = out[s];
        for (std::size_t i = 0; i < n_cells; ++i) {
            const DemandCell& c = cells[i];
            const CellShift cs{{c.origin, c.destination}, c.wage_group, shifts[i]};
            const ImpactTotals t =
                translate_impacts(std::span(&cs, 1), attrs_a, attrs_b, *in.wages, constants);
            for (ScopeTotals* scope :
                 {&o.citywide, &o.per_zone[c.origin], &o.per_wage[c.wage_group]}) {
                scope->shift += shifts[i];
                scope->totals += t;
            }
        }
    }
    return out;
}

ImpactReport aggregate_posterior(std::span<const SampleOutcome> outcomes,
                                 std::span<const double> weights,
                                 const ImpactConstants& constants) {
    if (outcomes.empty()) throw InvalidInput("aggregate_posterior: no outcomes");
    if (outcomes.size() != weights.size()) {
        throw InvalidInput("aggregate_posterior: outcomes and weights differ in length");
    }
    ImpactReport report;
    const std::size_t n = outcomes.size();

    auto scope_report = [&](const std::string& key, auto&& pick) {
        std::vector<ImpactVector> vectors(n);
        for (std::size_t i = 0; i < n; ++i) {
            const ScopeTotals* t = pick(outcomes[i]);
            vectors[i] = impact_metrics(t ? t->totals : ImpactTotals{}, constants);
        }
        return ScopeReport{key, stats_of(vectors, weights)};
    };

    report.citywide =
        scope_report("citywide", [](const SampleOutcome& o) { return &o.citywide; });
    for (const auto& [zone, unused] : outcomes.front().per_zone) {
        report.per_zone.push_back(scope_report(zone, [&](const SampleOutcome& o) {
            const auto it = o.per_zone.find(zone);
            return it == o.per_zone.end() ? nullptr : &it->second;
        }));
    }
    for (const auto& [wage, unused] : outcomes.front().per_wage) {
        report.per_wage.push_back(scope_report(wage, [&](const SampleOutcome& o) {
            const auto it = o.per_wage.find(wage);
            return it == o.per_wage.end() ? nullptr : &it->second;
        }));
    }
    for (std::size_t a = 0; a < kNumModes; ++a) {
        for (std::size_t b = 0; b < kNumModes; ++b) {
            CompensatedSum acc;
            for (std::size_t i = 0; i < n; ++i) {
                acc.add(weights[i] * outcomes[i].citywide.shift.counts[a][b]);
            }
            report.shift_matrix[a][b] = acc.value();
        }
    }
    return report;
}

namespace {

double truncated_normal(double mean, double sd, RngStream& rng) {
    if (sd == 0.0) return mean;
    for (int tries = 0; tries < 1000; ++tries) {
        const double x = mean + sd * rng.normal();
        if (x >= 0.0) return x;
    }
    return 0.0;
}

}  // namespace

DataUncertainty data_uncertainty(const DemandSet& demand, const AttributeTable& attrs,
                                 const WageTable& wages, const SimParams& params,
                                 std::size_t n_resamples, std::size_t n_reps,
                                 std::uint64_t seed) {
    params.validate();
    if (n_resamples == 0 || n_reps == 0) {
        throw InvalidInput("data_uncertainty needs n_resamples >= 1 and n_reps >= 1");
    }
    const auto& cells = demand.cells;
    std::vector<const AttributeRow*> rows(cells.size());
    std::vector<double> cell_wage(cells.size());
    std::vector<std::size_t> od_index(cells.size());
    std::map<OdPair, std::size_t> od_ids;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const OdPair od{cells[i].origin, cells[i].destination};
        rows[i] = &row_for(attrs, od);
        const auto w = wages.find(cells[i].wage_group);
        if (w == wages.end()) {
            throw InvalidInput("unknown wage group '" + cells[i].wage_group + "'");
        }
        cell_wage[i] = w->second.hourly_wage;
        od_index[i] = od_ids.emplace(od, od_ids.size()).first->second;
    }
    const NoiseModel noise(params);

    // totals[r][m]: per-mode trips in resample r.
    std::vector<PerMode<double>> totals(n_resamples);
    parallel_for(n_resamples, [&](std::size_t r) {
        // Attributes are drawn once per O-D pair and resample.
        std::vector<std::pair<PerMode<double>, PerMode<double>>> drawn(od_ids.size());
        std::vector<bool> done(od_ids.size(), false);
        PerMode<CompensatedSum> acc{};
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::size_t k = od_index[i];
            if (!done[k]) {
                RngStream arng(seed, r, k, 1);
                for (Mode m : kAllModes) {
                    const ModeAttributes& a = (*rows[i])[idx(m)];
                    if (!a.available() || !demand.modes.contains(m)) continue;
                    drawn[k].first[idx(m)] = truncated_normal(a.time_mean, a.time_std, arng);
                    drawn[k].second[idx(m)] = truncated_normal(a.cost_mean, a.cost_std, arng);
                }
                done[k] = true;
            }
            PerMode<double> lc{};
            for (Mode m : kAllModes) {
                const ModeAttributes& a = (*rows[i])[idx(m)];
                if (!a.available() || !demand.modes.contains(m)) {
                    lc[idx(m)] = kInf;
                    continue;
                }
                lc[idx(m)] = std::log(generalized_cost(a, cell_wage[i], params.beta,
                                                       drawn[k].first[idx(m)],
                                                       drawn[k].second[idx(m)]));
            }
            const double total = cells[i].total();
            if (total == 0.0) continue;
            RngStream crng(seed, i, 0, 2);  // same preference draws in every resample
            PerMode<std::size_t> hits{};
            for (std::size_t rep = 0; rep < n_reps; ++rep) {
                ++hits[idx(choose_log(lc, noise.draw(crng)))];
            }
            for (std::size_t m = 0; m < kNumModes; ++m) {
                if (hits[m]) acc[m].add(static_cast<double>(hits[m]) * total / static_cast<double>(n_reps));
            }
        }
        for (std::size_t m = 0; m < kNumModes; ++m) totals[r][m] = acc[m].value();
    });

    DataUncertainty out;
    out.n_resamples = n_resamples;
    const double n = static_cast<double>(n_resamples);
    for (std::size_t m = 0; m < kNumModes; ++m) {
        const double ref = totals[0][m];
        double s1 = 0.0;
        double s2 = 0.0;
        for (const auto& t : totals) {
            const double d = t[m] - ref;
            s1 += d;
            s2 += d * d;
        }
        out.mean[m] = ref + s1 / n;
        out.std[m] = n_resamples > 1 ? std::sqrt(std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0)))
                                     : 0.0;
    }
    return out;
}

}  // namespace modeshift
