#include "modeshift/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "modeshift/errors.hpp"
#include "modeshift/rng.hpp"

namespace modeshift {

namespace {

std::string zone_id(std::size_t i, std::size_t n) {
    const int width = n >= 100 ? 3 : 2;
    char buf[16];
    std::snprintf(buf, sizeof buf, "z%0*zu", width, i + 1);
    return buf;
}

// Rounds to `digits` decimals so the CSV stays readable.
double round_to(double x, int digits) {
    const double scale = std::pow(10.0, digits);
    return std::round(x * scale) / scale;
}

// Multiplicative jitter with median 1.
double jitter(RngStream& rng, double spread) { return std::exp(spread * rng.normal()); }

ModeAttributes make_mode(double time, double cost, double distance, double time_cv,
                         double cost_cv) {
    ModeAttributes a;
    a.time_mean = round_to(time, 4);
    a.time_std = round_to(time * time_cv, 4);
    a.cost_mean = round_to(cost, 2);
    a.cost_std = round_to(cost * cost_cv, 2);
    a.distance = round_to(distance, 2);
    return a;
}

PerMode<std::size_t> sample_choices(std::size_t n, const AttributeRow& row, double wage,
                                    const SimParams& p, ModeSet modes, RngStream& rng) {
    PerMode<double> lc{};
    for (Mode m : kAllModes) {
        lc[idx(m)] = modes.contains(m) ? std::log(generalized_cost(row[idx(m)], wage, p.beta)) : kInf;
    }
    const NoiseModel noise(p);
    PerMode<std::size_t> counts{};
    for (std::size_t i = 0; i < n; ++i) ++counts[idx(choose_log(lc, noise.draw(rng)))];
    return counts;
}

}  // namespace

void FixtureConfig::validate() const {
    if (n_zones < 2) throw InvalidInput("fixture needs at least 2 zones");
    if (n_wage_groups < 1) throw InvalidInput("fixture needs at least 1 wage group");
    if (!(base_volume > 0.0) || !(tlc_multiplier > 0.0) || !(max_walk_miles >= 0.0)) {
        throw InvalidInput("fixture volumes and walk cutoff must be positive");
    }
    if (target_borough.empty()) throw InvalidInput("fixture target borough is empty");
    true_params.validate();
    if (!(true_params.sigma > 0.0)) throw InvalidInput("fixture needs sigma > 0");
}

DatasetBundle gen_fixture(const FixtureConfig& cfg) {
    cfg.validate();
    DatasetBundle b;
    RngStream geo(cfg.seed, 0);

    // Zones: the target borough is a dense core, the rest spread around it.
    const std::size_t n_core = std::max<std::size_t>(1, cfg.n_zones / 3);
    const std::array<const char*, 3> others{"Brooklyn", "Queens", "Bronx"};
    std::vector<std::string> ids;
    std::vector<std::pair<double, double>> xy;
    for (std::size_t i = 0; i < cfg.n_zones; ++i) {
        const bool core = i < n_core;
        const std::string borough = core ? cfg.target_borough : others[(i - n_core) % others.size()];
        const double radius = core ? 1.5 * geo.uniform() : 2.5 + 4.0 * geo.uniform();
        const double angle = 6.283185307179586 * geo.uniform();
        xy.emplace_back(radius * std::cos(angle), radius * std::sin(angle));
        ids.push_back(zone_id(i, cfg.n_zones));
        b.zones.emplace(ids.back(), Zone{ids.back(), borough, borough + " " + std::to_string(i + 1)});
    }
    auto is_core = [&](std::size_t i) { return i < n_core; };

    // Wage groups on log-spaced annual brackets between 20k and 200k.
    std::vector<std::string> groups;
    const double ratio = std::pow(10.0, 1.0 / static_cast<double>(cfg.n_wage_groups));
    for (std::size_t k = 0; k < cfg.n_wage_groups; ++k) {
        const double lo = 20000.0 * std::pow(ratio, static_cast<double>(k));
        groups.push_back("w" + std::to_string(k + 1));
        b.wages.emplace(groups.back(),
                        WageGroup{groups.back(), round_to(hourly_wage_from_bracket(lo, lo * ratio), 2)});
    }

    // Wage shares per zone; core zones skew towards higher wages.
    for (std::size_t i = 0; i < cfg.n_zones; ++i) {
        std::vector<double> w(cfg.n_wage_groups);
        double sum = 0.0;
        for (std::size_t k = 0; k < cfg.n_wage_groups; ++k) {
            const double tilt = (is_core(i) ? 0.4 : -0.2) * static_cast<double>(k);
            w[k] = std::exp(tilt + 0.5 * geo.normal());
            sum += w[k];
        }
        double assigned = 0.0;
        for (std::size_t k = 0; k < cfg.n_wage_groups; ++k) {
            const double s = k + 1 == cfg.n_wage_groups ? round_to(1.0 - assigned, 4) : round_to(w[k] / sum, 4);
            assigned += s;
            b.wage_dist[ids[i]][groups[k]] = s;
        }
    }

    // Attribute surfaces and per-pair commuter volume.
    std::vector<double> volume;
    std::size_t od = 0;
    for (std::size_t o = 0; o < cfg.n_zones; ++o) {
        for (std::size_t d = 0; d < cfg.n_zones; ++d, ++od) {
            RngStream rng(cfg.seed, 1, od);
            const double euclid = std::hypot(xy[o].first - xy[d].first, xy[o].second - xy[d].second);
            const double dist = o == d ? 0.6 + 0.6 * rng.uniform() : 0.4 + 1.25 * euclid;
            const bool core_dest = is_core(d);
            AttributeRow row = unavailable_row();
            row[idx(Mode::drive)] = make_mode((0.08 + dist / 15.0 + (core_dest ? 0.1 : 0.0)) * jitter(rng, 0.1),
                                              0.55 * dist + (core_dest ? 18.0 : 4.0), dist, 0.12, 0.1);
            row[idx(Mode::taxi)] = make_mode((0.12 + dist / 13.0) * jitter(rng, 0.1),
                                             (3.3 + 2.5 * dist) * jitter(rng, 0.05), dist, 0.15, 0.1);
            row[idx(Mode::fhv)] = make_mode((0.14 + dist / 13.0) * jitter(rng, 0.1),
                                            (3.0 + 2.2 * dist) * jitter(rng, 0.05), dist, 0.15, 0.12);
            row[idx(Mode::sfhv)] = make_mode((0.22 + dist / 11.0) * jitter(rng, 0.1),
                                             (1.8 + 1.2 * dist) * jitter(rng, 0.05), dist, 0.2, 0.12);
            row[idx(Mode::transit)] = make_mode((0.3 + dist / 9.0) * jitter(rng, 0.15), 2.75, dist, 0.15, 0.0);
            if (dist <= cfg.max_walk_miles) {
                row[idx(Mode::walk)] = make_mode(dist / 3.0, 0.0, dist, 0.05, 0.0);
            }
            b.attrs.emplace(OdPair{ids[o], ids[d]}, row);
            volume.push_back(cfg.base_volume * std::exp(-dist / 4.0) * (0.6 + 0.8 * rng.uniform()));
        }
    }

    // Demand drawn trip by trip from the individual-choice model.
    const SimParams& p = cfg.true_params;
    b.demand4.modes = ModeSet::four_mode();
    b.demand_tlc.modes = ModeSet::taxi_nest();
    od = 0;
    std::size_t cell = 0;
    for (std::size_t o = 0; o < cfg.n_zones; ++o) {
        for (std::size_t d = 0; d < cfg.n_zones; ++d, ++od) {
            const AttributeRow& row = b.attrs.at(OdPair{ids[o], ids[d]});
            DemandCell tlc{ids[o], ids[d], "", {}};
            for (std::size_t k = 0; k < cfg.n_wage_groups; ++k, ++cell) {
                const double share = b.wage_dist.at(ids[o]).at(groups[k]);
                const double wage = b.wages.at(groups[k]).hourly_wage;

                RngStream r4(cfg.seed, 2, cell);
                const auto n4 = static_cast<std::size_t>(std::llround(volume[od] * share));
                const auto c4 = sample_choices(n4, row, wage, p, ModeSet::four_mode(), r4);
                DemandCell dc{ids[o], ids[d], groups[k], {}};
                for (Mode m : ModeSet::four_mode().modes()) dc.trips[idx(m)] = static_cast<double>(c4[idx(m)]);
                b.demand4.cells.push_back(std::move(dc));

                RngStream r6(cfg.seed, 3, cell);
                const auto n6 = static_cast<std::size_t>(std::llround(cfg.tlc_multiplier * volume[od] * share));
                const auto c6 = sample_choices(n6, row, wage, p, ModeSet::all(), r6);
                for (Mode m : ModeSet::taxi_nest().modes()) tlc.trips[idx(m)] += static_cast<double>(c6[idx(m)]);
            }
            b.demand_tlc.cells.push_back(std::move(tlc));
        }
    }

    b.manifest = {
        {"generator", "modeshift gen-fixture"},
        {"seed", cfg.seed},
        {"n_zones", cfg.n_zones},
        {"n_wage_groups", cfg.n_wage_groups},
        {"target_borough", cfg.target_borough},
        {"base_volume", cfg.base_volume},
        {"tlc_multiplier", cfg.tlc_multiplier},
        {"max_walk_miles", cfg.max_walk_miles},
        {"true_params",
         {{"beta", p.beta}, {"sigma", p.sigma}, {"cor_tfs", p.cor_tfs}, {"cor_fs", p.cor_fs}}},
    };
    return b;
}

}  // namespace modeshift
