#include "modeshift/model_core.hpp"

#include <cmath>

#include "modeshift/errors.hpp"

namespace modeshift {

namespace {

constexpr std::array<std::string_view, kNumModes> kModeNames{"taxi", "transit", "walk",
                                                             "drive", "fhv", "sfhv"};

bool nonneg_or_inf(double v) { return v == kInf || (std::isfinite(v) && v >= 0.0); }

}  // namespace

std::string_view mode_name(Mode m) noexcept { return kModeNames[idx(m)]; }

std::optional<Mode> parse_mode(std::string_view name) noexcept {
    for (Mode m : kAllModes) {
        if (kModeNames[idx(m)] == name) return m;
    }
    return std::nullopt;
}

std::vector<Mode> ModeSet::modes() const {
    std::vector<Mode> out;
    for (Mode m : kAllModes) {
        if (contains(m)) out.push_back(m);
    }
    return out;
}

void ModeAttributes::validate() const {
    if (!nonneg_or_inf(time_mean) || !nonneg_or_inf(cost_mean) || !nonneg_or_inf(distance)) {
        throw InvalidInput("mode attributes must be nonnegative or +inf");
    }
    if (!std::isfinite(time_std) || time_std < 0.0 || !std::isfinite(cost_std) || cost_std < 0.0) {
        throw InvalidInput("attribute standard deviations must be finite and nonnegative");
    }
    if (!available()) {
        if (cost_mean != kInf || distance != kInf || time_std != 0.0 || cost_std != 0.0) {
            throw InvalidInput(
                "unavailable mode (infinite time) needs infinite cost and distance and zero stds");
        }
    } else if (cost_mean == kInf || distance == kInf) {
        throw InvalidInput("available mode (finite time) needs finite cost and distance");
    }
}

AttributeRow unavailable_row() noexcept {
    AttributeRow row;
    row.fill(ModeAttributes::unavailable());
    return row;
}

double DemandCell::total() const noexcept {
    double s = 0.0;
    for (double t : trips) s += t;
    return s;
}

bool Scenario::has_surcharge() const noexcept {
    for (double s : surcharges) {
        if (s != 0.0) return true;
    }
    return false;
}

void Scenario::validate() const {
    for (double s : surcharges) {
        if (!std::isfinite(s) || s < 0.0) {
            throw InvalidInput("scenario surcharges must be finite and nonnegative");
        }
    }
}

double generalized_cost(const ModeAttributes& attrs, double wage, double beta,
                        std::optional<double> time_override, std::optional<double> cost_override) {
    if (!(beta > 0.0) || !(wage > 0.0) || !std::isfinite(wage) || !std::isfinite(beta)) {
        throw InvalidInput("generalized_cost needs positive finite wage and beta");
    }
    if ((time_override && !(*time_override >= 0.0)) || (cost_override && !(*cost_override >= 0.0))) {
        throw InvalidInput("time/cost overrides must be nonnegative");
    }
    if (!attrs.available()) return kInf;
    const double t = time_override.value_or(attrs.time_mean);
    const double c = cost_override.value_or(attrs.cost_mean);
    return beta * wage * t + c;
}

PerMode<double> generalized_costs(const AttributeRow& row, double wage, double beta) {
    PerMode<double> g{};
    for (Mode m : kAllModes) g[idx(m)] = generalized_cost(row[idx(m)], wage, beta);
    return g;
}

AttributeTable apply_scenario(const AttributeTable& table, const ZoneIndex& zones,
                              const Scenario& scenario) {
    scenario.validate();
    AttributeTable out = table;
    const bool surcharge = scenario.has_surcharge();
    for (auto& [od, row] : out) {
        const auto zone = zones.find(od.origin);
        if (zone == zones.end()) throw MissingZone("unknown origin zone '" + od.origin + "'");
        const bool origin_matches = !scenario.surcharge_origin_borough ||
                                    zone->second.borough == *scenario.surcharge_origin_borough;
        for (Mode m : kAllModes) {
            ModeAttributes& a = row[idx(m)];
            if (scenario.removed_modes.contains(m)) {
                a = ModeAttributes::unavailable();
            } else if (surcharge && origin_matches && a.available()) {
                a.cost_mean += scenario.surcharges[idx(m)];
            }
        }
    }
    return out;
}

Scenario merge_scenarios(const Scenario& first, const Scenario& second) {
    Scenario merged;
    merged.name = first.name.empty() ? second.name
                                     : (second.name.empty() ? first.name
                                                            : first.name + "+" + second.name);
    merged.removed_modes = first.removed_modes | second.removed_modes;
    if (first.has_surcharge() && second.has_surcharge() &&
        first.surcharge_origin_borough != second.surcharge_origin_borough) {
        throw InvalidInput("cannot merge surcharges with different origin filters");
    }
    for (std::size_t i = 0; i < kNumModes; ++i) {
        merged.surcharges[i] = first.surcharges[i] + second.surcharges[i];
    }
    merged.surcharge_origin_borough = first.has_surcharge() ? first.surcharge_origin_borough
                                                            : second.surcharge_origin_borough;
    return merged;
}

namespace presets {

Scenario no_sfhv() {
    Scenario s;
    s.name = "no-sfhv";
    s.removed_modes.insert(Mode::sfhv);
    return s;
}

Scenario congestion_surcharge(std::string borough, double sfhv_occupancy) {
    Scenario s;
    s.name = "surcharge";
    s.surcharges[idx(Mode::taxi)] = 2.50;
    s.surcharges[idx(Mode::fhv)] = 2.75;
    s.surcharges[idx(Mode::sfhv)] = 0.75 * sfhv_occupancy;
    s.surcharge_origin_borough = std::move(borough);
    return s;
}

}  // namespace presets

double hourly_wage_from_bracket(double annual_low, double annual_high) {
    if (!(annual_low >= 0.0) || !(annual_high >= annual_low)) {
        throw InvalidInput("income bracket must satisfy 0 <= low <= high");
    }
    return 0.5 * (annual_low + annual_high) / 2080.0;
}

}  // namespace modeshift
