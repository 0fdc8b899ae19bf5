#include "modeshift/closed_form.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <tuple>

#include "modeshift/errors.hpp"
#include "modeshift/parallel.hpp"

namespace modeshift {

namespace {

constexpr double kNegInf = -kInf;

double log_sum_exp(std::span<const double> xs) {
    double mx = kNegInf;
    for (double x : xs) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) {
        if (x != kNegInf) s += std::exp(x - mx);
    }
    return mx + std::log(s);
}

/// Softmax of `scores` (-inf = unavailable) with the max subtracted first.
ChoiceProbs softmax(const PerMode<double>& scores) {
    double mx = kNegInf;
    for (double s : scores) mx = std::max(mx, s);
    if (mx == kNegInf) throw NoAvailableMode("no mode with finite generalized cost");
    ChoiceProbs p{};
    double z = 0.0;
    for (std::size_t i = 0; i < kNumModes; ++i) {
        if (scores[i] != kNegInf) {
            p[i] = std::exp(scores[i] - mx);
            z += p[i];
        }
    }
    for (double& v : p) v /= z;
    return p;
}

void check_tau(double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw InvalidParameter("nest dissimilarity parameter must lie in (0, 1]");
    }
}

struct WrmseParts {
    double weighted_sq = 0.0;
    double weight = 0.0;
    std::size_t entries = 0;
};

WrmseParts wrmse_parts(std::span<const PerMode<double>> pred, std::span<const PerMode<double>> obs,
                       ModeSet modes) {
    if (pred.size() != obs.size()) throw InvalidInput("wrmse: prediction/observation size mismatch");
    WrmseParts parts;
    CompensatedSum num;
    CompensatedSum den;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double w = 0.0;
        for (Mode m : kAllModes) w += obs[i][idx(m)];
        for (Mode m : kAllModes) {
            if (!modes.contains(m)) continue;
            const double e = pred[i][idx(m)] - obs[i][idx(m)];
            num.add(w * e * e);
            den.add(w);
            ++parts.entries;
        }
    }
    parts.weighted_sq = num.value();
    parts.weight = den.value();
    return parts;
}

struct PreparedCell {
    const AttributeRow* row = nullptr;
    double wage = 0.0;
    double total = 0.0;
};

std::vector<PreparedCell> prepare_cells(const DemandSet& demand, const AttributeTable& attrs,
                                        const WageTable& wages) {
    std::vector<PreparedCell> out;
    out.reserve(demand.cells.size());
    std::vector<std::string> missing;
    for (const DemandCell& cell : demand.cells) {
        PreparedCell pc;
        pc.total = cell.total();
        const auto row = attrs.find(OdPair{cell.origin, cell.destination});
        if (row == attrs.end()) {
            missing.push_back(cell.origin + "->" + cell.destination);
        } else {
            pc.row = &row->second;
        }
        const auto wage = wages.find(cell.wage_group);
        if (wage == wages.end()) {
            throw InvalidInput("demand cell " + cell.origin + "->" + cell.destination +
                               " references unknown wage group '" + cell.wage_group + "'");
        }
        pc.wage = wage->second.hourly_wage;
        out.push_back(pc);
    }
    if (!missing.empty()) {
        std::string msg = "missing attribute rows for:";
        for (const auto& k : missing) msg += " " + k;
        throw MissingAttributes(msg);
    }
    return out;
}

PerMode<double> predict_cell(const PreparedCell& cell, ModeSet modes,
                             const ClosedFormParams& params, ModelKind kind,
                             const NestSpec& nests) {
    PerMode<double> out{};
    if (cell.total == 0.0) return out;
    PerMode<double> g{};
    for (Mode m : kAllModes) {
        g[idx(m)] = modes.contains(m)
                        ? generalized_cost((*cell.row)[idx(m)], cell.wage, params.beta)
                        : kInf;
    }
    const ChoiceProbs p = model_probs(kind, g, params, nests);
    for (std::size_t i = 0; i < kNumModes; ++i) out[i] = cell.total * p[i];
    return out;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::mnl: return "mnl";
        case ModelKind::logmnl: return "logmnl";
        case ModelKind::nested: return "nested";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "mnl") return ModelKind::mnl;
    if (name == "logmnl") return ModelKind::logmnl;
    if (name == "nested") return ModelKind::nested;
    throw InvalidInput("unknown model kind '" + std::string(name) + "'");
}

ChoiceProbs mnl_probs(const PerMode<double>& gen_costs, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be finite and nonnegative");
    }
    PerMode<double> scores{};
    for (std::size_t i = 0; i < kNumModes; ++i) {
        scores[i] = std::isfinite(gen_costs[i]) ? -lambda * gen_costs[i] : kNegInf;
    }
    return softmax(scores);
}

ChoiceProbs logmnl_probs(const PerMode<double>& gen_costs, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be finite and nonnegative");
    }
    PerMode<double> scores{};
    for (std::size_t i = 0; i < kNumModes; ++i) {
        const double g = gen_costs[i];
        if (!std::isfinite(g)) {
            scores[i] = kNegInf;
            continue;
        }
        if (!(g > 0.0)) throw InvalidCost("log-utility model needs strictly positive costs");
        scores[i] = -lambda * std::log(g);
    }
    return softmax(scores);
}

ChoiceProbs nested_probs_from_utilities(const PerMode<double>& v, double tau_outer,
                                        double tau_inner, const NestSpec& nests) {
    check_tau(tau_outer);
    check_tau(tau_inner);
    if (!nests.inner.subset_of(nests.outer)) {
        throw InvalidInput("nest spec: inner nest must be contained in the outer nest");
    }

    // Inner sub-nest.
    std::vector<double> buf;
    for (Mode m : nests.inner.modes()) buf.push_back(v[idx(m)] / tau_inner);
    const double iv_inner = log_sum_exp(buf);
    const double inner_utility = tau_inner * iv_inner;  // -inf when empty/unavailable

    // Outer nest: direct members plus the inner composite.
    buf.clear();
    for (Mode m : nests.outer.modes()) {
        if (!nests.inner.contains(m)) buf.push_back(v[idx(m)] / tau_outer);
    }
    if (!nests.inner.empty()) buf.push_back(inner_utility / tau_outer);
    const double iv_outer = log_sum_exp(buf);
    const double outer_utility = tau_outer * iv_outer;

    // Top level: singletons plus the outer composite.
    buf.clear();
    for (Mode m : kAllModes) {
        if (!nests.outer.contains(m)) buf.push_back(v[idx(m)]);
    }
    if (!nests.outer.empty()) buf.push_back(outer_utility);
    const double iv_top = log_sum_exp(buf);
    if (iv_top == kNegInf) throw NoAvailableMode("no mode with finite generalized cost");

    ChoiceProbs p{};
    const double log_p_outer = outer_utility - iv_top;
    for (Mode m : kAllModes) {
        const double vm = v[idx(m)];
        if (vm == kNegInf) continue;
        double lp = 0.0;
        if (!nests.outer.contains(m)) {
            lp = vm - iv_top;
        } else if (!nests.inner.contains(m)) {
            lp = log_p_outer + vm / tau_outer - iv_outer;
        } else {
            lp = log_p_outer + inner_utility / tau_outer - iv_outer + vm / tau_inner - iv_inner;
        }
        p[idx(m)] = std::exp(lp);
    }
    return p;
}

ChoiceProbs nested_probs(const PerMode<double>& gen_costs, const ClosedFormParams& params,
                         const NestSpec& nests) {
    if (!(params.lambda >= 0.0) || !std::isfinite(params.lambda)) {
        throw InvalidParameter("lambda must be finite and nonnegative");
    }
    PerMode<double> v{};
    for (std::size_t i = 0; i < kNumModes; ++i) {
        v[i] = std::isfinite(gen_costs[i]) ? -params.lambda * gen_costs[i] : kNegInf;
    }
    return nested_probs_from_utilities(v, params.tau_taxi_fhv, params.tau_fhv, nests);
}

ChoiceProbs model_probs(ModelKind kind, const PerMode<double>& gen_costs,
                        const ClosedFormParams& params, const NestSpec& nests) {
    switch (kind) {
        case ModelKind::mnl: return mnl_probs(gen_costs, params.lambda);
        case ModelKind::logmnl: return logmnl_probs(gen_costs, params.lambda);
        case ModelKind::nested: return nested_probs(gen_costs, params, nests);
    }
    throw InvalidInput("unknown model kind");
}

std::vector<PerMode<double>> predict_table(const DemandSet& demand, const AttributeTable& attrs,
                                           const WageTable& wages, const ClosedFormParams& params,
                                           ModelKind kind, const NestSpec& nests) {
    const auto cells = prepare_cells(demand, attrs, wages);
    std::vector<PerMode<double>> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(predict_cell(c, demand.modes, params, kind, nests));
    return out;
}

std::vector<PerMode<double>> observed_table(const DemandSet& demand) {
    std::vector<PerMode<double>> out;
    out.reserve(demand.cells.size());
    for (const auto& c : demand.cells) out.push_back(c.trips);
    return out;
}

double wrmse(std::span<const PerMode<double>> pred, std::span<const PerMode<double>> obs,
             ModeSet modes) {
    const WrmseParts parts = wrmse_parts(pred, obs, modes);
    if (parts.entries == 0) throw InvalidInput("wrmse: empty input");
    if (!(parts.weight > 0.0)) throw InvalidInput("wrmse: observed trips sum to zero");
    return std::sqrt(parts.weighted_sq / parts.weight);
}

double r_squared(std::span<const double> pred, std::span<const double> obs) {
    if (pred.size() != obs.size()) throw InvalidInput("r_squared: size mismatch");
    if (obs.size() < 2) throw InvalidInput("r_squared needs at least two modes");
    double mean = 0.0;
    for (double o : obs) mean += o;
    mean /= static_cast<double>(obs.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        ss_res += (pred[i] - obs[i]) * (pred[i] - obs[i]);
        ss_tot += (obs[i] - mean) * (obs[i] - mean);
    }
    if (ss_tot == 0.0) throw UndefinedMetric("R^2 undefined: observations have zero variance");
    return 1.0 - ss_res / ss_tot;
}

PerMode<double> mode_totals(std::span<const PerMode<double>> table) {
    PerMode<CompensatedSum> sums{};
    for (const auto& row : table) {
        for (std::size_t i = 0; i < kNumModes; ++i) sums[i].add(row[i]);
    }
    PerMode<double> out{};
    for (std::size_t i = 0; i < kNumModes; ++i) out[i] = sums[i].value();
    return out;
}

std::vector<double> GridAxis::values() const {
    if (steps == 0) return {};
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw InvalidInput("grid axis must be finite");
    if (steps == 1) return {lo};
    std::vector<double> v(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
    }
    return v;
}

GridSpec GridSpec::defaults_for(ModelKind kind) {
    GridSpec g;
    g.beta = {0.1, 2.0, 20};
    switch (kind) {
        case ModelKind::mnl: g.lambda = {0.01, 0.5, 50}; break;
        case ModelKind::logmnl: g.lambda = {0.25, 6.0, 24}; break;
        case ModelKind::nested:
            g.lambda = {0.01, 0.5, 25};
            g.tau_taxi_fhv = {0.1, 1.0, 10};
            g.tau_fhv = {0.1, 1.0, 10};
            break;
    }
    return g;
}

GridSpec GridSpec::parse(std::string_view text, const GridSpec& defaults) {
    GridSpec g = defaults;
    std::stringstream ss{std::string(text)};
    std::string item;
    auto number = [](const std::string& s, auto& out) {
        const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            throw InvalidInput("grid spec: bad number '" + s + "'");
        }
    };
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InvalidInput("grid spec: expected name=lo:hi:steps");
        const std::string name = item.substr(0, eq);
        std::stringstream parts(item.substr(eq + 1));
        std::string lo, hi, steps;
        if (!std::getline(parts, lo, ':') || !std::getline(parts, hi, ':') ||
            !std::getline(parts, steps)) {
            throw InvalidInput("grid spec: expected name=lo:hi:steps in '" + item + "'");
        }
        GridAxis axis;
        number(lo, axis.lo);
        number(hi, axis.hi);
        number(steps, axis.steps);
        if (name == "lambda") g.lambda = axis;
        else if (name == "beta") g.beta = axis;
        else if (name == "tau_taxi_fhv") g.tau_taxi_fhv = axis;
        else if (name == "tau_fhv") g.tau_fhv = axis;
        else throw InvalidInput("grid spec: unknown parameter '" + name + "'");
    }
    return g;
}

FitResult fit_grid(std::span<const DemandSet> demand, const AttributeTable& attrs,
                   const WageTable& wages, ModelKind kind, const GridSpec& grid,
                   const NestSpec& nests) {
    const auto lambdas = grid.lambda.values();
    const auto betas = grid.beta.values();
    std::vector<double> tau_outer{1.0};
    std::vector<double> tau_inner{1.0};
    if (kind == ModelKind::nested) {
        tau_outer = grid.tau_taxi_fhv.values();
        tau_inner = grid.tau_fhv.values();
    }
    std::vector<ClosedFormParams> points;
    for (double l : lambdas) {
        for (double b : betas) {
            for (double to : tau_outer) {
                for (double ti : tau_inner) points.push_back({l, b, to, ti});
            }
        }
    }
    if (points.empty()) throw InvalidInput("fit_grid: empty grid");

    std::vector<std::vector<PreparedCell>> prepared;
    std::vector<std::vector<PerMode<double>>> observed;
    for (const DemandSet& d : demand) {
        prepared.push_back(prepare_cells(d, attrs, wages));
        observed.push_back(observed_table(d));
    }

    std::vector<GridPoint> trace(points.size());
    parallel_for(points.size(), [&](std::size_t k) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t s = 0; s < demand.size(); ++s) {
            std::vector<PerMode<double>> pred;
            pred.reserve(prepared[s].size());
            for (const auto& c : prepared[s]) {
                pred.push_back(predict_cell(c, demand[s].modes, points[k], kind, nests));
            }
            const WrmseParts parts = wrmse_parts(pred, observed[s], demand[s].modes);
            num += parts.weighted_sq;
            den += parts.weight;
        }
        if (!(den > 0.0)) throw InvalidInput("fit_grid: observed trips sum to zero");
        trace[k] = {points[k], std::sqrt(num / den)};
    });

    auto key = [](const ClosedFormParams& p) {
        return std::tie(p.lambda, p.beta, p.tau_taxi_fhv, p.tau_fhv);
    };
    std::size_t best = 0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
        const bool better = trace[k].wrmse < trace[best].wrmse ||
                            (trace[k].wrmse == trace[best].wrmse &&
                             key(trace[k].params) < key(trace[best].params));
        if (better) best = k;
    }
    return {trace[best].params, trace[best].wrmse, std::move(trace)};
}

}  // namespace modeshift
