#include "modeshift/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include <boost/math/distributions/normal.hpp>

#include "modeshift/errors.hpp"
#include "modeshift/parallel.hpp"

namespace modeshift {

namespace {

constexpr double kNegInf = -kInf;

// One demand cell with its wage mixture: a single component of share 1 when
// the cell carries a wage group, the origin's wage distribution otherwise.
struct PreparedCell {
    const AttributeRow* row = nullptr;
    std::vector<std::pair<double, double>> wages;  // (hourly wage, share)
    PerMode<double> trips{};
};

std::vector<PreparedCell> prepare(const DemandSet& demand, const AttributeTable& attrs,
                                  const WageTable& wages, const WageDistribution* dist) {
    std::vector<PreparedCell> out;
    out.reserve(demand.cells.size());
    for (const DemandCell& c : demand.cells) {
        for (Mode m : kAllModes) {
            if (c.trips[idx(m)] != 0.0 && !demand.modes.contains(m)) {
                throw InvalidInput("demand cell reports trips for mode '" +
                                   std::string(mode_name(m)) + "' outside its mode set");
            }
        }
        const auto row = attrs.find(OdPair{c.origin, c.destination});
        if (row == attrs.end()) {
            throw MissingAttributes("missing attribute row for " + c.origin + "->" + c.destination);
        }
        PreparedCell pc{&row->second, {}, c.trips};
        auto wage_of = [&](const std::string& group) {
            const auto w = wages.find(group);
            if (w == wages.end()) {
                throw InvalidInput("cell " + c.origin + "->" + c.destination +
                                   " has unknown wage group '" + group + "'");
            }
            return w->second.hourly_wage;
        };
        if (!c.wage_group.empty()) {
            pc.wages.emplace_back(wage_of(c.wage_group), 1.0);
        } else {
            const auto zone = dist ? dist->find(c.origin) : WageDistribution::const_iterator{};
            if (!dist || zone == dist->end()) {
                throw MissingZone("cell " + c.origin + "->" + c.destination +
                                  " has no wage group and no wage distribution for its origin");
            }
            for (const auto& [group, share] : zone->second) {
                if (share > 0.0) pc.wages.emplace_back(wage_of(group), share);
            }
        }
        out.push_back(std::move(pc));
    }
    return out;
}

// Share-weighted choice probabilities over the cell's wage mixture.
ChoiceProbs cell_probs(const PreparedCell& cell, const SimParams& params, ModeSet available,
                       const ProbabilityBackend& backend, double cor_tfs, double cor_fs) {
    ChoiceProbs mix{};
    for (const auto& [wage, share] : cell.wages) {
        PerMode<double> x{};
        for (Mode m : kAllModes) {
            const double g = available.contains(m)
                                 ? generalized_cost((*cell.row)[idx(m)], wage, params.beta)
                                 : kInf;
            x[idx(m)] = g == kInf ? kInf : std::log(g) / params.sigma;
        }
        const ChoiceProbs p = backend.probs(x, cor_tfs, cor_fs);
        if (cell.wages.size() == 1) return p;
        for (std::size_t k = 0; k < kNumModes; ++k) mix[k] += share * p[k];
    }
    return mix;
}

double log_prob(double p, const LikelihoodOptions& opt) {
    if (opt.smoothing) p = std::max(p, opt.floor);
    return p > 0.0 ? std::log(p) : kNegInf;
}

void check_sigma(const SimParams& params) {
    params.validate();
    if (!(params.sigma > 0.0)) throw InvalidParameter("likelihood needs sigma > 0");
}

double stage1_prepared(const SimParams& params, std::span<const PreparedCell> cells,
                       const ProbabilityBackend& backend, const LikelihoodOptions& opt) {
    CompensatedSum total;
    for (const PreparedCell& cell : cells) {
        const ChoiceProbs p = cell_probs(cell, params, ModeSet::four_mode(), backend, 0.0, 0.0);
        for (Mode m : ModeSet::four_mode().modes()) {
            const double r = cell.trips[idx(m)];
            if (r == 0.0) continue;
            const double lp = log_prob(p[idx(m)], opt);
            if (lp == kNegInf) return kNegInf;
            total.add(r * lp);
        }
    }
    return total.value();
}

double stage2_prepared(const SimParams& params, std::span<const PreparedCell> cells,
                       const ProbabilityBackend& backend, const LikelihoodOptions& opt) {
    CompensatedSum total;
    for (const PreparedCell& cell : cells) {
        const ChoiceProbs p =
            cell_probs(cell, params, ModeSet::all(), backend, params.cor_tfs, params.cor_fs);
        const double nest = p[idx(Mode::taxi)] + p[idx(Mode::fhv)] + p[idx(Mode::sfhv)];
        for (Mode m : ModeSet::taxi_nest().modes()) {
            const double r = cell.trips[idx(m)];
            if (r == 0.0) continue;
            const double cond = nest > 0.0 ? p[idx(m)] / nest : 0.0;
            const double lp = log_prob(cond, opt);
            if (lp == kNegInf) return kNegInf;
            total.add(r * lp);
        }
    }
    return total.value();
}

}  // namespace

PriorSpec PriorSpec::defaults() {
    const double ln3 = std::log(3.0);
    const double lnln2 = std::log(std::log(2.0));
    return PriorSpec{-ln3 / 2.0, ln3 / 2.0, lnln2, std::abs(lnln2), 10, 10, 100};
}

void PriorSpec::validate() const {
    if (!(sd_beta > 0.0) || !(sd_sigma > 0.0)) {
        throw InvalidInput("prior standard deviations must be positive");
    }
    if (!std::isfinite(ln_mu_beta) || !std::isfinite(ln_mu_sigma)) {
        throw InvalidInput("prior log-means must be finite");
    }
    if (n_beta == 0 || n_sigma == 0 || n_corr_pairs == 0) {
        throw InvalidInput("prior grid sizes must be >= 1");
    }
}

double lognormal_quantile(double p, double ln_mu, double sd) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidInput("quantile level must lie in (0, 1)");
    return std::exp(boost::math::quantile(boost::math::normal(ln_mu, sd), p));
}

std::vector<double> lognormal_percentiles(std::size_t n, double ln_mu, double sd) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = lognormal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n),
                                    ln_mu, sd);
    }
    return out;
}

std::vector<std::pair<double, double>> correlation_lattice(std::size_t n) {
    if (n == 0) throw InvalidInput("correlation lattice needs at least one point");
    std::size_t n_v = 1;
    for (std::size_t d = 1; d * d <= n; ++d) {
        if (n % d == 0) n_v = d;
    }
    const std::size_t n_u = n / n_v;
    std::vector<std::pair<double, double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n_u; ++i) {
        const double fs = std::sqrt((static_cast<double>(i) + 0.5) / static_cast<double>(n_u));
        for (std::size_t j = 0; j < n_v; ++j) {
            const double tfs = fs * (static_cast<double>(j) + 0.5) / static_cast<double>(n_v);
            out.emplace_back(tfs, fs);
        }
    }
    return out;
}

std::vector<SimParams> prior_samples(const PriorSpec& spec) {
    spec.validate();
    const auto betas = lognormal_percentiles(spec.n_beta, spec.ln_mu_beta, spec.sd_beta);
    const auto sigmas = lognormal_percentiles(spec.n_sigma, spec.ln_mu_sigma, spec.sd_sigma);
    const auto corr = correlation_lattice(spec.n_corr_pairs);
    std::vector<SimParams> out;
    out.reserve(betas.size() * sigmas.size() * corr.size());
    for (double b : betas) {
        for (double s : sigmas) {
            for (const auto& [tfs, fs] : corr) out.push_back({b, s, tfs, fs});
        }
    }
    return out;
}

std::vector<SimParams> centred_grid(const SimParams& centre, const SimParams& step, std::size_t n_beta,
                                    std::size_t n_sigma, std::size_t n_corr_pairs) {
    if (n_beta == 0 || n_sigma == 0 || n_corr_pairs == 0) {
        throw InvalidInput("grid sizes must be >= 1");
    }
    auto offset = [](std::size_t i, std::size_t n) {
        return static_cast<double>(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>((n - 1) / 2));
    };
    std::vector<SimParams> out;
    out.reserve(n_beta * n_sigma * n_corr_pairs);
    for (std::size_t i = 0; i < n_beta; ++i) {
        for (std::size_t j = 0; j < n_sigma; ++j) {
            for (std::size_t k = 0; k < n_corr_pairs; ++k) {
                const SimParams p{centre.beta + offset(i, n_beta) * step.beta,
                                  centre.sigma + offset(j, n_sigma) * step.sigma,
                                  centre.cor_tfs + offset(k, n_corr_pairs) * step.cor_tfs,
                                  centre.cor_fs + offset(k, n_corr_pairs) * step.cor_fs};
                p.validate();
                if (!(p.sigma > 0.0)) throw InvalidParameter("grid reaches sigma <= 0");
                out.push_back(p);
            }
        }
    }
    return out;
}

double stage1_loglik(const SimParams& params, const DemandSet& demand4,
                     const AttributeTable& attrs, const WageTable& wages,
                     const ProbabilityBackend& backend, const LikelihoodOptions& options) {
    check_sigma(params);
    if (!demand4.modes.subset_of(ModeSet::four_mode())) {
        throw InvalidInput("stage 1 demand must be restricted to taxi, transit, walk, drive");
    }
    const auto cells = prepare(demand4, attrs, wages, nullptr);
    return stage1_prepared(params, cells, backend, options);
}

double stage2_loglik(const SimParams& params, const DemandSet& demand_tlc,
                     const AttributeTable& attrs, const WageTable& wages,
                     const WageDistribution& wage_dist, const ProbabilityBackend& backend,
                     const LikelihoodOptions& options) {
    check_sigma(params);
    if (!demand_tlc.modes.subset_of(ModeSet::taxi_nest())) {
        throw InvalidInput("stage 2 demand must be restricted to taxi, fhv, sfhv");
    }
    const auto cells = prepare(demand_tlc, attrs, wages, &wage_dist);
    return stage2_prepared(params, cells, backend, options);
}

DemandSet expand_by_wage(const DemandSet& demand, const WageDistribution& dist) {
    DemandSet out;
    out.modes = demand.modes;
    for (const DemandCell& c : demand.cells) {
        const auto zone = dist.find(c.origin);
        if (zone == dist.end()) {
            throw MissingZone("no wage distribution for origin zone '" + c.origin + "'");
        }
        for (const auto& [group, share] : zone->second) {
            DemandCell e{c.origin, c.destination, group, {}};
            for (std::size_t i = 0; i < kNumModes; ++i) e.trips[i] = c.trips[i] * share;
            out.cells.push_back(std::move(e));
        }
    }
    return out;
}

std::vector<ParameterSample> evaluate_posterior(std::span<const SimParams> samples,
                                                const DemandSet& demand4,
                                                const DemandSet& demand_tlc,
                                                const AttributeTable& attrs,
                                                const WageTable& wages,
                                                const WageDistribution& wage_dist,
                                                const ProbabilityBackend& backend,
                                                const LikelihoodOptions& options) {
    if (samples.empty()) throw InvalidInput("no parameter samples to evaluate");
    if (!demand4.modes.subset_of(ModeSet::four_mode()) ||
        !demand_tlc.modes.subset_of(ModeSet::taxi_nest())) {
        throw InvalidInput("demand mode sets do not match the two likelihood stages");
    }
    for (const auto& s : samples) check_sigma(s);
    const auto cells1 = prepare(demand4, attrs, wages, nullptr);
    const auto cells2 = prepare(demand_tlc, attrs, wages, &wage_dist);

    // Stage 1 has no correlation dependence: cache it per (beta, sigma).
    std::map<std::pair<double, double>, std::size_t> key_index;
    std::vector<std::pair<double, double>> keys;
    for (const auto& s : samples) {
        if (key_index.emplace(std::pair{s.beta, s.sigma}, keys.size()).second) {
            keys.emplace_back(s.beta, s.sigma);
        }
    }
    std::vector<double> stage1(keys.size());
    parallel_for(keys.size(), [&](std::size_t k) {
        const SimParams p{keys[k].first, keys[k].second, 0.0, 0.0};
        stage1[k] = stage1_prepared(p, cells1, backend, options);
    });

    std::vector<ParameterSample> out(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        out[i].params = samples[i];
        out[i].loglik_stage1 = stage1[key_index.at({samples[i].beta, samples[i].sigma})];
        out[i].loglik_stage2 = stage2_prepared(samples[i], cells2, backend, options);
    });
    return posterior_weights(std::move(out));
}

std::vector<ParameterSample> posterior_weights(std::vector<ParameterSample> samples) {
    if (samples.empty()) throw InvalidInput("posterior_weights: no samples");
    double mx = kNegInf;
    for (const auto& s : samples) {
        if (std::isnan(s.joint())) throw InvalidInput("posterior_weights: NaN log-likelihood");
        mx = std::max(mx, s.joint());
    }
    if (mx == kNegInf) throw DegeneratePosterior("every sample has zero likelihood");
    CompensatedSum z;
    for (const auto& s : samples) z.add(std::exp(s.joint() - mx));
    const double log_z = mx + std::log(z.value());
    for (auto& s : samples) s.weight = std::exp(s.joint() - log_z);
    return samples;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double q) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (weights[i] > 0.0) order.push_back(i);
    }
    if (order.empty()) throw InvalidInput("weighted_quantile: all weights are zero");
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double total = 0.0;
    for (std::size_t i : order) total += weights[i];
    // Midpoint CDF positions: c_k = (W_{k-1} + W_k) / 2 / total.
    std::vector<double> pos(order.size());
    double cum = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const double w = weights[order[k]];
        pos[k] = (cum + 0.5 * w) / total;
        cum += w;
    }
    if (q <= pos.front()) return values[order.front()];
    if (q >= pos.back()) return values[order.back()];
    const auto it = std::upper_bound(pos.begin(), pos.end(), q);
    const std::size_t hi = static_cast<std::size_t>(it - pos.begin());
    const std::size_t lo = hi - 1;
    const double a = values[order[lo]];
    const double b = values[order[hi]];
    const double t = (q - pos[lo]) / (pos[hi] - pos[lo]);
    return a + t * (b - a);
}

WeightedStats weighted_stats(std::span<const double> values, std::span<const double> weights) {
    if (values.empty()) throw InvalidInput("weighted_stats: empty input");
    if (values.size() != weights.size()) throw InvalidInput("weighted_stats: size mismatch");
    double wsum = 0.0;
    std::size_t ref = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            throw InvalidInput("weighted_stats: weights must be finite and nonnegative");
        }
        if (!std::isfinite(values[i])) throw InvalidInput("weighted_stats: non-finite value");
        wsum += weights[i];
        if (weights[i] > weights[ref]) ref = i;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw InvalidInput("weighted_stats: weights must sum to 1");

    // Moments about the heaviest value: exact when all mass sits on one value
    // or when every value is identical.
    const double x0 = values[ref];
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - x0;
        m1 += weights[i] * d;
        m2 += weights[i] * d * d;
    }
    WeightedStats s;
    s.mean = x0 + m1;
    s.std = std::sqrt(std::max(0.0, m2 - m1 * m1));
    s.ci95_low = weighted_quantile(values, weights, 0.025);
    s.ci95_high = weighted_quantile(values, weights, 0.975);
    return s;
}

SimParams max_likelihood(std::span<const ParameterSample> samples) {
    if (samples.empty()) throw InvalidInput("max_likelihood: no samples");
    auto key = [](const SimParams& p) { return std::tie(p.beta, p.sigma, p.cor_tfs, p.cor_fs); };
    std::size_t best = 0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const double a = samples[i].joint();
        const double b = samples[best].joint();
        if (a > b || (a == b && key(samples[i].params) < key(samples[best].params))) best = i;
    }
    return samples[best].params;
}

}  // namespace modeshift
