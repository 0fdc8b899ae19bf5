#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "modeshift/errors.hpp"
#include "modeshift/inference.hpp"
#include "test_util.hpp"

using namespace modeshift;
using test_util::attr;
using test_util::FixedBackend;

namespace {

// P proportional to exp(-x) over available modes: depends on the inputs, so
// the wage mixture can be checked by hand.
class SoftmaxBackend final : public ProbabilityBackend {
public:
    ChoiceProbs probs(const PerMode<double>& x, double, double) const override {
        ChoiceProbs p{};
        double s = 0.0;
        for (std::size_t i = 0; i < kNumModes; ++i) {
            p[i] = x[i] == kInf ? 0.0 : std::exp(-x[i]);
            s += p[i];
        }
        for (double& v : p) v /= s;
        return p;
    }
    std::string name() const override { return "softmax"; }
};

AttributeRow full_row() {
    AttributeRow r;
    r[idx(Mode::taxi)] = attr(0.3, 11.0, 3.0);
    r[idx(Mode::transit)] = attr(0.6, 2.75, 3.0);
    r[idx(Mode::walk)] = attr(1.0, 0.0, 3.0);
    r[idx(Mode::drive)] = attr(0.35, 8.0, 3.0);
    r[idx(Mode::fhv)] = attr(0.33, 10.0, 3.0);
    r[idx(Mode::sfhv)] = attr(0.45, 6.0, 3.0);
    return r;
}

struct Tiny {
    AttributeTable attrs{{OdPair{"a", "b"}, full_row()}, {OdPair{"b", "a"}, full_row()}};
    WageTable wages{{"lo", WageGroup{"lo", 15.0}}, {"hi", WageGroup{"hi", 60.0}}};
    WageDistribution dist{{"a", {{"lo", 0.25}, {"hi", 0.75}}}, {"b", {{"lo", 1.0}, {"hi", 0.0}}}};
};

DemandCell cell(const char* o, const char* d, const char* w, std::initializer_list<std::pair<Mode, double>> trips) {
    DemandCell c{o, d, w, {}};
    for (const auto& [m, v] : trips) c.trips[idx(m)] = v;
    return c;
}

const SimParams kParams{0.7, 0.4, 0.3, 0.6};

}  // namespace

TEST_CASE("prior quantiles") {
    const PriorSpec p = PriorSpec::defaults();
    CHECK(lognormal_quantile(0.1587, p.ln_mu_beta, p.sd_beta) == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
    CHECK(lognormal_quantile(0.8413, p.ln_mu_beta, p.sd_beta) == doctest::Approx(1.0).epsilon(1e-3));
    // The exact one-sd points reproduce the band to 1e-6.
    const double lo = 0.5 * std::erfc(1.0 / std::sqrt(2.0));
    CHECK(std::abs(lognormal_quantile(lo, p.ln_mu_beta, p.sd_beta) - 1.0 / 3.0) <= 1e-6);
    CHECK(std::abs(lognormal_quantile(1.0 - lo, p.ln_mu_beta, p.sd_beta) - 1.0) <= 1e-6);
    CHECK(std::abs(lognormal_quantile(0.5, p.ln_mu_beta, p.sd_beta) - std::exp(-std::log(3.0) / 2.0)) <= 1e-6);
    CHECK(std::abs(lognormal_quantile(0.5, p.ln_mu_beta, p.sd_beta) - 0.5774) <= 1e-4);
    CHECK(std::abs(lognormal_quantile(0.5, p.ln_mu_sigma, p.sd_sigma) - std::log(2.0)) <= 1e-6);
    CHECK(std::abs(lognormal_quantile(0.5, p.ln_mu_sigma, p.sd_sigma) - 0.6931) <= 1e-4);
}

TEST_CASE("median sigma puts the noise factor inside [1/2, 2] with one-sd mass") {
    const PriorSpec p = PriorSpec::defaults();
    const double sigma = lognormal_quantile(0.5, p.ln_mu_sigma, p.sd_sigma);
    // exp(eps) in [1/2, 2] iff |eps| <= ln 2; with eps ~ N(0, sigma^2) that is P(|z| <= ln 2 / sigma).
    const double mass = std::erf(std::log(2.0) / sigma / std::sqrt(2.0));
    const double one_sd = std::erf(1.0 / std::sqrt(2.0));
    CHECK(std::abs(mass - one_sd) <= 1e-12);
    CHECK(std::abs(one_sd - 0.6827) <= 1e-4);
}

TEST_CASE("beta percentiles inside (1/3, 1) match the band mass") {
    const PriorSpec p = PriorSpec::defaults();
    const auto betas = lognormal_percentiles(10, p.ln_mu_beta, p.sd_beta);
    REQUIRE(betas.size() == 10);
    int inside = 0;
    for (double b : betas) inside += (b > 1.0 / 3.0 && b < 1.0) ? 1 : 0;
    // Percentile levels 0.05, 0.15, ..., 0.95; those strictly between 0.1587 and 0.8413.
    int expected = 0;
    for (int i = 1; i <= 10; ++i) {
        const double level = (i - 0.5) / 10.0;
        expected += (level > 0.1587 && level < 0.8413) ? 1 : 0;
    }
    CHECK(expected == 6);
    CHECK(inside == expected);
    CHECK(std::is_sorted(betas.begin(), betas.end()));
}

TEST_CASE("correlation lattice lies in the ordered triangle") {
    for (std::size_t n : {1u, 10u, 100u, 7u}) {
        const auto pairs = correlation_lattice(n);
        CHECK(pairs.size() == n);
        for (const auto& [tfs, fs] : pairs) {
            CHECK(tfs >= 0.0);
            CHECK(fs <= 1.0);
            CHECK(fs > tfs);
        }
    }
    CHECK_THROWS_AS(correlation_lattice(0), InvalidInput);
}

TEST_CASE("correlation lattice is uniform over the triangle") {
    // Equal-mass cells: the mean of corFS under the uniform triangle is 2/3,
    // of corTFS is 1/3.
    const auto pairs = correlation_lattice(10000);
    double m_fs = 0.0, m_tfs = 0.0;
    for (const auto& [tfs, fs] : pairs) {
        m_fs += fs / pairs.size();
        m_tfs += tfs / pairs.size();
    }
    CHECK(m_fs == doctest::Approx(2.0 / 3.0).epsilon(1e-3));
    CHECK(m_tfs == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
}

TEST_CASE("prior samples form the full product") {
    PriorSpec spec = PriorSpec::defaults();
    spec.n_beta = 3;
    spec.n_sigma = 2;
    spec.n_corr_pairs = 4;
    const auto s = prior_samples(spec);
    REQUIRE(s.size() == 24);
    CHECK(s[0].beta == s[7].beta);
    CHECK(s[0].beta < s[8].beta);
    CHECK(s[0].sigma < s[4].sigma);
    spec.n_beta = 0;
    CHECK_THROWS_AS(prior_samples(spec), InvalidInput);
}

TEST_CASE("centred grid contains the centre") {
    const SimParams step{0.05, 0.03, 0.04, 0.04};
    const auto g = centred_grid(kReferenceParams, step, 10, 10, 10);
    REQUIRE(g.size() == 1000);
    CHECK(std::count(g.begin(), g.end(), kReferenceParams) == 1);
    CHECK(g.front().beta == doctest::Approx(0.71 - 4 * 0.05));
    CHECK(g.back().beta == doctest::Approx(0.71 + 5 * 0.05));
    CHECK_THROWS_AS(centred_grid(kReferenceParams, SimParams{0.5, 0.03, 0.04, 0.04}, 10, 1, 1), InvalidParameter);
    CHECK_THROWS_AS(centred_grid(kReferenceParams, step, 0, 1, 1), InvalidInput);
}

TEST_CASE("stage 1 single term and hand sums") {
    Tiny t;
    const FixedBackend backend({0.5, 0.2, 0.2, 0.1, 0.0, 0.0});
    DemandSet one{ModeSet::four_mode(), {cell("a", "b", "lo", {{Mode::taxi, 1}})}};
    CHECK(stage1_loglik(kParams, one, t.attrs, t.wages, backend) == doctest::Approx(std::log(0.5)).epsilon(1e-12));

    DemandSet two{ModeSet::four_mode(),
                  {cell("a", "b", "lo", {{Mode::taxi, 3}, {Mode::transit, 1}, {Mode::drive, 2}}),
                   cell("b", "a", "hi", {{Mode::transit, 4}, {Mode::walk, 1}})}};
    const double expected = 3 * std::log(0.5) + std::log(0.2) + 2 * std::log(0.1) + 4 * std::log(0.2) + std::log(0.2);
    CHECK(std::abs(stage1_loglik(kParams, two, t.attrs, t.wages, backend) - expected) <= 1e-12);
}

TEST_CASE("stage 1 perfect prediction, zero probability and smoothing") {
    Tiny t;
    const FixedBackend certain({1.0, 0.0, 0.0, 0.0, 0.0, 0.0});
    DemandSet d{ModeSet::four_mode(), {cell("a", "b", "lo", {{Mode::taxi, 5}})}};
    CHECK(stage1_loglik(kParams, d, t.attrs, t.wages, certain) == 0.0);

    DemandSet miss{ModeSet::four_mode(), {cell("a", "b", "lo", {{Mode::walk, 5}})}};
    CHECK(stage1_loglik(kParams, miss, t.attrs, t.wages, certain) == -kInf);
    const LikelihoodOptions smooth{true, 1e-12};
    CHECK(stage1_loglik(kParams, miss, t.attrs, t.wages, certain, smooth) ==
          doctest::Approx(5 * std::log(1e-12)));
}

TEST_CASE("stage 1 rejects mismatched demand") {
    Tiny t;
    const FixedBackend b({0.5, 0.2, 0.2, 0.1, 0.0, 0.0});
    DemandSet six{ModeSet::all(), {cell("a", "b", "lo", {{Mode::taxi, 1}})}};
    CHECK_THROWS_AS(stage1_loglik(kParams, six, t.attrs, t.wages, b), InvalidInput);
    DemandSet unknown{ModeSet::four_mode(), {cell("a", "z", "lo", {{Mode::taxi, 1}})}};
    CHECK_THROWS_AS(stage1_loglik(kParams, unknown, t.attrs, t.wages, b), MissingAttributes);
    CHECK_THROWS_AS(stage1_loglik(SimParams{0.7, 0.0, 0.0, 0.0}, unknown, t.attrs, t.wages, b), InvalidParameter);
}

TEST_CASE("stage 2 conditional likelihood") {
    Tiny t;
    const FixedBackend even({0.1, 0.2, 0.1, 0.1, 0.1, 0.1});
    DemandSet d{ModeSet::taxi_nest(),
                {cell("a", "b", "", {{Mode::taxi, 1}, {Mode::fhv, 1}, {Mode::sfhv, 1}})}};
    CHECK(stage2_loglik(kParams, d, t.attrs, t.wages, t.dist, even) ==
          doctest::Approx(3 * std::log(1.0 / 3.0)).epsilon(1e-12));

    const FixedBackend half({0.2, 0.3, 0.1, 0.0, 0.1, 0.1});
    DemandSet taxi{ModeSet::taxi_nest(), {cell("a", "b", "", {{Mode::taxi, 4}})}};
    CHECK(stage2_loglik(kParams, taxi, t.attrs, t.wages, t.dist, half) ==
          doctest::Approx(4 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("stage 2 ignores how probability is spread outside the nest") {
    Tiny t;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    DemandSet d{ModeSet::taxi_nest(),
                {cell("a", "b", "", {{Mode::taxi, 3}, {Mode::fhv, 2}, {Mode::sfhv, 7}}),
                 cell("b", "a", "", {{Mode::taxi, 1}, {Mode::sfhv, 2}})}};
    for (int i = 0; i < 50; ++i) {
        ChoiceProbs p;
        for (double& v : p) v = u(rng);
        ChoiceProbs q = p;
        const double k = u(rng) * 5.0;
        for (Mode m : {Mode::transit, Mode::walk, Mode::drive}) q[idx(m)] *= k;
        CHECK(stage2_loglik(kParams, d, t.attrs, t.wages, t.dist, FixedBackend(p)) ==
              doctest::Approx(stage2_loglik(kParams, d, t.attrs, t.wages, t.dist, FixedBackend(q))).epsilon(1e-12));
    }
}

TEST_CASE("stage 2 mixes wage groups for wage-less cells") {
    Tiny t;
    const SoftmaxBackend backend;
    DemandSet d{ModeSet::taxi_nest(), {cell("a", "b", "", {{Mode::taxi, 2}, {Mode::fhv, 3}, {Mode::sfhv, 5}})}};

    ChoiceProbs mix{};
    for (const auto& [group, share] : t.dist.at("a")) {
        PerMode<double> x{};
        for (Mode m : kAllModes) {
            x[idx(m)] = std::log(generalized_cost(full_row()[idx(m)], t.wages.at(group).hourly_wage, kParams.beta)) /
                        kParams.sigma;
        }
        const auto p = backend.probs(x, 0, 0);
        for (std::size_t i = 0; i < kNumModes; ++i) mix[i] += share * p[i];
    }
    const double nest = mix[idx(Mode::taxi)] + mix[idx(Mode::fhv)] + mix[idx(Mode::sfhv)];
    const double expected = 2 * std::log(mix[idx(Mode::taxi)] / nest) + 3 * std::log(mix[idx(Mode::fhv)] / nest) +
                            5 * std::log(mix[idx(Mode::sfhv)] / nest);
    CHECK(stage2_loglik(kParams, d, t.attrs, t.wages, t.dist, backend) == doctest::Approx(expected).epsilon(1e-12));

    // A cell that names its wage group uses that group alone.
    DemandSet named{ModeSet::taxi_nest(), {cell("a", "b", "hi", {{Mode::taxi, 2}})}};
    DemandSet only_hi{ModeSet::taxi_nest(), {cell("a", "b", "", {{Mode::taxi, 2}})}};
    WageDistribution all_hi{{"a", {{"hi", 1.0}}}};
    CHECK(stage2_loglik(kParams, named, t.attrs, t.wages, t.dist, backend) ==
          stage2_loglik(kParams, only_hi, t.attrs, t.wages, all_hi, backend));

    WageDistribution none;
    CHECK_THROWS_AS(stage2_loglik(kParams, d, t.attrs, t.wages, none, backend), MissingZone);
}

TEST_CASE("expand_by_wage splits trips by origin shares") {
    Tiny t;
    DemandSet d{ModeSet::taxi_nest(), {cell("a", "b", "", {{Mode::taxi, 8}, {Mode::fhv, 4}})}};
    const auto e = expand_by_wage(d, t.dist);
    REQUIRE(e.cells.size() == 2);
    double taxi = 0.0;
    for (const auto& c : e.cells) {
        taxi += c.trips[idx(Mode::taxi)];
        if (c.wage_group == "lo") CHECK(c.trips[idx(Mode::fhv)] == 1.0);
    }
    CHECK(taxi == 8.0);
}

TEST_CASE("posterior weight examples") {
    auto make = [](std::initializer_list<double> l) {
        std::vector<ParameterSample> s;
        for (double v : l) s.push_back(ParameterSample{kParams, v, 0.0, 0.0});
        return s;
    };
    for (const auto& w : posterior_weights(make({-3.0, -3.0, -3.0, -3.0}))) CHECK(w.weight == doctest::Approx(0.25));
    const auto two = posterior_weights(make({-10.0, -10.0 - std::log(2.0)}));
    CHECK(two[0].weight == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(two[1].weight == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(posterior_weights(make({-12345.0}))[0].weight == 1.0);
    const auto with_inf = posterior_weights(make({-1e6, -kInf}));
    CHECK(with_inf[0].weight == 1.0);
    CHECK(with_inf[1].weight == 0.0);
    CHECK_THROWS_AS(posterior_weights(make({-kInf, -kInf})), DegeneratePosterior);
}

TEST_CASE("posterior weights are invariant to a common shift") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 5.0);
    std::vector<ParameterSample> a, b;
    for (int i = 0; i < 30; ++i) {
        const double l1 = n(rng), l2 = n(rng);
        a.push_back(ParameterSample{kParams, l1, l2, 0.0});
        b.push_back(ParameterSample{kParams, l1 - 5000.0, l2, 0.0});
    }
    const auto wa = posterior_weights(a), wb = posterior_weights(b);
    double total = 0.0;
    for (std::size_t i = 0; i < wa.size(); ++i) {
        CHECK(wa[i].weight == doctest::Approx(wb[i].weight).epsilon(1e-9));
        total += wa[i].weight;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weighted statistics examples") {
    const std::vector<double> v{3.0, 7.0, 9.0};
    const auto point = weighted_stats(v, std::vector<double>{0.0, 1.0, 0.0});
    CHECK(point.mean == 7.0);
    CHECK(point.std == 0.0);
    CHECK(point.ci95_low == 7.0);
    CHECK(point.ci95_high == 7.0);

    const auto half = weighted_stats(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.5});
    CHECK(half.mean == doctest::Approx(0.5));
    CHECK(half.std == doctest::Approx(0.5));

    const std::vector<double> x{1.0, 4.0, 2.0, 8.0, 5.0};
    const std::vector<double> u(5, 0.2);
    const auto s = weighted_stats(x, u);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / 5.0;
    double var = 0.0;
    for (double e : x) var += (e - mean) * (e - mean) / 5.0;
    CHECK(s.mean == doctest::Approx(mean));
    CHECK(s.std == doctest::Approx(std::sqrt(var)));
    CHECK(s.ci95_low <= s.mean);
    CHECK(s.ci95_high >= s.mean);

    const auto same = weighted_stats(std::vector<double>{2.5, 2.5, 2.5}, std::vector<double>{0.1, 0.3, 0.6});
    CHECK(same.std == 0.0);
    CHECK_THROWS_AS(weighted_stats(std::vector<double>{}, std::vector<double>{}), InvalidInput);
}

TEST_CASE("weighted quantile interpolates the midpoint cdf") {
    const std::vector<double> v{0.0, 10.0};
    const std::vector<double> w{0.5, 0.5};
    CHECK(weighted_quantile(v, w, 0.5) == doctest::Approx(5.0));
    CHECK(weighted_quantile(v, w, 0.0) == 0.0);
    CHECK(weighted_quantile(v, w, 1.0) == 10.0);
}

TEST_CASE("max likelihood picks the best joint and breaks ties lexicographically") {
    const SimParams a{0.5, 0.3, 0.1, 0.2}, b{0.7, 0.3, 0.1, 0.2}, c{0.5, 0.2, 0.1, 0.2};
    std::vector<ParameterSample> s{{a, -5.0, -1.0, 0.0}, {b, -2.0, -1.0, 0.0}, {c, -10.0, 0.0, 0.0}};
    CHECK(max_likelihood(s) == b);
    std::vector<ParameterSample> tie{{b, -1.0, -1.0, 0.0}, {a, -1.0, -1.0, 0.0}, {c, -2.0, 0.0, 0.0}};
    CHECK(max_likelihood(tie) == c);
    std::vector<ParameterSample> one{{a, -kInf, 0.0, 0.0}};
    CHECK(max_likelihood(one) == a);
    std::vector<ParameterSample> inf{{a, -kInf, 0.0, 0.0}, {b, -3.0, -4.0, 0.0}};
    CHECK(max_likelihood(inf) == b);
}

TEST_CASE("evaluate_posterior matches the stage functions") {
    Tiny t;
    const SoftmaxBackend backend;
    DemandSet d4{ModeSet::four_mode(),
                 {cell("a", "b", "lo", {{Mode::taxi, 3}, {Mode::walk, 2}}), cell("b", "a", "hi", {{Mode::drive, 4}})}};
    DemandSet tlc{ModeSet::taxi_nest(), {cell("a", "b", "", {{Mode::taxi, 2}, {Mode::sfhv, 3}})}};
    const std::vector<SimParams> samples{{0.5, 0.3, 0.1, 0.4}, {0.5, 0.3, 0.2, 0.5}, {0.9, 0.6, 0.1, 0.4}};
    const auto post = evaluate_posterior(samples, d4, tlc, t.attrs, t.wages, t.dist, backend);
    REQUIRE(post.size() == 3);
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(post[i].params == samples[i]);
        CHECK(post[i].loglik_stage1 == doctest::Approx(stage1_loglik(samples[i], d4, t.attrs, t.wages, backend)));
        CHECK(post[i].loglik_stage2 ==
              doctest::Approx(stage2_loglik(samples[i], tlc, t.attrs, t.wages, t.dist, backend)));
        total += post[i].weight;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(post[0].loglik_stage1 == post[1].loglik_stage1);
}

TEST_CASE("corrupting demand lowers the likelihood at the generating parameters") {
    Tiny t;
    const SoftmaxBackend backend;
    // Expected trips at kParams versus the same total piled onto the least likely mode.
    PerMode<double> x{};
    for (Mode m : ModeSet::four_mode().modes()) {
        x[idx(m)] = std::log(generalized_cost(full_row()[idx(m)], 15.0, kParams.beta)) / kParams.sigma;
    }
    for (Mode m : {Mode::fhv, Mode::sfhv}) x[idx(m)] = kInf;
    const auto p = backend.probs(x, 0, 0);
    DemandSet fit{ModeSet::four_mode(), {DemandCell{"a", "b", "lo", {}}}};
    std::size_t worst = 0;
    for (Mode m : ModeSet::four_mode().modes()) {
        fit.cells[0].trips[idx(m)] = 100.0 * p[idx(m)];
        if (p[idx(m)] < p[worst]) worst = idx(m);
    }
    DemandSet bad = fit;
    bad.cells[0].trips = {};
    bad.cells[0].trips[worst] = 100.0;
    CHECK(stage1_loglik(kParams, fit, t.attrs, t.wages, backend) >
          stage1_loglik(kParams, bad, t.attrs, t.wages, backend));
}
