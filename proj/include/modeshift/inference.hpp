#pragma once

// Two-stage likelihood over a prior lattice of individual-choice parameters.
// Stage 1 scores four-mode ridership given (beta, sigma); stage 2 scores the
// taxi/FHV/shared-FHV split conditional on the taxi nest. Samples are weighted
// by exp(stage1 + stage2), normalized with log-sum-exp.

#include <span>
#include <vector>

#include "modeshift/mc_simulator.hpp"
#include "modeshift/model_core.hpp"
#include "modeshift/prob_backend.hpp"

namespace modeshift {

struct PriorSpec {
    double ln_mu_beta;
    double sd_beta;
    double ln_mu_sigma;
    double sd_sigma;
    std::size_t n_beta = 10;
    std::size_t n_sigma = 10;
    std::size_t n_corr_pairs = 100;

    /// ln(beta) ~ N(-(ln 3)/2, ((ln 3)/2)^2), ln(sigma) ~ N(ln ln 2, (ln ln 2)^2),
    /// 10 x 10 x 100 lattice.
    static PriorSpec defaults();
    void validate() const;
};

/// Quantile of a log-normal with log-mean `ln_mu` and log-sd `sd`.
double lognormal_quantile(double p, double ln_mu, double sd);

/// Midpoint percentiles (i - 0.5) / n of a log-normal.
std::vector<double> lognormal_percentiles(std::size_t n, double ln_mu, double sd);

/// (corTFS, corFS) pairs: stratified midpoints of the uniform distribution on
/// 0 <= corTFS < corFS <= 1. The unit square is split into n_u x n_v cells
/// (n_u * n_v = n, n_v the largest divisor <= sqrt(n)) and mapped to the
/// triangle by corFS = sqrt(u), corTFS = corFS * v, which preserves
/// uniformity, so every pair carries equal mass.
std::vector<std::pair<double, double>> correlation_lattice(std::size_t n);

/// Cartesian product beta x sigma x correlation pairs, beta outermost.
std::vector<SimParams> prior_samples(const PriorSpec& spec);

/// Regular grid holding `centre` exactly: axis k takes offsets
/// i - (n - 1) / 2 (integer division) times its step. Correlation pairs move
/// together along one line, (corTFS, corFS) + j * (step.cor_tfs, step.cor_fs).
/// Throws InvalidParameter if any point leaves the parameter domain.
std::vector<SimParams> centred_grid(const SimParams& centre, const SimParams& step, std::size_t n_beta,
                                    std::size_t n_sigma, std::size_t n_corr_pairs);

struct LikelihoodOptions {
    /// When set, probabilities are floored at `floor` instead of yielding -inf.
    bool smoothing = false;
    double floor = 1e-12;
};

/// sum over cells and modes of R_m ln P_m, with shared FHV and FHV
/// unavailable. Throws InvalidInput if the demand reports modes outside
/// {taxi, transit, walk, drive}.
double stage1_loglik(const SimParams& params, const DemandSet& demand4,
                     const AttributeTable& attrs, const WageTable& wages,
                     const ProbabilityBackend& backend, const LikelihoodOptions& options = {});

/// sum over cells and modes of R_m ln(P_m / (P_taxi + P_fhv + P_sfhv)) with all
/// six modes available. A cell with a wage group uses that group's P; a cell
/// without one uses the mixture sum_w s_w P(w) over its origin's wage shares,
/// which is the likelihood of trips whose wage was never observed.
double stage2_loglik(const SimParams& params, const DemandSet& demand_tlc,
                     const AttributeTable& attrs, const WageTable& wages,
                     const WageDistribution& wage_dist, const ProbabilityBackend& backend,
                     const LikelihoodOptions& options = {});

/// Splits wage-less cells across wage groups in proportion to the origin
/// zone's wage distribution. Scoring the result with stage2_loglik gives the
/// per-wage alternative to the mixture likelihood.
DemandSet expand_by_wage(const DemandSet& demand, const WageDistribution& dist);

struct ParameterSample {
    SimParams params;
    double loglik_stage1 = 0.0;
    double loglik_stage2 = 0.0;
    double weight = 0.0;

    double joint() const noexcept { return loglik_stage1 + loglik_stage2; }
};

/// Stage 1 and 2 log-likelihoods for every sample, then posterior weights.
/// Stage 1 is computed once per distinct (beta, sigma).
std::vector<ParameterSample> evaluate_posterior(std::span<const SimParams> samples,
                                                const DemandSet& demand4,
                                                const DemandSet& demand_tlc,
                                                const AttributeTable& attrs,
                                                const WageTable& wages,
                                                const WageDistribution& wage_dist,
                                                const ProbabilityBackend& backend,
                                                const LikelihoodOptions& options = {});

/// weight_i = exp(L_i - logsumexp(L)); -inf maps to 0. Throws
/// DegeneratePosterior when every joint log-likelihood is -inf.
std::vector<ParameterSample> posterior_weights(std::vector<ParameterSample> samples);

struct WeightedStats {
    double mean = 0.0;
    double std = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
};

/// Weighted mean, population std and interpolated 2.5% / 97.5% weighted
/// quantiles. Weights must be a simplex aligned with values.
WeightedStats weighted_stats(std::span<const double> values, std::span<const double> weights);

/// Weighted quantile with midpoint interpolation of the weighted CDF.
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double q);

/// Highest joint log-likelihood; ties go to the lexicographically smallest
/// (beta, sigma, corTFS, corFS).
SimParams max_likelihood(std::span<const ParameterSample> samples);

}  // namespace modeshift
