#pragma once

// Closed-form discrete-choice models (additive MNL, log-utility MNL, nested
// logit) and grid-search fitting against observed O-D ridership.

#include <span>
#include <string>
#include <vector>

#include "modeshift/model_core.hpp"

namespace modeshift {

/// Probability per mode; unavailable modes carry exactly 0.
using ChoiceProbs = PerMode<double>;

struct ClosedFormParams {
    double lambda = 1.0;
    double beta = 1.0;
    double tau_taxi_fhv = 1.0;
    double tau_fhv = 1.0;

    bool operator==(const ClosedFormParams&) const = default;
};

enum class ModelKind { mnl, logmnl, nested };

std::string_view model_kind_name(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

/// Two-level nest tree: `outer` is scaled by tau_taxi_fhv, `inner` (a subset
/// of outer, possibly empty) by tau_fhv. Every other mode is a singleton.
struct NestSpec {
    ModeSet outer = ModeSet::taxi_nest();
    ModeSet inner = {Mode::fhv, Mode::sfhv};
};

/// P_m proportional to exp(-lambda * g_m) over modes with finite cost.
ChoiceProbs mnl_probs(const PerMode<double>& gen_costs, double lambda);

/// P_m proportional to g_m^(-lambda) over modes with finite cost.
ChoiceProbs logmnl_probs(const PerMode<double>& gen_costs, double lambda);

/// Nested logit on V_j = -lambda * g_j. Within a nest P(j|k) = exp(V_j/tau_k - IV_k)
/// with IV_k = ln sum exp(V_l/tau_k); a nest enters its parent level with
/// utility tau_k * IV_k. tau = 1 everywhere reduces to mnl_probs.
ChoiceProbs nested_probs(const PerMode<double>& gen_costs, const ClosedFormParams& params,
                         const NestSpec& nests = {});

/// Same as nested_probs but on raw utilities V (no lambda, no costs); -inf marks
/// an unavailable mode. Shared by the surrogate's closed-form offset.
ChoiceProbs nested_probs_from_utilities(const PerMode<double>& utilities, double tau_outer,
                                        double tau_inner, const NestSpec& nests = {});

ChoiceProbs model_probs(ModelKind kind, const PerMode<double>& gen_costs,
                        const ClosedFormParams& params, const NestSpec& nests = {});

/// Expected trips per cell: cell total times model probability, restricted to
/// the demand set's mode universe. Output is aligned with demand.cells.
std::vector<PerMode<double>> predict_table(const DemandSet& demand, const AttributeTable& attrs,
                                           const WageTable& wages, const ClosedFormParams& params,
                                           ModelKind kind, const NestSpec& nests = {});

/// Observed trips as a table aligned with demand.cells.
std::vector<PerMode<double>> observed_table(const DemandSet& demand);

/// Trip-weighted RMSE over (cell, mode) entries for modes in `modes`; each
/// entry is weighted by its cell's observed total.
double wrmse(std::span<const PerMode<double>> pred, std::span<const PerMode<double>> obs,
             ModeSet modes);

/// 1 - SS_res / SS_tot over aggregated per-mode totals.
double r_squared(std::span<const double> pred_totals, std::span<const double> obs_totals);

/// Per-mode sums over a table.
PerMode<double> mode_totals(std::span<const PerMode<double>> table);

/// Linearly spaced axis; steps == 1 yields {lo}.
struct GridAxis {
    double lo = 1.0;
    double hi = 1.0;
    std::size_t steps = 1;

    std::vector<double> values() const;
};

struct GridSpec {
    GridAxis lambda;
    GridAxis beta;
    GridAxis tau_taxi_fhv;  // nested only
    GridAxis tau_fhv;       // nested only

    /// "lambda=0.01:0.2:20,beta=0.2:2:10,..." ; unspecified axes keep defaults.
    static GridSpec parse(std::string_view text, const GridSpec& defaults);
    static GridSpec defaults_for(ModelKind kind);
};

struct GridPoint {
    ClosedFormParams params;
    double wrmse = 0.0;
};

struct FitResult {
    ClosedFormParams best;
    double best_wrmse = 0.0;
    std::vector<GridPoint> trace;  // in grid enumeration order
};

/// Exhaustive grid search minimizing WRMSE over every demand set supplied.
/// Ties go to the lexicographically smallest (lambda, beta, tau_taxi_fhv, tau_fhv).
FitResult fit_grid(std::span<const DemandSet> demand, const AttributeTable& attrs,
                   const WageTable& wages, ModelKind kind, const GridSpec& grid,
                   const NestSpec& nests = {});

}  // namespace modeshift
