#pragma once

// Individual-choice Monte Carlo engine. Each traveller picks the mode that
// minimizes ln(g_m) + eps_m, where g is the generalized cost and eps is a
// correlated normal preference draw with covariance sigma^2 * C. Taxi, FHV and
// shared FHV noise is correlated (corTFS between taxi and either FHV mode,
// corFS between the two FHV modes); the other modes are independent.

#include <array>
#include <cstdint>
#include <utility>

#include "modeshift/closed_form.hpp"
#include "modeshift/model_core.hpp"
#include "modeshift/rng.hpp"

namespace modeshift {

struct SimParams {
    double beta = 1.0;
    double sigma = 0.0;
    double cor_tfs = 0.0;
    double cor_fs = 0.0;

    /// beta > 0, sigma >= 0, correlations in [0, 1] with corFS > corTFS
    /// (or both zero). Throws InvalidParameter.
    void validate() const;

    bool operator==(const SimParams&) const = default;
};

/// Reference parameter values used to generate the fixture, shipped as a named preset.
inline constexpr SimParams kReferenceParams{0.71, 0.38, 0.31, 0.58};

using Matrix6 = std::array<std::array<double, kNumModes>, kNumModes>;

/// Unit-diagonal correlation matrix of the preference noise.
Matrix6 correlation_matrix(double cor_tfs, double cor_fs);
Matrix6 correlation_matrix(const SimParams& params);

/// Lower-triangular L with L * L^T = c. Positive semidefinite input is
/// accepted (zero pivots give zero columns); throws InvalidParameter if the
/// matrix is not PSD.
Matrix6 cholesky_lower(const Matrix6& c);

using EpsilonDraw = PerMode<double>;

/// Precomputed sampler for sigma * L * z, z ~ N(0, I).
class NoiseModel {
public:
    NoiseModel(double sigma, double cor_tfs, double cor_fs);
    explicit NoiseModel(const SimParams& params)
        : NoiseModel(params.sigma, params.cor_tfs, params.cor_fs) {}

    EpsilonDraw draw(RngStream& rng) const;
    double sigma() const noexcept { return sigma_; }

private:
    double sigma_;
    Matrix6 factor_;
};

EpsilonDraw draw_epsilon(const SimParams& params, RngStream& rng);

/// argmin over available modes with finite cost of ln(g_m) + eps_m; ties go to
/// the lower canonical index. Throws NoAvailableMode.
Mode choose(const PerMode<double>& gen_costs, const EpsilonDraw& eps,
            ModeSet available = ModeSet::all());

/// Same decision rule on precomputed log costs (+inf = unavailable).
Mode choose_log(const PerMode<double>& log_costs, const EpsilonDraw& eps);

/// Element-wise ln g, keeping +inf for unavailable modes.
PerMode<double> log_costs(const PerMode<double>& gen_costs);

/// Empirical choice frequencies with unit-variance correlated noise; inputs
/// are ln(g_m)/sigma with +inf for unavailable modes.
ChoiceProbs estimate_probs_mc(const PerMode<double>& scaled_log_costs, double cor_tfs,
                              double cor_fs, std::size_t n_draws, std::uint64_t seed);

/// One preference draw, two choices (common random numbers).
std::pair<Mode, Mode> simulate_pair(const PerMode<double>& gen_costs_a,
                                    const PerMode<double>& gen_costs_b, const SimParams& params,
                                    RngStream& rng);

/// counts[a][b]: trips choosing a under scenario A and b under scenario B.
struct ShiftMatrix {
    Matrix6 counts{};

    double total() const noexcept;
    double row_total(Mode from) const noexcept;
    double col_total(Mode to) const noexcept;
    ShiftMatrix& operator+=(const ShiftMatrix& other) noexcept;
    bool operator==(const ShiftMatrix&) const = default;
};

/// n_reps paired draws, scaled so the matrix sums to total_trips.
ShiftMatrix simulate_cell(double total_trips, const PerMode<double>& gen_costs_a,
                          const PerMode<double>& gen_costs_b, const SimParams& params,
                          std::size_t n_reps, RngStream& rng);

}  // namespace modeshift
