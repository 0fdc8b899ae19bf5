#include "modeshift/mc_simulator.hpp"

#include <cmath>

#include "modeshift/errors.hpp"

namespace modeshift {

namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void SimParams::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidParameter("beta must be positive");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidParameter("sigma must be >= 0");
    if (!in_unit(cor_tfs) || !in_unit(cor_fs)) {
        throw InvalidParameter("correlations must lie in [0, 1]");
    }
    const bool both_zero = cor_tfs == 0.0 && cor_fs == 0.0;
    if (!both_zero && !(cor_fs > cor_tfs)) {
        throw InvalidParameter("corFS must exceed corTFS (or both be zero)");
    }
}

Matrix6 correlation_matrix(double cor_tfs, double cor_fs) {
    Matrix6 c{};
    for (std::size_t i = 0; i < kNumModes; ++i) c[i][i] = 1.0;
    const std::size_t t = idx(Mode::taxi);
    const std::size_t f = idx(Mode::fhv);
    const std::size_t s = idx(Mode::sfhv);
    c[t][f] = c[f][t] = cor_tfs;
    c[t][s] = c[s][t] = cor_tfs;
    c[f][s] = c[s][f] = cor_fs;
    return c;
}

Matrix6 correlation_matrix(const SimParams& params) {
    params.validate();
    return correlation_matrix(params.cor_tfs, params.cor_fs);
}

Matrix6 cholesky_lower(const Matrix6& c) {
    constexpr double kTol = 1e-12;
    Matrix6 l{};
    for (std::size_t j = 0; j < kNumModes; ++j) {
        double d = c[j][j];
        for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
        if (d < -kTol) throw InvalidParameter("correlation matrix is not positive semidefinite");
        if (d <= kTol) {
            // Zero pivot: the column must vanish for a consistent PSD matrix.
            for (std::size_t i = j + 1; i < kNumModes; ++i) {
                double r = c[i][j];
                for (std::size_t k = 0; k < j; ++k) r -= l[i][k] * l[j][k];
                if (std::abs(r) > 1e-9) {
                    throw InvalidParameter("correlation matrix is not positive semidefinite");
                }
            }
            continue;
        }
        const double ljj = std::sqrt(d);
        l[j][j] = ljj;
        for (std::size_t i = j + 1; i < kNumModes; ++i) {
            double r = c[i][j];
            for (std::size_t k = 0; k < j; ++k) r -= l[i][k] * l[j][k];
            l[i][j] = r / ljj;
        }
    }
    return l;
}

NoiseModel::NoiseModel(double sigma, double cor_tfs, double cor_fs)
    : sigma_(sigma), factor_(cholesky_lower(correlation_matrix(cor_tfs, cor_fs))) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidParameter("sigma must be >= 0");
}

EpsilonDraw NoiseModel::draw(RngStream& rng) const {
    EpsilonDraw eps{};
    if (sigma_ == 0.0) return eps;
    PerMode<double> z{};
    for (double& v : z) v = rng.normal();
    for (std::size_t i = 0; i < kNumModes; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k <= i; ++k) acc += factor_[i][k] * z[k];
        eps[i] = sigma_ * acc;
    }
    return eps;
}

EpsilonDraw draw_epsilon(const SimParams& params, RngStream& rng) {
    params.validate();
    return NoiseModel(params).draw(rng);
}

PerMode<double> log_costs(const PerMode<double>& gen_costs) {
    PerMode<double> out{};
    for (std::size_t i = 0; i < kNumModes; ++i) {
        const double g = gen_costs[i];
        if (std::isnan(g) || g < 0.0) throw InvalidCost("generalized costs must be nonnegative");
        out[i] = g == kInf ? kInf : std::log(g);
    }
    return out;
}

Mode choose_log(const PerMode<double>& lc, const EpsilonDraw& eps) {
    std::size_t best = kNumModes;
    double best_u = kInf;
    for (std::size_t i = 0; i < kNumModes; ++i) {
        if (lc[i] == kInf) continue;
        const double u = lc[i] + eps[i];
        if (best == kNumModes || u < best_u) {
            best = i;
            best_u = u;
        }
    }
    if (best == kNumModes) throw NoAvailableMode("no available mode with finite cost");
    return kAllModes[best];
}

Mode choose(const PerMode<double>& gen_costs, const EpsilonDraw& eps, ModeSet available) {
    PerMode<double> lc = log_costs(gen_costs);
    for (Mode m : kAllModes) {
        if (!available.contains(m)) lc[idx(m)] = kInf;
    }
    return choose_log(lc, eps);
}

ChoiceProbs estimate_probs_mc(const PerMode<double>& scaled_log_costs, double cor_tfs,
                              double cor_fs, std::size_t n_draws, std::uint64_t seed) {
    if (n_draws == 0) throw InvalidInput("estimate_probs_mc needs at least one draw");
    for (double x : scaled_log_costs) {
        if (std::isnan(x) || x == -kInf) throw InvalidCost("scaled log costs must be > -inf");
    }
    const NoiseModel noise(1.0, cor_tfs, cor_fs);
    RngStream rng(seed);
    PerMode<std::size_t> counts{};
    for (std::size_t r = 0; r < n_draws; ++r) {
        ++counts[idx(choose_log(scaled_log_costs, noise.draw(rng)))];
    }
    ChoiceProbs p{};
    for (std::size_t i = 0; i < kNumModes; ++i) {
        p[i] = static_cast<double>(counts[i]) / static_cast<double>(n_draws);
    }
    return p;
}

std::pair<Mode, Mode> simulate_pair(const PerMode<double>& gen_costs_a,
                                    const PerMode<double>& gen_costs_b, const SimParams& params,
                                    RngStream& rng) {
    const EpsilonDraw eps = draw_epsilon(params, rng);
    return {choose(gen_costs_a, eps), choose(gen_costs_b, eps)};
}

double ShiftMatrix::total() const noexcept {
    double s = 0.0;
    for (const auto& row : counts) {
        for (double v : row) s += v;
    }
    return s;
}

double ShiftMatrix::row_total(Mode from) const noexcept {
    double s = 0.0;
    for (double v : counts[idx(from)]) s += v;
    return s;
}

double ShiftMatrix::col_total(Mode to) const noexcept {
    double s = 0.0;
    for (const auto& row : counts) s += row[idx(to)];
    return s;
}

ShiftMatrix& ShiftMatrix::operator+=(const ShiftMatrix& other) noexcept {
    for (std::size_t a = 0; a < kNumModes; ++a) {
        for (std::size_t b = 0; b < kNumModes; ++b) counts[a][b] += other.counts[a][b];
    }
    return *this;
}

ShiftMatrix simulate_cell(double total_trips, const PerMode<double>& gen_costs_a,
                          const PerMode<double>& gen_costs_b, const SimParams& params,
                          std::size_t n_reps, RngStream& rng) {
    if (n_reps == 0) throw InvalidInput("simulate_cell needs n_reps >= 1");
    if (!(total_trips >= 0.0) || !std::isfinite(total_trips)) {
        throw InvalidInput("trip count must be finite and nonnegative");
    }
    params.validate();
    const NoiseModel noise(params);
    const PerMode<double> lc_a = log_costs(gen_costs_a);
    const PerMode<double> lc_b = log_costs(gen_costs_b);
    std::array<std::array<std::size_t, kNumModes>, kNumModes> hits{};
    for (std::size_t r = 0; r < n_reps; ++r) {
        const EpsilonDraw eps = noise.draw(rng);
        ++hits[idx(choose_log(lc_a, eps))][idx(choose_log(lc_b, eps))];
    }
    ShiftMatrix m;
    const double n = static_cast<double>(n_reps);
    for (std::size_t a = 0; a < kNumModes; ++a) {
        for (std::size_t b = 0; b < kNumModes; ++b) {
            m.counts[a][b] = static_cast<double>(hits[a][b]) * total_trips / n;
        }
    }
    return m;
}

}  // namespace modeshift
