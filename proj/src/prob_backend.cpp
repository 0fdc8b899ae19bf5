#include "modeshift/prob_backend.hpp"

#include "modeshift/errors.hpp"
#include "modeshift/mc_simulator.hpp"

namespace modeshift {

McOracleBackend::McOracleBackend(std::size_t n_draws, std::uint64_t seed)
    : n_draws_(n_draws), seed_(seed) {
    if (n_draws == 0) throw InvalidInput("oracle backend needs at least one draw");
}

ChoiceProbs McOracleBackend::probs(const PerMode<double>& scaled_log_costs, double cor_tfs,
                                   double cor_fs) const {
    return estimate_probs_mc(scaled_log_costs, cor_tfs, cor_fs, n_draws_, seed_);
}

}  // namespace modeshift
