#pragma once

#include <cstdint>
#include <string>

#include "modeshift/closed_form.hpp"

namespace modeshift {

/// Source of six-mode choice probabilities for the individual-choice model.
/// Inputs are scaled log costs ln(g_m)/sigma with +inf for unavailable modes;
/// outputs are simplices with exact zeros on unavailable modes.
/// Implementations must be safe to call concurrently.
class ProbabilityBackend {
public:
    virtual ~ProbabilityBackend() = default;
    virtual ChoiceProbs probs(const PerMode<double>& scaled_log_costs, double cor_tfs,
                              double cor_fs) const = 0;
    virtual std::string name() const = 0;
};

/// Monte Carlo ground truth. Every call reuses the same seed, so all
/// evaluations share one set of noise draws.
class McOracleBackend final : public ProbabilityBackend {
public:
    McOracleBackend(std::size_t n_draws, std::uint64_t seed);

    ChoiceProbs probs(const PerMode<double>& scaled_log_costs, double cor_tfs,
                      double cor_fs) const override;
    std::string name() const override { return "mc-oracle"; }

private:
    std::size_t n_draws_;
    std::uint64_t seed_;
};

}  // namespace modeshift
