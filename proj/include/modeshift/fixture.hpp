#pragma once

// Synthetic dataset whose ridership is drawn from the individual-choice model
// itself, so inference has a known ground truth to recover.

#include <cstdint>
#include <filesystem>
#include <string>

#include "modeshift/dataset.hpp"
#include "modeshift/mc_simulator.hpp"

namespace modeshift {

struct FixtureConfig {
    std::size_t n_zones = 12;
    std::size_t n_wage_groups = 4;
    SimParams true_params = kReferenceParams;
    std::uint64_t seed = 7;
    /// Borough holding roughly a third of the zones, the surcharge target.
    std::string target_borough = "Manhattan";
    /// Mean commuters per O-D pair before the distance decay.
    double base_volume = 1200.0;
    /// TLC trip population relative to the four-mode commuter population.
    double tlc_multiplier = 4.0;
    /// Walking is unavailable beyond this distance (miles).
    double max_walk_miles = 3.0;

    void validate() const;
};

/// Zones, wages, attribute surfaces and sampled demand. Deterministic in the
/// config; the manifest records the config and the generating parameters.
DatasetBundle gen_fixture(const FixtureConfig& config);

}  // namespace modeshift
