#pragma once

// Run configuration shared by every CLI subcommand. The resolved config is
// logged as JSON on each run; feeding it back through --config reproduces the
// run.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "modeshift/impact.hpp"
#include "modeshift/inference.hpp"
#include "modeshift/surrogate.hpp"

namespace modeshift {

struct SurrogateConfig {
    std::size_t samples = 50000;
    std::size_t oracle_draws = 4000;
    std::size_t validation_points = 1000;
    std::size_t validation_draws = 20000;
    TrainConfig train;
};

struct RunConfig {
    std::uint64_t seed = 20190601;
    std::size_t n_beta = 10;
    std::size_t n_sigma = 10;
    std::size_t n_corr_pairs = 10;
    std::size_t n_reps = 400;
    std::size_t oracle_draws = 4000;  // MC backend used for inference
    bool smoothing = false;
    double smoothing_floor = 1e-12;
    /// Posterior samples whose cumulative weight falls below this tail are not
    /// simulated by `impact`.
    double prune_tail = 1e-6;
    SurrogateConfig surrogate;
    ImpactConstants constants;

    void validate() const;
    PriorSpec prior() const;
    LikelihoodOptions likelihood() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Starts from `base` and overrides the keys present. Unknown keys and
/// ill-typed values throw InvalidInput.
RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});

/// 16 hex digits of FNV-1a over the compact JSON dump.
std::string config_digest(const nlohmann::json& j);

nlohmann::json to_json(const Scenario& scenario);
/// {"name", "remove": [modes], "surcharges": {mode: amount}, "origin_borough"}
Scenario scenario_from_json(const nlohmann::json& j);

/// A reference/intervention pair. A file holding a single scenario pairs it
/// with the empty reference scenario; {"A": ..., "B": ...} sets both.
struct ScenarioPair {
    std::string name;
    Scenario a;
    Scenario b;
};

ScenarioPair load_scenario_pair(const std::filesystem::path& path);
/// "no-sfhv" or "surcharge" against the unchanged baseline.
ScenarioPair preset_scenario_pair(std::string_view name);

}  // namespace modeshift
