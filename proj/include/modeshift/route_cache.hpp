#pragma once

// Ingestion of cached routing responses. Each JSON document describes one
// (origin, destination, mode) and carries repeated observations:
//
//   {"origin": "z01", "destination": "z02", "mode": "taxi",
//    "observations": [{"duration_seconds": 600, "cost": 12.5, "distance_miles": 2.1}, ...]}
//
// Documents for the same key are pooled, so repeated retrievals are averaged.

#include <filesystem>
#include <string>
#include <vector>

#include "modeshift/model_core.hpp"

namespace modeshift {

struct RouteCacheResult {
    AttributeTable fragment;  // modes without observations stay unavailable
    std::size_t documents_read = 0;
    std::size_t documents_skipped = 0;
    std::vector<std::string> warnings;
};

/// Reads every *.json file in `dir` (sorted by name). Malformed documents are
/// skipped with a warning; keys with zero observations are omitted. Times are
/// converted to hours; stds use the n - 1 sample formula (0 for one
/// observation).
RouteCacheResult ingest_route_cache(const std::filesystem::path& dir);

}  // namespace modeshift
