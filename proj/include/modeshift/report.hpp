#pragma once

// Result files: posterior tables, impact reports (JSON) and the per-scope CSV
// tables derived from them.
//
// report.json:
//   {"scenario", "config_digest", "modes": [...], "metrics": [...],
//    "citywide": {metric: {"mean", "std", "ci95": [lo, hi]}},
//    "per_zone": [{"zone", "metrics": {...}}], "per_wage": [{"wage_group", "metrics": {...}}],
//    "shift_matrix": [[...] x6] x6, ...}
// Undefined statistics (a percentage over a zero baseline) are null.

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "modeshift/impact.hpp"
#include "modeshift/inference.hpp"

namespace modeshift {

/// beta,sigma,corTFS,corFS,loglik1,loglik2,weight
void write_posterior_csv(const std::filesystem::path& path, std::span<const ParameterSample> samples);
std::vector<ParameterSample> read_posterior_csv(const std::filesystem::path& path);

nlohmann::json report_to_json(const ImpactReport& report, const std::string& config_digest);

/// Structural check mirroring schemas/report.schema.json. Throws SchemaMismatch
/// naming the offending path.
void validate_report_json(const nlohmann::json& report);

/// citywide.csv, per_zone.csv, per_wage.csv (scope,metric,mean,std,ci95_low,ci95_high)
/// and shift_matrix.csv (from_mode,<six modes>).
void write_report_csv(const nlohmann::json& report, const std::filesystem::path& dir);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace modeshift
