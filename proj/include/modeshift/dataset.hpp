#pragma once

// On-disk dataset bundle: a directory of CSV tables plus an optional
// manifest.json.
//
//   zones.csv       zone_id,borough,name
//   wages.csv       wage_group,hourly_wage_usd
//   wage_dist.csv   zone_id,wage_group,share
//   demand4.csv     origin,destination,wage_group,trips_taxi,trips_transit,trips_walk,trips_drive
//   demand_tlc.csv  origin,destination,trips_taxi,trips_fhv,trips_sfhv
//   attrs.csv       origin,destination,mode,time_mean_hr,time_std_hr,cost_mean_usd,cost_std_usd,distance_miles
//
// Inputs are assumed to be filtered to commute hours upstream.

#include <filesystem>

#include <json.hpp>

#include "modeshift/model_core.hpp"

namespace modeshift {

struct DatasetBundle {
    ZoneIndex zones;
    WageTable wages;
    WageDistribution wage_dist;
    DemandSet demand4;     // taxi, transit, walk, drive; per wage group
    DemandSet demand_tlc;  // taxi, fhv, sfhv; no wage dimension
    AttributeTable attrs;
    nlohmann::json manifest;  // null when absent
};

/// Parses and validates every table. Throws MissingFile, SchemaMismatch,
/// DanglingKey or NegativeValue with a file:line prefix.
DatasetBundle load_bundle(const std::filesystem::path& dir);

/// Writes the canonical form: zones, wages, distributions and attributes in
/// key order, demand in stored order, attributes with all six modes per pair.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// Referential integrity and value checks on an in-memory bundle.
void validate_bundle(const DatasetBundle& bundle);

/// The stage-2 demand split across wage groups by origin wage shares.
DemandSet tlc_by_wage(const DatasetBundle& bundle);

}  // namespace modeshift
