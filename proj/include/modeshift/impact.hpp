#pragma once

// Paired-scenario simulation over a weighted parameter set and translation of
// the resulting mode shift into time, mileage, fuel, CO2 and revenue impacts.
//
// Scenario A is the reference world and scenario B the intervention; every
// delta is B minus A. Both scenarios see the same preference draws, so
// identical scenarios produce exactly zero deltas.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modeshift/inference.hpp"
#include "modeshift/mc_simulator.hpp"
#include "modeshift/model_core.hpp"

namespace modeshift {

struct ImpactConstants {
    double miles_per_gallon = 20.0;
    double co2_kg_per_gallon = 8.0;
    double transit_fare = 2.75;
    double sfhv_occupancy = 2.0;

    void validate() const;
};

enum class Metric : std::uint8_t {
    delta_time_hours = 0,
    delta_time_pct,
    delta_miles,
    delta_miles_pct,
    fuel_gallons,
    co2_kg,
    time_cost_value,
    transit_revenue_delta,
    taxi_revenue_delta,
    fhv_revenue_delta,
};

inline constexpr std::size_t kNumMetrics = 10;

std::string_view metric_name(Metric m) noexcept;
std::string_view metric_name(std::size_t i) noexcept;

using ImpactVector = std::array<double, kNumMetrics>;

/// Additive accumulators; percentages and fuel are derived from these.
struct ImpactTotals {
    double baseline_time_hours = 0.0;
    double delta_time_hours = 0.0;
    double baseline_miles = 0.0;
    double delta_miles = 0.0;
    double time_cost_value = 0.0;
    double transit_revenue_delta = 0.0;
    double taxi_revenue_delta = 0.0;
    double fhv_revenue_delta = 0.0;

    ImpactTotals& operator+=(const ImpactTotals& o) noexcept;
    bool operator==(const ImpactTotals&) const = default;
};

/// Percentages are in percent of the scenario-A total. A zero delta on a
/// zero baseline gives 0; a nonzero delta on a zero baseline gives NaN.
ImpactVector impact_metrics(const ImpactTotals& totals, const ImpactConstants& constants);

/// Vehicle-miles one trip on `mode` puts on the road: full distance for drive,
/// taxi and FHV, distance / occupancy for shared FHV, none for walk and transit.
double vehicle_miles(Mode mode, const ModeAttributes& attrs, const ImpactConstants& constants);

struct CellShift {
    OdPair od;
    std::string wage_group;
    ShiftMatrix shift;
};

/// Sums the impacts of every (A-mode, B-mode) flow. Fares come from the
/// attribute tables of each scenario, so surcharges show up as revenue.
/// Throws ConsistencyError when a mode carrying trips has infinite attributes.
ImpactTotals translate_impacts(std::span<const CellShift> cells, const AttributeTable& attrs_a,
                               const AttributeTable& attrs_b, const WageTable& wages,
                               const ImpactConstants& constants);

/// Shares of the trips leaving `from` under scenario B, over destination
/// modes other than `from`. Throws UndefinedMetric when no trips leave.
PerMode<double> shift_shares(const ShiftMatrix& matrix, Mode from);

struct ScopeTotals {
    ShiftMatrix shift;
    ImpactTotals totals;
};

/// One parameter sample's simulated outcome at every scope.
struct SampleOutcome {
    ScopeTotals citywide;
    std::map<std::string, ScopeTotals> per_zone;  // keyed by origin zone
    std::map<std::string, ScopeTotals> per_wage;
};

struct ScenarioInputs {
    const DemandSet* demand = nullptr;
    const AttributeTable* attrs = nullptr;
    const ZoneIndex* zones = nullptr;
    const WageTable* wages = nullptr;
};

/// For every sample and demand cell, simulate_cell with n_reps paired draws.
/// Draws are keyed by (seed, cell index, sample index), so results do not
/// depend on thread count.
std::vector<SampleOutcome> run_scenario(const ScenarioInputs& inputs, const Scenario& scenario_a,
                                        const Scenario& scenario_b,
                                        std::span<const ParameterSample> posterior,
                                        std::size_t n_reps, std::uint64_t seed,
                                        const ImpactConstants& constants = {});

struct ScopeReport {
    std::string key;  // "citywide", a zone id or a wage group id
    std::array<WeightedStats, kNumMetrics> metrics{};
};

struct ImpactReport {
    std::string scenario;
    ScopeReport citywide;
    std::vector<ScopeReport> per_zone;
    std::vector<ScopeReport> per_wage;
    Matrix6 shift_matrix{};  // posterior-weighted mean
};

/// Weighted statistics per metric and scope. A metric that is NaN for any
/// sample with positive weight reports NaN throughout.
ImpactReport aggregate_posterior(std::span<const SampleOutcome> outcomes,
                                 std::span<const double> weights,
                                 const ImpactConstants& constants);

struct DataUncertainty {
    PerMode<double> mean{};
    PerMode<double> std{};  // sample standard deviation across resamples
    std::size_t n_resamples = 0;
};

/// Resamples every available attribute from a normal truncated at 0, reruns
/// the single-scenario choice simulation over demand.modes and reports the
/// spread of per-mode trip totals. Preference draws are shared across
/// resamples, so attribute noise is the only source of variation.
DataUncertainty data_uncertainty(const DemandSet& demand, const AttributeTable& attrs,
                                 const WageTable& wages, const SimParams& params,
                                 std::size_t n_resamples, std::size_t n_reps,
                                 std::uint64_t seed);

}  // namespace modeshift
