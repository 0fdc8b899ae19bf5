#pragma once

// Domain types shared by every module: modes, zones, wage groups, per-mode
// attribute rows, demand cells and intervention scenarios.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modeshift {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Mode : std::uint8_t { taxi = 0, transit, walk, drive, fhv, sfhv };

inline constexpr std::size_t kNumModes = 6;

inline constexpr std::array<Mode, kNumModes> kAllModes{
    Mode::taxi, Mode::transit, Mode::walk, Mode::drive, Mode::fhv, Mode::sfhv};

template <typename T>
using PerMode = std::array<T, kNumModes>;

constexpr std::size_t idx(Mode m) noexcept { return static_cast<std::size_t>(m); }

std::string_view mode_name(Mode m) noexcept;
std::optional<Mode> parse_mode(std::string_view name) noexcept;

/// Small value-type bit set over the six modes, iterated in canonical order.
class ModeSet {
public:
    constexpr ModeSet() = default;
    constexpr ModeSet(std::initializer_list<Mode> modes) {
        for (Mode m : modes) insert(m);
    }

    static constexpr ModeSet all() { return from_bits(0x3F); }
    static constexpr ModeSet four_mode() {
        return {Mode::taxi, Mode::transit, Mode::walk, Mode::drive};
    }
    /// {taxi, fhv, sfhv}
    static constexpr ModeSet taxi_nest() { return {Mode::taxi, Mode::fhv, Mode::sfhv}; }
    static constexpr ModeSet from_bits(std::uint8_t bits) {
        ModeSet s;
        s.bits_ = bits & 0x3F;
        return s;
    }

    constexpr bool contains(Mode m) const noexcept { return (bits_ >> idx(m)) & 1u; }
    constexpr void insert(Mode m) noexcept { bits_ |= static_cast<std::uint8_t>(1u << idx(m)); }
    constexpr void erase(Mode m) noexcept { bits_ &= static_cast<std::uint8_t>(~(1u << idx(m))); }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr std::size_t size() const noexcept {
        std::size_t n = 0;
        for (std::uint8_t b = bits_; b; b &= static_cast<std::uint8_t>(b - 1)) ++n;
        return n;
    }
    constexpr std::uint8_t bits() const noexcept { return bits_; }
    constexpr bool subset_of(ModeSet other) const noexcept { return (bits_ & ~other.bits_) == 0; }

    constexpr ModeSet operator|(ModeSet o) const noexcept { return from_bits(bits_ | o.bits_); }
    constexpr ModeSet operator&(ModeSet o) const noexcept { return from_bits(bits_ & o.bits_); }
    constexpr bool operator==(const ModeSet&) const = default;

    std::vector<Mode> modes() const;

private:
    std::uint8_t bits_ = 0;
};

struct Zone {
    std::string id;
    std::string borough;
    std::string name;
};

using ZoneIndex = std::map<std::string, Zone>;

struct WageGroup {
    std::string id;
    double hourly_wage = 0.0;  // currency per hour
};

using WageTable = std::map<std::string, WageGroup>;

/// Share of commuters per wage group, per origin zone (shares sum to 1).
using WageDistribution = std::map<std::string, std::map<std::string, double>>;

/// Travel time (hours), monetary cost and driving distance (miles) of one mode
/// on one O-D pair. An unavailable mode has infinite time, cost and distance.
struct ModeAttributes {
    double time_mean = kInf;
    double time_std = 0.0;
    double cost_mean = kInf;
    double cost_std = 0.0;
    double distance = kInf;

    static constexpr ModeAttributes unavailable() noexcept { return {}; }
    bool available() const noexcept { return time_mean != kInf; }
    /// Throws InvalidInput if the fields break the availability/sign invariants.
    void validate() const;

    bool operator==(const ModeAttributes&) const = default;
};

struct OdPair {
    std::string origin;
    std::string destination;

    auto operator<=>(const OdPair&) const = default;
};

using AttributeRow = PerMode<ModeAttributes>;
/// Attributes of all six modes per O-D pair; modes default to unavailable.
using AttributeTable = std::map<OdPair, AttributeRow>;

AttributeRow unavailable_row() noexcept;

struct DemandCell {
    std::string origin;
    std::string destination;
    std::string wage_group;  // empty when the source carries no wage dimension
    PerMode<double> trips{};

    double total() const noexcept;
    bool operator==(const DemandCell&) const = default;
};

/// Demand cells together with the mode universe the source reports on.
struct DemandSet {
    ModeSet modes;
    std::vector<DemandCell> cells;
};

/// Counterfactual transform of an attribute table.
struct Scenario {
    std::string name;
    ModeSet removed_modes;
    PerMode<double> surcharges{};
    std::optional<std::string> surcharge_origin_borough;

    bool has_surcharge() const noexcept;
    void validate() const;
};

/// g = beta * wage * time + cost, +inf when the mode is unavailable.
/// Overrides replace the mean time/cost (used when resampling attributes).
double generalized_cost(const ModeAttributes& attrs, double wage, double beta,
                        std::optional<double> time_override = std::nullopt,
                        std::optional<double> cost_override = std::nullopt);

/// Generalized costs of all six modes for one attribute row.
PerMode<double> generalized_costs(const AttributeRow& row, double wage, double beta);

/// Removed modes become unavailable; surcharges add to cost_mean on rows whose
/// origin borough matches the filter (all rows when there is no filter).
/// Removal wins over surcharge. The input table is not modified.
AttributeTable apply_scenario(const AttributeTable& table, const ZoneIndex& zones,
                              const Scenario& scenario);

/// Union of removals, sum of surcharges. Throws InvalidInput when both carry
/// surcharges under different origin filters.
Scenario merge_scenarios(const Scenario& first, const Scenario& second);

namespace presets {

inline constexpr double kSfhvOccupancy = 2.0;

/// Removes shared FHV.
Scenario no_sfhv();

/// Taxi $2.50, FHV $2.75, shared FHV $0.75 per passenger times occupancy,
/// for trips originating in `borough`.
Scenario congestion_surcharge(std::string borough = "Manhattan",
                              double sfhv_occupancy = kSfhvOccupancy);

}  // namespace presets

/// Hourly wage for an annual income bracket: bracket midpoint over 2080 hours.
double hourly_wage_from_bracket(double annual_low, double annual_high);

}  // namespace modeshift
