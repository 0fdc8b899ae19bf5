#include "modeshift/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "modeshift/csv.hpp"
#include "modeshift/errors.hpp"
#include "modeshift/inference.hpp"

namespace modeshift {

namespace fs = std::filesystem;

namespace {

constexpr std::array<Mode, 4> kDemand4Modes{Mode::taxi, Mode::transit, Mode::walk, Mode::drive};
constexpr std::array<Mode, 3> kTlcModes{Mode::taxi, Mode::fhv, Mode::sfhv};

double nonnegative(const CsvTable& t, std::size_t row, std::size_t col) {
    const std::string where = t.where(row) + " (" + t.header[col] + ")";
    const double v = parse_number(t.rows[row][col], where);
    if (v < 0.0) throw NegativeValue(where + ": negative value " + t.rows[row][col]);
    return v;
}

void need_zone(const ZoneIndex& zones, const std::string& id, const std::string& where) {
    if (!zones.contains(id)) throw DanglingKey(where + ": unknown zone '" + id + "'");
}

void check_wage_shares(const WageDistribution& dist, const std::string& source) {
    for (const auto& [zone, shares] : dist) {
        double sum = 0.0;
        for (const auto& [group, s] : shares) sum += s;
        if (std::abs(sum - 1.0) > 1e-9) {
            throw SchemaMismatch(source + ": wage shares of zone '" + zone + "' sum to " +
                                 format_number(sum) + ", not 1");
        }
    }
}

void check_cross_references(const DatasetBundle& b) {
    for (const DemandSet* d : {&b.demand4, &b.demand_tlc}) {
        for (const DemandCell& c : d->cells) {
            if (!b.attrs.contains(OdPair{c.origin, c.destination})) {
                throw DanglingKey("demand " + c.origin + "->" + c.destination +
                                  " has no attribute rows in attrs.csv");
            }
        }
    }
    for (const DemandCell& c : b.demand_tlc.cells) {
        if (!b.wage_dist.contains(c.origin)) {
            throw DanglingKey("demand_tlc origin '" + c.origin +
                              "' has no wage distribution in wage_dist.csv");
        }
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingFile("cannot write " + path.string());
    out << text;
}

}  // namespace

DatasetBundle load_bundle(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw MissingFile("not a directory: " + dir.string());
    DatasetBundle b;

    const CsvTable zones = read_csv(dir / "zones.csv");
    expect_header(zones, {"zone_id", "borough", "name"});
    for (std::size_t i = 0; i < zones.rows.size(); ++i) {
        const auto& r = zones.rows[i];
        if (r[0].empty()) throw SchemaMismatch(zones.where(i) + ": empty zone_id");
        if (r[1].empty()) throw SchemaMismatch(zones.where(i) + ": empty borough");
        if (!b.zones.emplace(r[0], Zone{r[0], r[1], r[2]}).second) {
            throw SchemaMismatch(zones.where(i) + ": duplicate zone_id '" + r[0] + "'");
        }
    }

    const CsvTable wages = read_csv(dir / "wages.csv");
    expect_header(wages, {"wage_group", "hourly_wage_usd"});
    for (std::size_t i = 0; i < wages.rows.size(); ++i) {
        const auto& r = wages.rows[i];
        const double w = nonnegative(wages, i, 1);
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw NegativeValue(wages.where(i) + ": hourly wage must be positive and finite");
        }
        if (!b.wages.emplace(r[0], WageGroup{r[0], w}).second) {
            throw SchemaMismatch(wages.where(i) + ": duplicate wage_group '" + r[0] + "'");
        }
    }

    const CsvTable dist = read_csv(dir / "wage_dist.csv");
    expect_header(dist, {"zone_id", "wage_group", "share"});
    for (std::size_t i = 0; i < dist.rows.size(); ++i) {
        const auto& r = dist.rows[i];
        need_zone(b.zones, r[0], dist.where(i));
        if (!b.wages.contains(r[1])) {
            throw DanglingKey(dist.where(i) + ": unknown wage group '" + r[1] + "'");
        }
        const double s = nonnegative(dist, i, 2);
        if (!b.wage_dist[r[0]].emplace(r[1], s).second) {
            throw SchemaMismatch(dist.where(i) + ": duplicate share for " + r[0] + "/" + r[1]);
        }
    }
    check_wage_shares(b.wage_dist, dist.source);

    const CsvTable d4 = read_csv(dir / "demand4.csv");
    expect_header(d4, {"origin", "destination", "wage_group", "trips_taxi", "trips_transit",
                       "trips_walk", "trips_drive"});
    b.demand4.modes = ModeSet::four_mode();
    for (std::size_t i = 0; i < d4.rows.size(); ++i) {
        const auto& r = d4.rows[i];
        need_zone(b.zones, r[0], d4.where(i));
        need_zone(b.zones, r[1], d4.where(i));
        if (!b.wages.contains(r[2])) {
            throw DanglingKey(d4.where(i) + ": unknown wage group '" + r[2] + "'");
        }
        DemandCell c{r[0], r[1], r[2], {}};
        for (std::size_t k = 0; k < kDemand4Modes.size(); ++k) {
            c.trips[idx(kDemand4Modes[k])] = nonnegative(d4, i, 3 + k);
        }
        b.demand4.cells.push_back(std::move(c));
    }

    const CsvTable tlc = read_csv(dir / "demand_tlc.csv");
    expect_header(tlc, {"origin", "destination", "trips_taxi", "trips_fhv", "trips_sfhv"});
    b.demand_tlc.modes = ModeSet::taxi_nest();
    for (std::size_t i = 0; i < tlc.rows.size(); ++i) {
        const auto& r = tlc.rows[i];
        need_zone(b.zones, r[0], tlc.where(i));
        need_zone(b.zones, r[1], tlc.where(i));
        DemandCell c{r[0], r[1], "", {}};
        for (std::size_t k = 0; k < kTlcModes.size(); ++k) {
            c.trips[idx(kTlcModes[k])] = nonnegative(tlc, i, 2 + k);
        }
        b.demand_tlc.cells.push_back(std::move(c));
    }

    const CsvTable attrs = read_csv(dir / "attrs.csv");
    expect_header(attrs, {"origin", "destination", "mode", "time_mean_hr", "time_std_hr",
                          "cost_mean_usd", "cost_std_usd", "distance_miles"});
    std::set<std::pair<OdPair, Mode>> seen;
    for (std::size_t i = 0; i < attrs.rows.size(); ++i) {
        const auto& r = attrs.rows[i];
        need_zone(b.zones, r[0], attrs.where(i));
        need_zone(b.zones, r[1], attrs.where(i));
        const auto mode = parse_mode(r[2]);
        if (!mode) throw SchemaMismatch(attrs.where(i) + ": unknown mode '" + r[2] + "'");
        const OdPair od{r[0], r[1]};
        if (!seen.emplace(od, *mode).second) {
            throw SchemaMismatch(attrs.where(i) + ": duplicate row for " + r[0] + "->" + r[1] +
                                 " " + r[2]);
        }
        ModeAttributes a{nonnegative(attrs, i, 3), nonnegative(attrs, i, 4),
                         nonnegative(attrs, i, 5), nonnegative(attrs, i, 6),
                         nonnegative(attrs, i, 7)};
        try {
            a.validate();
        } catch (const InvalidInput& e) {
            throw SchemaMismatch(attrs.where(i) + ": " + e.what());
        }
        auto [it, fresh] = b.attrs.try_emplace(od, unavailable_row());
        it->second[idx(*mode)] = a;
    }

    check_cross_references(b);

    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        try {
            b.manifest = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaMismatch("manifest.json: " + std::string(e.what()));
        }
    }
    return b;
}

void validate_bundle(const DatasetBundle& b) {
    for (const auto& [id, z] : b.zones) {
        if (id != z.id || z.borough.empty()) throw SchemaMismatch("zone '" + id + "' is malformed");
    }
    for (const auto& [id, w] : b.wages) {
        if (!(w.hourly_wage > 0.0) || !std::isfinite(w.hourly_wage)) {
            throw NegativeValue("wage group '" + id + "' must have a positive wage");
        }
    }
    for (const auto& [zone, shares] : b.wage_dist) {
        need_zone(b.zones, zone, "wage distribution");
        for (const auto& [g, s] : shares) {
            if (!b.wages.contains(g)) throw DanglingKey("wage distribution: unknown group " + g);
            if (s < 0.0) throw NegativeValue("wage distribution: negative share");
        }
    }
    check_wage_shares(b.wage_dist, "wage distribution");
    for (const DemandSet* d : {&b.demand4, &b.demand_tlc}) {
        for (const DemandCell& c : d->cells) {
            need_zone(b.zones, c.origin, "demand");
            need_zone(b.zones, c.destination, "demand");
            if (d == &b.demand4 && !b.wages.contains(c.wage_group)) {
                throw DanglingKey("demand: unknown wage group '" + c.wage_group + "'");
            }
            for (double t : c.trips) {
                if (!(t >= 0.0)) throw NegativeValue("demand: negative trip count");
            }
        }
    }
    for (const auto& [od, row] : b.attrs) {
        need_zone(b.zones, od.origin, "attributes");
        need_zone(b.zones, od.destination, "attributes");
        for (const ModeAttributes& a : row) a.validate();
    }
    check_cross_references(b);
}

void save_bundle(const DatasetBundle& b, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<std::vector<std::string>> rows;

    for (const auto& [id, z] : b.zones) rows.push_back({z.id, z.borough, z.name});
    write_csv(dir / "zones.csv", {"zone_id", "borough", "name"}, rows);

    rows.clear();
    for (const auto& [id, w] : b.wages) rows.push_back({w.id, format_number(w.hourly_wage)});
    write_csv(dir / "wages.csv", {"wage_group", "hourly_wage_usd"}, rows);

    rows.clear();
    for (const auto& [zone, shares] : b.wage_dist) {
        for (const auto& [g, s] : shares) rows.push_back({zone, g, format_number(s)});
    }
    write_csv(dir / "wage_dist.csv", {"zone_id", "wage_group", "share"}, rows);

    rows.clear();
    for (const DemandCell& c : b.demand4.cells) {
        std::vector<std::string> r{c.origin, c.destination, c.wage_group};
        for (Mode m : kDemand4Modes) r.push_back(format_number(c.trips[idx(m)]));
        rows.push_back(std::move(r));
    }
    write_csv(dir / "demand4.csv",
              {"origin", "destination", "wage_group", "trips_taxi", "trips_transit", "trips_walk",
               "trips_drive"},
              rows);

    rows.clear();
    for (const DemandCell& c : b.demand_tlc.cells) {
        std::vector<std::string> r{c.origin, c.destination};
        for (Mode m : kTlcModes) r.push_back(format_number(c.trips[idx(m)]));
        rows.push_back(std::move(r));
    }
    write_csv(dir / "demand_tlc.csv",
              {"origin", "destination", "trips_taxi", "trips_fhv", "trips_sfhv"}, rows);

    rows.clear();
    for (const auto& [od, row] : b.attrs) {
        for (Mode m : kAllModes) {
            const ModeAttributes& a = row[idx(m)];
            rows.push_back({od.origin, od.destination, std::string(mode_name(m)),
                            format_number(a.time_mean), format_number(a.time_std),
                            format_number(a.cost_mean), format_number(a.cost_std),
                            format_number(a.distance)});
        }
    }
    write_csv(dir / "attrs.csv",
              {"origin", "destination", "mode", "time_mean_hr", "time_std_hr", "cost_mean_usd",
               "cost_std_usd", "distance_miles"},
              rows);

    if (!b.manifest.is_null()) write_text(dir / "manifest.json", b.manifest.dump(2) + "\n");
}

DemandSet tlc_by_wage(const DatasetBundle& bundle) {
    return expand_by_wage(bundle.demand_tlc, bundle.wage_dist);
}

}  // namespace modeshift
