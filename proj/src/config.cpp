#include "modeshift/config.hpp"

#include <cstdio>
#include <fstream>

#include "modeshift/errors.hpp"

namespace modeshift {

namespace {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
    if (!j.is_object()) throw InvalidInput(std::string(where) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw InvalidInput(std::string(where) + ": unknown key '" + key + "'");
    }
}

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaMismatch(path.filename().string() + ": " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    if (n_beta == 0 || n_sigma == 0 || n_corr_pairs == 0) throw InvalidInput("grid sizes must be >= 1");
    if (n_reps == 0 || oracle_draws == 0) throw InvalidInput("n_reps and oracle_draws must be >= 1");
    if (!(smoothing_floor > 0.0 && smoothing_floor < 1.0)) throw InvalidInput("smoothing_floor must lie in (0, 1)");
    if (!(prune_tail >= 0.0 && prune_tail < 1.0)) throw InvalidInput("prune_tail must lie in [0, 1)");
    const auto& s = surrogate;
    if (s.samples == 0 || s.oracle_draws == 0 || s.validation_points == 0 || s.validation_draws == 0) {
        throw InvalidInput("surrogate sample counts must be >= 1");
    }
    const auto& t = s.train;
    if (t.epochs == 0 || t.batch_size == 0 || !(t.learning_rate > 0.0) || !(t.momentum >= 0.0 && t.momentum < 1.0) ||
        !(t.beta2 >= 0.0 && t.beta2 < 1.0) ||
        !(t.final_lr_fraction > 0.0 && t.final_lr_fraction <= 1.0)) {
        throw InvalidInput("invalid surrogate training settings");
    }
    constants.validate();
}

PriorSpec RunConfig::prior() const {
    PriorSpec p = PriorSpec::defaults();
    p.n_beta = n_beta;
    p.n_sigma = n_sigma;
    p.n_corr_pairs = n_corr_pairs;
    return p;
}

LikelihoodOptions RunConfig::likelihood() const { return {smoothing, smoothing_floor}; }

json to_json(const RunConfig& c) {
    const auto& s = c.surrogate;
    return {
        {"seed", c.seed},
        {"n_beta", c.n_beta},
        {"n_sigma", c.n_sigma},
        {"n_corr_pairs", c.n_corr_pairs},
        {"n_reps", c.n_reps},
        {"oracle_draws", c.oracle_draws},
        {"smoothing", c.smoothing},
        {"smoothing_floor", c.smoothing_floor},
        {"prune_tail", c.prune_tail},
        {"surrogate",
         {{"samples", s.samples},
          {"oracle_draws", s.oracle_draws},
          {"validation_points", s.validation_points},
          {"validation_draws", s.validation_draws},
          {"optimizer", std::string(optimizer_name(s.train.optimizer))},
          {"epochs", s.train.epochs},
          {"learning_rate", s.train.learning_rate},
          {"momentum", s.train.momentum},
          {"beta2", s.train.beta2},
          {"batch_size", s.train.batch_size},
          {"final_lr_fraction", s.train.final_lr_fraction},
          {"seed", s.train.seed}}},
        {"constants",
         {{"miles_per_gallon", c.constants.miles_per_gallon},
          {"co2_kg_per_gallon", c.constants.co2_kg_per_gallon},
          {"transit_fare", c.constants.transit_fare},
          {"sfhv_occupancy", c.constants.sfhv_occupancy}}},
    };
}

RunConfig config_from_json(const json& j, const RunConfig& base) {
    reject_unknown(j,
                   {"seed", "n_beta", "n_sigma", "n_corr_pairs", "n_reps", "oracle_draws", "smoothing",
                    "smoothing_floor", "prune_tail", "surrogate", "constants"},
                   "config");
    RunConfig c = base;
    read(j, "seed", c.seed);
    read(j, "n_beta", c.n_beta);
    read(j, "n_sigma", c.n_sigma);
    read(j, "n_corr_pairs", c.n_corr_pairs);
    read(j, "n_reps", c.n_reps);
    read(j, "oracle_draws", c.oracle_draws);
    read(j, "smoothing", c.smoothing);
    read(j, "smoothing_floor", c.smoothing_floor);
    read(j, "prune_tail", c.prune_tail);
    if (j.contains("surrogate")) {
        const json& s = j.at("surrogate");
        reject_unknown(s,
                       {"samples", "oracle_draws", "validation_points", "validation_draws", "optimizer", "epochs",
                        "learning_rate", "momentum", "beta2", "batch_size", "final_lr_fraction", "seed"},
                       "config.surrogate");
        read(s, "samples", c.surrogate.samples);
        read(s, "oracle_draws", c.surrogate.oracle_draws);
        read(s, "validation_points", c.surrogate.validation_points);
        read(s, "validation_draws", c.surrogate.validation_draws);
        std::string optimizer(optimizer_name(c.surrogate.train.optimizer));
        read(s, "optimizer", optimizer);
        c.surrogate.train.optimizer = optimizer_from_name(optimizer);
        read(s, "epochs", c.surrogate.train.epochs);
        read(s, "learning_rate", c.surrogate.train.learning_rate);
        read(s, "momentum", c.surrogate.train.momentum);
        read(s, "beta2", c.surrogate.train.beta2);
        read(s, "batch_size", c.surrogate.train.batch_size);
        read(s, "final_lr_fraction", c.surrogate.train.final_lr_fraction);
        read(s, "seed", c.surrogate.train.seed);
    }
    if (j.contains("constants")) {
        const json& k = j.at("constants");
        reject_unknown(k, {"miles_per_gallon", "co2_kg_per_gallon", "transit_fare", "sfhv_occupancy"},
                       "config.constants");
        read(k, "miles_per_gallon", c.constants.miles_per_gallon);
        read(k, "co2_kg_per_gallon", c.constants.co2_kg_per_gallon);
        read(k, "transit_fare", c.constants.transit_fare);
        read(k, "sfhv_occupancy", c.constants.sfhv_occupancy);
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
    return config_from_json(parse_file(path), base);
}

std::string config_digest(const json& j) {
    const std::string text = j.dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json to_json(const Scenario& s) {
    json removed = json::array();
    for (Mode m : s.removed_modes.modes()) removed.push_back(mode_name(m));
    json surcharges = json::object();
    for (Mode m : kAllModes) {
        if (s.surcharges[idx(m)] != 0.0) surcharges[std::string(mode_name(m))] = s.surcharges[idx(m)];
    }
    json j = {{"name", s.name}, {"remove", removed}, {"surcharges", surcharges}};
    j["origin_borough"] = s.surcharge_origin_borough ? json(*s.surcharge_origin_borough) : json(nullptr);
    return j;
}

Scenario scenario_from_json(const json& j) {
    reject_unknown(j, {"name", "remove", "surcharges", "origin_borough"}, "scenario");
    Scenario s;
    try {
        if (j.contains("name")) s.name = j.at("name").get<std::string>();
        if (j.contains("remove")) {
            for (const auto& m : j.at("remove")) {
                const auto mode = parse_mode(m.get<std::string>());
                if (!mode) throw InvalidInput("scenario: unknown mode '" + m.get<std::string>() + "'");
                s.removed_modes.insert(*mode);
            }
        }
        if (j.contains("surcharges")) {
            for (const auto& [key, value] : j.at("surcharges").items()) {
                const auto mode = parse_mode(key);
                if (!mode) throw InvalidInput("scenario: unknown mode '" + key + "'");
                s.surcharges[idx(*mode)] = value.get<double>();
            }
        }
        if (j.contains("origin_borough") && !j.at("origin_borough").is_null()) {
            s.surcharge_origin_borough = j.at("origin_borough").get<std::string>();
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("scenario: ") + e.what());
    }
    s.validate();
    return s;
}

ScenarioPair load_scenario_pair(const std::filesystem::path& path) {
    const json j = parse_file(path);
    ScenarioPair pair;
    if (j.is_object() && (j.contains("A") || j.contains("B"))) {
        reject_unknown(j, {"name", "A", "B"}, "scenario file");
        if (j.contains("A")) pair.a = scenario_from_json(j.at("A"));
        if (j.contains("B")) pair.b = scenario_from_json(j.at("B"));
        pair.name = j.value("name", pair.b.name.empty() ? path.stem().string() : pair.b.name);
    } else {
        pair.b = scenario_from_json(j);
        pair.name = pair.b.name.empty() ? path.stem().string() : pair.b.name;
    }
    if (pair.a.name.empty()) pair.a.name = "baseline";
    return pair;
}

ScenarioPair preset_scenario_pair(std::string_view name) {
    ScenarioPair pair;
    pair.a.name = "baseline";
    if (name == "no-sfhv") {
        pair.b = presets::no_sfhv();
    } else if (name == "surcharge") {
        pair.b = presets::congestion_surcharge();
    } else {
        throw InvalidInput("unknown scenario preset '" + std::string(name) + "'");
    }
    pair.name = std::string(name);
    return pair;
}

}  // namespace modeshift
