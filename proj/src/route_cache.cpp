#include "modeshift/route_cache.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "modeshift/errors.hpp"

namespace modeshift {

namespace fs = std::filesystem;

namespace {

struct Observations {
    std::vector<double> hours, cost, miles;
};

std::pair<double, double> mean_std(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    if (x.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

double field(const nlohmann::json& obs, const char* key) {
    const auto& v = obs.at(key);
    if (!v.is_number()) throw std::invalid_argument(std::string(key) + " is not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < 0.0) throw std::invalid_argument(std::string(key) + " is negative");
    return x;
}

}  // namespace

RouteCacheResult ingest_route_cache(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw MissingFile("route cache is not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    RouteCacheResult result;
    std::map<std::pair<OdPair, Mode>, Observations> pooled;
    for (const fs::path& file : files) {
        try {
            std::ifstream in(file);
            const nlohmann::json doc = nlohmann::json::parse(in);
            const auto mode = parse_mode(doc.at("mode").get<std::string>());
            if (!mode) throw std::invalid_argument("unknown mode");
            const OdPair od{doc.at("origin").get<std::string>(), doc.at("destination").get<std::string>()};
            Observations parsed;
            for (const auto& obs : doc.at("observations")) {
                parsed.hours.push_back(field(obs, "duration_seconds") / 3600.0);
                parsed.cost.push_back(field(obs, "cost"));
                parsed.miles.push_back(field(obs, "distance_miles"));
            }
            Observations& slot = pooled[{od, *mode}];
            for (auto [dst, src] : {std::pair{&slot.hours, &parsed.hours}, std::pair{&slot.cost, &parsed.cost},
                                    std::pair{&slot.miles, &parsed.miles}}) {
                dst->insert(dst->end(), src->begin(), src->end());
            }
            ++result.documents_read;
        } catch (const std::exception& e) {
            ++result.documents_skipped;
            result.warnings.push_back(file.filename().string() + ": skipped (" + e.what() + ")");
        }
    }
    if (files.empty()) result.warnings.push_back("route cache " + dir.string() + " is empty");
    if (result.documents_skipped > 0) {
        result.warnings.push_back(std::to_string(result.documents_skipped) + " of " +
                                  std::to_string(files.size()) + " documents skipped");
    }

    for (const auto& [key, obs] : pooled) {
        if (obs.hours.empty()) continue;
        const auto [t, ts] = mean_std(obs.hours);
        const auto [c, cs] = mean_std(obs.cost);
        const auto [d, ds] = mean_std(obs.miles);
        auto [it, fresh] = result.fragment.try_emplace(key.first, unavailable_row());
        it->second[idx(key.second)] = ModeAttributes{t, ts, c, cs, d};
    }
    return result;
}

}  // namespace modeshift
