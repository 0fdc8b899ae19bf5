#include "modeshift/report.hpp"

#include <cmath>
#include <fstream>

#include "modeshift/csv.hpp"
#include "modeshift/errors.hpp"

namespace modeshift {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json stats_json(const WeightedStats& s) {
    return {{"mean", number(s.mean)}, {"std", number(s.std)},
            {"ci95", json::array({number(s.ci95_low), number(s.ci95_high)})}};
}

json metrics_json(const ScopeReport& scope) {
    json out = json::object();
    for (std::size_t k = 0; k < kNumMetrics; ++k) out[std::string(metric_name(k))] = stats_json(scope.metrics[k]);
    return out;
}

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw SchemaMismatch("report" + path + ": " + what);
}

void check_number_or_null(const json& v, const std::string& path) {
    if (!v.is_number() && !v.is_null()) bad(path, "expected number or null");
}

void check_metrics(const json& m, const std::string& path) {
    if (!m.is_object()) bad(path, "expected object");
    if (m.size() != kNumMetrics) bad(path, "expected " + std::to_string(kNumMetrics) + " metrics");
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
        const std::string name(metric_name(k));
        const std::string p = path + "." + name;
        if (!m.contains(name)) bad(p, "missing");
        const json& s = m.at(name);
        if (!s.is_object() || s.size() != 3) bad(p, "expected {mean, std, ci95}");
        for (const char* key : {"mean", "std"}) {
            if (!s.contains(key)) bad(p + "." + key, "missing");
            check_number_or_null(s.at(key), p + "." + key);
        }
        if (!s.contains("ci95") || !s.at("ci95").is_array() || s.at("ci95").size() != 2) {
            bad(p + ".ci95", "expected [lo, hi]");
        }
        for (const json& v : s.at("ci95")) check_number_or_null(v, p + ".ci95");
    }
}

void check_scopes(const json& r, const char* key, const char* id_key) {
    const std::string path = std::string(".") + key;
    if (!r.contains(key) || !r.at(key).is_array()) bad(path, "expected array");
    std::size_t i = 0;
    for (const json& e : r.at(key)) {
        const std::string p = path + "[" + std::to_string(i++) + "]";
        if (!e.is_object() || e.size() != 2) bad(p, "expected {" + std::string(id_key) + ", metrics}");
        if (!e.contains(id_key) || !e.at(id_key).is_string()) bad(p + "." + id_key, "expected string");
        if (!e.contains("metrics")) bad(p + ".metrics", "missing");
        check_metrics(e.at("metrics"), p + ".metrics");
    }
}

std::vector<std::vector<std::string>> scope_rows(const std::string& scope, const json& metrics) {
    auto cell = [](const json& v) { return v.is_null() ? std::string("nan") : format_number(v.get<double>()); };
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
        const std::string name(metric_name(k));
        const json& s = metrics.at(name);
        rows.push_back({scope, name, cell(s.at("mean")), cell(s.at("std")), cell(s.at("ci95")[0]),
                        cell(s.at("ci95")[1])});
    }
    return rows;
}

}  // namespace

void write_posterior_csv(const fs::path& path, std::span<const ParameterSample> samples) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) {
        rows.push_back({format_number(s.params.beta), format_number(s.params.sigma),
                        format_number(s.params.cor_tfs), format_number(s.params.cor_fs),
                        format_number(s.loglik_stage1), format_number(s.loglik_stage2),
                        format_number(s.weight)});
    }
    write_csv(path, {"beta", "sigma", "corTFS", "corFS", "loglik1", "loglik2", "weight"}, rows);
}

std::vector<ParameterSample> read_posterior_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    expect_header(t, {"beta", "sigma", "corTFS", "corFS", "loglik1", "loglik2", "weight"});
    std::vector<ParameterSample> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        auto num = [&](std::size_t c) {
            if (r[c] == "-inf") return -kInf;
            return parse_number(r[c], t.where(i));
        };
        ParameterSample s;
        s.params = {num(0), num(1), num(2), num(3)};
        s.loglik_stage1 = num(4);
        s.loglik_stage2 = num(5);
        s.weight = num(6);
        if (!(s.weight >= 0.0)) throw NegativeValue(t.where(i) + ": negative posterior weight");
        try {
            s.params.validate();
        } catch (const Error& e) {
            throw SchemaMismatch(t.where(i) + ": " + e.what());
        }
        out.push_back(s);
    }
    if (out.empty()) throw SchemaMismatch(t.source + ": no posterior samples");
    return out;
}

json report_to_json(const ImpactReport& report, const std::string& config_digest) {
    json j;
    j["scenario"] = report.scenario;
    j["config_digest"] = config_digest;
    json modes = json::array();
    for (Mode m : kAllModes) modes.push_back(mode_name(m));
    j["modes"] = modes;
    json metrics = json::array();
    for (std::size_t k = 0; k < kNumMetrics; ++k) metrics.push_back(metric_name(k));
    j["metrics"] = metrics;
    j["citywide"] = metrics_json(report.citywide);
    j["per_zone"] = json::array();
    for (const auto& z : report.per_zone) j["per_zone"].push_back({{"zone", z.key}, {"metrics", metrics_json(z)}});
    j["per_wage"] = json::array();
    for (const auto& w : report.per_wage) {
        j["per_wage"].push_back({{"wage_group", w.key}, {"metrics", metrics_json(w)}});
    }
    json matrix = json::array();
    for (const auto& row : report.shift_matrix) {
        json r = json::array();
        for (double v : row) r.push_back(v);
        matrix.push_back(r);
    }
    j["shift_matrix"] = matrix;
    return j;
}

void validate_report_json(const json& r) {
    if (!r.is_object()) bad("", "expected object");
    for (const char* key : {"scenario", "config_digest"}) {
        if (!r.contains(key) || !r.at(key).is_string()) bad(std::string(".") + key, "expected string");
    }
    if (!r.contains("citywide")) bad(".citywide", "missing");
    check_metrics(r.at("citywide"), ".citywide");
    check_scopes(r, "per_zone", "zone");
    check_scopes(r, "per_wage", "wage_group");
    if (!r.contains("shift_matrix") || !r.at("shift_matrix").is_array() || r.at("shift_matrix").size() != kNumModes) {
        bad(".shift_matrix", "expected 6 rows");
    }
    for (const json& row : r.at("shift_matrix")) {
        if (!row.is_array() || row.size() != kNumModes) bad(".shift_matrix", "expected 6 columns");
        for (const json& v : row) {
            if (!v.is_number() || v.get<double>() < 0.0) bad(".shift_matrix", "expected nonnegative numbers");
        }
    }
}

void write_report_csv(const json& report, const fs::path& dir) {
    validate_report_json(report);
    fs::create_directories(dir);
    const std::vector<std::string> header{"scope", "metric", "mean", "std", "ci95_low", "ci95_high"};
    write_csv(dir / "citywide.csv", header, scope_rows("citywide", report.at("citywide")));
    for (auto [file, key, id] : {std::tuple{"per_zone.csv", "per_zone", "zone"},
                                 std::tuple{"per_wage.csv", "per_wage", "wage_group"}}) {
        std::vector<std::vector<std::string>> rows;
        for (const json& e : report.at(key)) {
            auto part = scope_rows(e.at(id).get<std::string>(), e.at("metrics"));
            rows.insert(rows.end(), part.begin(), part.end());
        }
        write_csv(dir / file, header, rows);
    }
    std::vector<std::string> mheader{"from_mode"};
    for (Mode m : kAllModes) mheader.emplace_back(mode_name(m));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t a = 0; a < kNumModes; ++a) {
        std::vector<std::string> r{std::string(mode_name(static_cast<Mode>(a)))};
        for (const json& v : report.at("shift_matrix")[a]) r.push_back(format_number(v.get<double>()));
        rows.push_back(std::move(r));
    }
    write_csv(dir / "shift_matrix.csv", mheader, rows);
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingFile("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaMismatch(path.filename().string() + ": " + e.what());
    }
}

}  // namespace modeshift
