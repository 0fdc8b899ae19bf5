// modeshift command-line driver.
//
// Exit codes: 0 success, 2 usage error, 3 data or model error, 4 quality gate
// failure.

#include <cstdio>
#include <iostream>
#include <memory>
#include <numeric>
#include <regex>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "modeshift/closed_form.hpp"
#include "modeshift/config.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/dataset.hpp"
#include "modeshift/errors.hpp"
#include "modeshift/fixture.hpp"
#include "modeshift/impact.hpp"
#include "modeshift/inference.hpp"
#include "modeshift/prob_backend.hpp"
#include "modeshift/report.hpp"
#include "modeshift/surrogate.hpp"

namespace ms = modeshift;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitGate = 4;

constexpr double kGateMeanError = 0.01;
constexpr double kGateMaxError = 0.05;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GateFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "[modeshift] " << msg << '\n'; }

// Logs the resolved configuration and returns its digest. File locations are
// left out of the digest so the same run in another directory matches.
std::string log_config(const std::string& command, const ms::RunConfig& cfg, const json& args) {
    const json resolved = {{"command", command}, {"config", ms::to_json(cfg)}, {"args", args}};
    json hashed = resolved;
    for (const char* key : {"out", "data", "posterior", "surrogate", "scenario"}) hashed["args"].erase(key);
    const std::string digest = ms::config_digest(hashed);
    log("resolved config: " + resolved.dump());
    log("master seed: " + std::to_string(cfg.seed) + "  config digest: " + digest);
    return digest;
}

std::string fmt(double x, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    return buf;
}

struct Options {
    std::string config_path;
    ms::RunConfig cfg;

    // gen-fixture
    std::string out;
    std::size_t zones = 12;
    std::size_t wage_groups = 4;
    std::uint64_t seed = 0;
    ms::SimParams truth = ms::kReferenceParams;
    double tlc_multiplier = ms::FixtureConfig{}.tlc_multiplier;

    // fit-closed
    std::string data;
    std::string model = "mnl";
    std::string grid;

    // train-surrogate
    std::size_t samples = 0;
    std::size_t oracle_draws = 0;
    std::size_t epochs = 0;
    double lr = 0.0;

    // infer
    std::string surrogate;
    bool oracle = false;
    std::string infer_grid = "10x10x10";
    std::string grid_centre;
    std::string grid_step = "0.05,0.03,0.04,0.04";
    bool smoothing = false;

    // impact
    std::string posterior;
    std::string scenario;
    std::size_t reps = 0;
    double scale = 1.0;
    std::size_t data_resamples = 0;

    // report
    std::string in;
    std::string format = "csv";
};

ms::RunConfig base_config(const Options& o) {
    return o.config_path.empty() ? ms::RunConfig{} : ms::load_config(o.config_path);
}

int cmd_gen_fixture(const Options& o, const CLI::App& sub) {
    ms::RunConfig cfg = base_config(o);
    if (sub.count("--seed")) cfg.seed = o.seed;
    ms::FixtureConfig fc;
    fc.n_zones = o.zones;
    fc.n_wage_groups = o.wage_groups;
    fc.true_params = o.truth;
    fc.tlc_multiplier = o.tlc_multiplier;
    fc.seed = cfg.seed;
    try {
        fc.validate();
    } catch (const ms::Error& e) {
        throw UsageError(e.what());
    }
    log_config("gen-fixture", cfg,
               {{"out", o.out}, {"zones", fc.n_zones}, {"wage_groups", fc.n_wage_groups},
                {"beta", fc.true_params.beta}, {"sigma", fc.true_params.sigma},
                {"cor_tfs", fc.true_params.cor_tfs}, {"cor_fs", fc.true_params.cor_fs},
                {"tlc_multiplier", fc.tlc_multiplier}});
    const ms::DatasetBundle b = ms::gen_fixture(fc);
    ms::save_bundle(b, o.out);
    std::cout << "wrote fixture to " << o.out << ": " << b.zones.size() << " zones, " << b.wages.size()
              << " wage groups, " << b.attrs.size() << " O-D pairs, " << b.demand4.cells.size()
              << " four-mode cells, " << b.demand_tlc.cells.size() << " TLC cells\n";
    return 0;
}

int cmd_fit_closed(const Options& o) {
    const ms::RunConfig cfg = base_config(o);
    ms::ModelKind kind;
    ms::GridSpec grid;
    try {
        kind = ms::parse_model_kind(o.model);
        grid = ms::GridSpec::parse(o.grid, ms::GridSpec::defaults_for(kind));
    } catch (const ms::Error& e) {
        throw UsageError(e.what());
    }
    log_config("fit-closed", cfg, {{"data", o.data}, {"model", o.model}, {"grid", o.grid}, {"out", o.out}});
    const ms::DatasetBundle b = ms::load_bundle(o.data);
    std::vector<ms::DemandSet> sets{b.demand4};
    if (kind == ms::ModelKind::nested) sets.push_back(ms::tlc_by_wage(b));

    const ms::FitResult fit = ms::fit_grid(sets, b.attrs, b.wages, kind, grid);
    std::vector<double> pred_totals;
    std::vector<double> obs_totals;
    std::cout << "model " << ms::model_kind_name(kind) << ": lambda=" << fmt(fit.best.lambda)
              << " beta=" << fmt(fit.best.beta);
    if (kind == ms::ModelKind::nested) {
        std::cout << " tau_taxi_fhv=" << fmt(fit.best.tau_taxi_fhv) << " tau_fhv=" << fmt(fit.best.tau_fhv);
    }
    std::cout << "\nWRMSE " << fmt(fit.best_wrmse) << "\n\n";
    std::cout << "source      mode        observed     predicted\n";
    for (const ms::DemandSet& set : sets) {
        const auto pred = ms::mode_totals(ms::predict_table(set, b.attrs, b.wages, fit.best, kind));
        const auto obs = ms::mode_totals(ms::observed_table(set));
        const char* source = set.modes == ms::ModeSet::four_mode() ? "four-mode" : "tlc";
        for (ms::Mode m : set.modes.modes()) {
            pred_totals.push_back(pred[ms::idx(m)]);
            obs_totals.push_back(obs[ms::idx(m)]);
            std::printf("%-11s %-8s %12.1f  %12.1f\n", source, std::string(ms::mode_name(m)).c_str(),
                        obs[ms::idx(m)], pred[ms::idx(m)]);
        }
    }
    const double r2 = ms::r_squared(pred_totals, obs_totals);
    std::cout << "\nR^2 (mode totals) " << fmt(r2) << '\n';
    ms::write_csv(o.out, {"model", "lambda", "beta", "tau_taxi_fhv", "tau_fhv", "wrmse", "r_squared"},
                  {{std::string(ms::model_kind_name(kind)), ms::format_number(fit.best.lambda),
                    ms::format_number(fit.best.beta), ms::format_number(fit.best.tau_taxi_fhv),
                    ms::format_number(fit.best.tau_fhv), ms::format_number(fit.best_wrmse),
                    ms::format_number(r2)}});
    return 0;
}

int cmd_train_surrogate(const Options& o, const CLI::App& sub) {
    ms::RunConfig cfg = base_config(o);
    auto& s = cfg.surrogate;
    if (sub.count("--samples")) s.samples = o.samples;
    if (sub.count("--oracle-draws")) s.oracle_draws = o.oracle_draws;
    if (sub.count("--epochs")) s.train.epochs = o.epochs;
    if (sub.count("--lr")) s.train.learning_rate = o.lr;
    if (sub.count("--seed")) {
        cfg.seed = o.seed;
        s.train.seed = o.seed;
    }
    try {
        cfg.validate();
    } catch (const ms::Error& e) {
        throw UsageError(e.what());
    }
    log_config("train-surrogate", cfg, {{"out", o.out}});

    const ms::SampleDistribution dist;
    log("generating " + std::to_string(s.samples) + " training samples (" + std::to_string(s.oracle_draws) +
        " oracle draws each)");
    const auto data = ms::gen_training_set(s.samples, dist, s.oracle_draws, cfg.seed);
    log("training for " + std::to_string(s.train.epochs) + " epochs");
    const ms::MlpModel model = ms::train(data, s.train);
    ms::save_model(model, o.out);

    const ms::SurrogateBackend backend(model);
    const ms::ValidationReport v =
        ms::validate(backend, s.validation_points, s.validation_draws, ms::mix64(cfg.seed ^ 0x5eed), dist);
    std::cout << "loss " << fmt(model.info.initial_loss) << " -> " << fmt(model.info.final_loss) << '\n'
              << "validation on " << v.n_points << " held-out points: mean abs err " << fmt(v.mean_abs_err)
              << ", max abs err " << fmt(v.max_abs_err) << '\n';
    if (!(v.mean_abs_err <= kGateMeanError && v.max_abs_err <= kGateMaxError)) {
        throw GateFailure("surrogate misses the accuracy gates (mean <= " + fmt(kGateMeanError) +
                          ", max <= " + fmt(kGateMaxError) + ")");
    }
    std::cout << "gates passed; model written to " << o.out << '\n';
    return 0;
}

// Parses "beta,sigma,corTFS,corFS".
ms::SimParams parse_params(const std::string& text, const std::string& flag) {
    std::vector<double> v;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find(',', start), text.size());
        try {
            v.push_back(ms::parse_number(text.substr(start, end - start), flag));
        } catch (const ms::Error&) {
            throw UsageError(flag + " must be four comma-separated numbers");
        }
        start = end + 1;
    }
    if (v.size() != 4) throw UsageError(flag + " must be four comma-separated numbers");
    return {v[0], v[1], v[2], v[3]};
}

int cmd_infer(const Options& o, const CLI::App& sub) {
    ms::RunConfig cfg = base_config(o);
    std::smatch m;
    static const std::regex grid_re(R"((\d+)x(\d+)x(\d+))");
    if (!std::regex_match(o.infer_grid, m, grid_re)) throw UsageError("--grid must look like 10x10x10");
    cfg.n_beta = std::stoul(m[1]);
    cfg.n_sigma = std::stoul(m[2]);
    cfg.n_corr_pairs = std::stoul(m[3]);
    if (sub.count("--oracle-draws")) cfg.oracle_draws = o.oracle_draws;
    if (sub.count("--smoothing")) cfg.smoothing = o.smoothing;
    if (o.oracle == !o.surrogate.empty()) throw UsageError("give exactly one of --surrogate FILE or --oracle");
    try {
        cfg.validate();
    } catch (const ms::Error& e) {
        throw UsageError(e.what());
    }
    std::vector<ms::SimParams> prior;
    try {
        prior = o.grid_centre.empty()
                    ? ms::prior_samples(cfg.prior())
                    : ms::centred_grid(parse_params(o.grid_centre, "--grid-centre"),
                                       parse_params(o.grid_step, "--grid-step"), cfg.n_beta, cfg.n_sigma,
                                       cfg.n_corr_pairs);
    } catch (const ms::Error& e) {
        throw UsageError(e.what());
    }
    log_config("infer", cfg,
               {{"data", o.data},
                {"surrogate", o.surrogate},
                {"oracle", o.oracle},
                {"grid_centre", o.grid_centre},
                {"grid_step", o.grid_centre.empty() ? std::string() : o.grid_step},
                {"out", o.out}});

    const ms::DatasetBundle b = ms::load_bundle(o.data);
    std::unique_ptr<ms::ProbabilityBackend> backend;
    if (o.oracle) {
        backend = std::make_unique<ms::McOracleBackend>(cfg.oracle_draws, cfg.seed);
    } else {
        backend = std::make_unique<ms::SurrogateBackend>(ms::load_model(o.surrogate));
    }
    log("evaluating " + std::to_string(prior.size()) + " prior samples with the " + backend->name() + " backend");
    const auto post = ms::evaluate_posterior(prior, b.demand4, b.demand_tlc, b.attrs, b.wages, b.wage_dist,
                                             *backend, cfg.likelihood());
    ms::write_posterior_csv(o.out, post);

    const ms::SimParams best = ms::max_likelihood(post);
    std::cout << "max likelihood: beta=" << fmt(best.beta) << " sigma=" << fmt(best.sigma)
              << " corTFS=" << fmt(best.cor_tfs) << " corFS=" << fmt(best.cor_fs) << '\n';
    std::vector<double> w;
    for (const auto& s : post) w.push_back(s.weight);
    const std::array<std::pair<const char*, double ms::SimParams::*>, 4> fields{
        {{"beta", &ms::SimParams::beta},
         {"sigma", &ms::SimParams::sigma},
         {"corTFS", &ms::SimParams::cor_tfs},
         {"corFS", &ms::SimParams::cor_fs}}};
    for (const auto& [name, field] : fields) {
        std::vector<double> v;
        for (const auto& s : post) v.push_back(s.params.*field);
        const auto st = ms::weighted_stats(v, w);
        std::cout << "posterior " << name << ": mean " << fmt(st.mean) << " std " << fmt(st.std) << " 95% ["
                  << fmt(st.ci95_low) << ", " << fmt(st.ci95_high) << "]\n";
    }
    return 0;
}

// Drops the lightest samples carrying at most `tail` of the total weight, then
// renormalises.
std::vector<ms::ParameterSample> prune(std::vector<ms::ParameterSample> post, double tail) {
    std::vector<std::size_t> order(post.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return post[a].weight < post[b].weight; });
    double total = 0.0;
    for (const auto& s : post) total += s.weight;
    if (!(total > 0.0)) throw ms::DegeneratePosterior("posterior weights sum to zero");
    std::vector<bool> keep(post.size(), true);
    double dropped = 0.0;
    for (std::size_t i : order) {
        if (dropped + post[i].weight > tail * total) break;
        dropped += post[i].weight;
        keep[i] = false;
    }
    std::vector<ms::ParameterSample> out;
    for (std::size_t i = 0; i < post.size(); ++i) {
        if (keep[i]) out.push_back(post[i]);
    }
    double kept = 0.0;
    for (const auto& s : out) kept += s.weight;
    for (auto& s : out) s.weight /= kept;
    return out;
}

int cmd_impact(const Options& o, const CLI::App& sub) {
    ms::RunConfig cfg = base_config(o);
    if (sub.count("--reps")) cfg.n_reps = o.reps;
    if (sub.count("--seed")) cfg.seed = o.seed;
    if (!(o.scale > 0.0) || !std::isfinite(o.scale)) throw UsageError("--scale must be positive");
    ms::ScenarioPair pair;
    try {
        cfg.validate();
        pair = (o.scenario == "no-sfhv" || o.scenario == "surcharge") ? ms::preset_scenario_pair(o.scenario)
                                                                       : ms::load_scenario_pair(o.scenario);
    } catch (const ms::DataError&) {
        throw;
    } catch (const ms::Error& e) {
        throw UsageError(e.what());
    }
    const std::string digest = log_config(
        "impact", cfg,
        {{"data", o.data}, {"posterior", o.posterior}, {"scenario", o.scenario}, {"scenario_a", ms::to_json(pair.a)},
         {"scenario_b", ms::to_json(pair.b)}, {"scale", o.scale}, {"data_resamples", o.data_resamples},
         {"out", o.out}});

    ms::DatasetBundle b = ms::load_bundle(o.data);
    for (auto& c : b.demand4.cells) {
        for (double& t : c.trips) t *= o.scale;
    }
    const auto post = prune(ms::read_posterior_csv(o.posterior), cfg.prune_tail);
    log("simulating " + std::to_string(post.size()) + " posterior samples x " +
        std::to_string(b.demand4.cells.size()) + " cells x " + std::to_string(cfg.n_reps) + " paired draws");
    const ms::ScenarioInputs inputs{&b.demand4, &b.attrs, &b.zones, &b.wages};
    const auto outcomes = ms::run_scenario(inputs, pair.a, pair.b, post, cfg.n_reps, cfg.seed, cfg.constants);
    std::vector<double> weights;
    for (const auto& s : post) weights.push_back(s.weight);
    ms::ImpactReport report = ms::aggregate_posterior(outcomes, weights, cfg.constants);
    report.scenario = pair.name;

    json j = ms::report_to_json(report, digest);
    j["scale"] = o.scale;
    j["n_posterior_samples"] = post.size();
    j["n_reps"] = cfg.n_reps;
    j["seed"] = cfg.seed;
    j["scenario_a"] = ms::to_json(pair.a);
    j["scenario_b"] = ms::to_json(pair.b);
    if (o.data_resamples > 0) {
        const ms::SimParams best = ms::max_likelihood(post);
        const auto du = ms::data_uncertainty(b.demand4, b.attrs, b.wages, best, o.data_resamples, cfg.n_reps,
                                             cfg.seed);
        json modes = json::object();
        for (ms::Mode m : b.demand4.modes.modes()) {
            modes[std::string(ms::mode_name(m))] = {{"mean", du.mean[ms::idx(m)]}, {"std", du.std[ms::idx(m)]}};
        }
        j["data_uncertainty"] = {{"n_resamples", du.n_resamples}, {"modes", modes}};
    }
    ms::validate_report_json(j);
    ms::write_json(o.out, j);

    const auto& city = report.citywide.metrics;
    auto line = [&](ms::Metric metric) {
        const auto& s = city[static_cast<std::size_t>(metric)];
        std::cout << "  " << ms::metric_name(metric) << ": " << fmt(s.mean) << " (std " << fmt(s.std) << ", 95% ["
                  << fmt(s.ci95_low) << ", " << fmt(s.ci95_high) << "])\n";
    };
    std::cout << "scenario " << pair.name << " (" << post.size() << " posterior samples)\n";
    for (std::size_t k = 0; k < ms::kNumMetrics; ++k) line(static_cast<ms::Metric>(k));
    for (ms::Mode removed : pair.b.removed_modes.modes()) {
        ms::ShiftMatrix mean;
        mean.counts = report.shift_matrix;
        if (pair.a.removed_modes.contains(removed) || !(mean.row_total(removed) > 0.0)) continue;
        const auto shares = ms::shift_shares(mean, removed);
        std::cout << "  displaced " << ms::mode_name(removed) << " trips:";
        for (ms::Mode to : ms::kAllModes) {
            if (to != removed) std::cout << ' ' << ms::mode_name(to) << ' ' << fmt(100.0 * shares[ms::idx(to)], 3) << '%';
        }
        std::cout << '\n';
    }
    std::cout << "report written to " << o.out << '\n';
    return 0;
}

int cmd_report(const Options& o) {
    if (o.format != "json" && o.format != "csv") throw UsageError("--format must be json or csv");
    const json j = ms::read_json(o.in);
    ms::validate_report_json(j);
    if (o.format == "csv") {
        ms::write_report_csv(j, o.out);
    } else {
        fs::create_directories(o.out);
        ms::write_json(fs::path(o.out) / "report.json", j);
    }
    std::cout << "report " << o.in << " validated; " << o.format << " output in " << o.out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"modeshift: mode-choice inference and mode-shift impact simulation"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config_path, "RunConfig JSON file")->check(CLI::ExistingFile);

    auto* gen = app.add_subcommand("gen-fixture", "write a synthetic dataset bundle");
    gen->add_option("--out", o.out, "output directory")->required();
    gen->add_option("--zones", o.zones, "number of zones")->capture_default_str();
    gen->add_option("--wage-groups", o.wage_groups, "number of wage groups")->capture_default_str();
    gen->add_option("--seed", o.seed, "master seed");
    gen->add_option("--beta", o.truth.beta, "generating beta")->capture_default_str();
    gen->add_option("--sigma", o.truth.sigma, "generating sigma")->capture_default_str();
    gen->add_option("--cor-tfs", o.truth.cor_tfs, "generating corTFS")->capture_default_str();
    gen->add_option("--cor-fs", o.truth.cor_fs, "generating corFS")->capture_default_str();
    gen->add_option("--tlc-multiplier", o.tlc_multiplier, "TLC trip population relative to commuters")
        ->capture_default_str();

    auto* fit = app.add_subcommand("fit-closed", "grid-fit a closed-form model");
    fit->add_option("--data", o.data, "dataset directory")->required();
    fit->add_option("--model", o.model, "mnl, logmnl or nested")->capture_default_str();
    fit->add_option("--grid", o.grid, "axis overrides, e.g. lambda=0.01:0.5:50,beta=0.1:2:20");
    fit->add_option("--out", o.out, "output params.csv")->required();

    auto* train = app.add_subcommand("train-surrogate", "train the likelihood surrogate");
    train->add_option("--samples", o.samples, "training samples");
    train->add_option("--oracle-draws", o.oracle_draws, "Monte Carlo draws per training target");
    train->add_option("--epochs", o.epochs, "training epochs");
    train->add_option("--lr", o.lr, "peak learning rate");
    train->add_option("--seed", o.seed, "master seed");
    train->add_option("--out", o.out, "output model file")->required();

    auto* infer = app.add_subcommand("infer", "two-stage likelihood over the prior lattice");
    infer->add_option("--data", o.data, "dataset directory")->required();
    infer->add_option("--surrogate", o.surrogate, "trained surrogate model");
    infer->add_flag("--oracle", o.oracle, "use the Monte Carlo oracle instead of a surrogate");
    infer->add_option("--oracle-draws", o.oracle_draws, "draws per oracle evaluation");
    infer->add_option("--grid", o.infer_grid, "beta x sigma x correlation-pair counts")->capture_default_str();
    infer->add_option("--grid-centre", o.grid_centre,
                      "beta,sigma,corTFS,corFS: evaluate a regular grid around this point instead of the prior");
    infer->add_option("--grid-step", o.grid_step, "beta,sigma,corTFS,corFS steps for --grid-centre")
        ->capture_default_str();
    infer->add_flag("--smoothing", o.smoothing, "floor probabilities instead of allowing -inf");
    infer->add_option("--out", o.out, "output posterior.csv")->required();

    auto* impact = app.add_subcommand("impact", "simulate a scenario pair over the posterior");
    impact->add_option("--data", o.data, "dataset directory")->required();
    impact->add_option("--posterior", o.posterior, "posterior.csv from infer")->required();
    impact->add_option("--scenario", o.scenario, "no-sfhv, surcharge or a scenario JSON file")->required();
    impact->add_option("--reps", o.reps, "paired draws per cell and sample");
    impact->add_option("--seed", o.seed, "master seed");
    impact->add_option("--scale", o.scale, "trip multiplier applied to the demand")->capture_default_str();
    impact->add_option("--data-resamples", o.data_resamples, "attribute resamples for data uncertainty (0 = off)");
    impact->add_option("--out", o.out, "output report.json")->required();

    auto* report = app.add_subcommand("report", "validate a report and emit tables");
    report->add_option("--in", o.in, "report.json")->required();
    report->add_option("--format", o.format, "json or csv")->capture_default_str();
    report->add_option("--out", o.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen) return cmd_gen_fixture(o, *gen);
        if (*fit) return cmd_fit_closed(o);
        if (*train) return cmd_train_surrogate(o, *train);
        if (*infer) return cmd_infer(o, *infer);
        if (*impact) return cmd_impact(o, *impact);
        if (*report) return cmd_report(o);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const GateFailure& e) {
        std::cerr << "gate failure: " << e.what() << '\n';
        return kExitGate;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
