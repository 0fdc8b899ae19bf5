#include "modeshift/surrogate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "modeshift/errors.hpp"
#include "modeshift/mc_simulator.hpp"
#include "modeshift/parallel.hpp"
#include "modeshift/rng.hpp"

namespace modeshift {

namespace {

constexpr std::size_t kMaxWidth = 12;
using Vec = std::array<double, kMaxWidth>;

// Utility scale at which a Gumbel difference (variance pi^2/3) matches a
// difference of two unit normals (variance 2): pi / sqrt(6).
constexpr double kProbitScale = std::numbers::pi / 2.449489742783178;
constexpr double kProbFloor = 1e-9;
constexpr double kMinTau = 1e-3;
constexpr char kMagic[8] = {'M', 'S', 'N', 'N', 'E', 'T', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

struct ForwardTrace {
    std::array<Vec, kSurrogateLayers> pre{};       // pre-activations per layer
    std::array<Vec, kSurrogateLayers + 1> act{};  // act[0] = input
};

void forward_trace(const MlpModel& model, const SurrogateInput& input, ForwardTrace& tr) {
    std::copy(input.begin(), input.end(), tr.act[0].begin());
    for (std::size_t l = 0; l < kSurrogateLayers; ++l) {
        const DenseLayer& layer = model.layers[l];
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            double z = layer.bias[o];
            const double* w = &layer.weights[o * layer.inputs];
            for (std::size_t i = 0; i < layer.inputs; ++i) z += w[i] * tr.act[l][i];
            tr.pre[l][o] = z;
            const bool hidden = l + 1 < kSurrogateLayers;
            tr.act[l + 1][o] = hidden ? std::max(z, 0.0) : z;
        }
    }
}

std::size_t active_entries(std::span<const PreparedSample> batch) {
    double n = 0.0;
    for (const auto& s : batch) {
        for (double m : s.mask) n += m;
    }
    return static_cast<std::size_t>(n);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_uint(std::istream& in, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) throw SchemaMismatch("surrogate file truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_uint(in, 8)); }

}  // namespace

MlpModel MlpModel::random(std::uint64_t seed, bool zero_output) {
    MlpModel m;
    RngStream rng(seed, 0x1417);
    for (std::size_t l = 0; l < kSurrogateLayers; ++l) {
        DenseLayer& layer = m.layers[l];
        layer.inputs = kSurrogateLayout[l];
        layer.outputs = kSurrogateLayout[l + 1];
        layer.weights.assign(layer.inputs * layer.outputs, 0.0);
        layer.bias.assign(layer.outputs, 0.0);
        const bool output = l + 1 == kSurrogateLayers;
        if (output && zero_output) continue;
        const double scale = std::sqrt(2.0 / static_cast<double>(layer.inputs));
        for (double& w : layer.weights) w = scale * rng.normal();
        for (double& b : layer.bias) b = 0.1 * rng.normal();
    }
    m.info.seed = seed;
    return m;
}

PerMode<double> MlpModel::forward(const SurrogateInput& input) const {
    ForwardTrace tr;
    forward_trace(*this, input, tr);
    PerMode<double> out{};
    std::copy_n(tr.act[kSurrogateLayers].begin(), kNumModes, out.begin());
    return out;
}

std::size_t MlpModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

double& MlpModel::parameter(std::size_t k) {
    for (auto& l : layers) {
        if (k < l.weights.size()) return l.weights[k];
        k -= l.weights.size();
        if (k < l.bias.size()) return l.bias[k];
        k -= l.bias.size();
    }
    throw InvalidInput("parameter index out of range");
}

double MlpModel::parameter(std::size_t k) const {
    return const_cast<MlpModel*>(this)->parameter(k);
}

SurrogateInput encode_input(const PerMode<double>& x, double cor_tfs, double cor_fs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : x) {
        if (v != kInf) {
            sum += v;
            ++n;
        }
    }
    const double centre = n > 0 ? sum / static_cast<double>(n) : 0.0;
    SurrogateInput in{};
    for (std::size_t i = 0; i < kNumModes; ++i) {
        in[i] = x[i] == kInf ? kUnavailableSentinel
                             : std::clamp(x[i] - centre, -kUnavailableSentinel,
                                          kUnavailableSentinel);
    }
    in[6] = cor_tfs;
    in[7] = cor_fs;
    return in;
}

PerMode<double> closed_form_offset(const PerMode<double>& x, double cor_tfs, double cor_fs) {
    PerMode<double> v{};
    for (std::size_t i = 0; i < kNumModes; ++i) v[i] = x[i] == kInf ? -kInf : -kProbitScale * x[i];
    const double tau_outer = std::max(std::sqrt(std::max(1.0 - cor_tfs, 0.0)), kMinTau);
    const double tau_inner = std::max(std::sqrt(std::max(1.0 - cor_fs, 0.0)), kMinTau);
    const ChoiceProbs p = nested_probs_from_utilities(v, tau_outer, tau_inner);
    PerMode<double> offset{};
    for (std::size_t i = 0; i < kNumModes; ++i) {
        const double q = std::clamp(p[i], kProbFloor, 1.0 - kProbFloor);
        offset[i] = std::log(q) - std::log1p(-q);
    }
    return offset;
}

std::vector<SurrogateSample> sample_inputs(std::size_t n, const SampleDistribution& dist,
                                           std::uint64_t seed) {
    std::vector<SurrogateSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        RngStream rng(seed, 0x5A3, i);
        SurrogateSample& s = out[i];
        for (double& x : s.scaled_log_costs) x = dist.cost_mean + dist.cost_spread * rng.normal();
        const bool four_mode = rng.uniform() < dist.p_four_mode;
        ModeSet avail = ModeSet::all();
        for (Mode m : kAllModes) {
            if (rng.uniform() < dist.p_unavailable) avail.erase(m);
        }
        if (four_mode) {
            avail.erase(Mode::fhv);
            avail.erase(Mode::sfhv);
        }
        if (avail.empty()) avail.insert(kAllModes[rng.next_u64() % kNumModes]);
        for (Mode m : kAllModes) {
            if (!avail.contains(m)) s.scaled_log_costs[idx(m)] = kInf;
        }
        // Uniform on the triangle 0 <= corTFS < corFS <= 1.
        const double hi = std::sqrt(rng.uniform());
        s.cor_fs = hi;
        s.cor_tfs = hi * rng.uniform();
    }
    return out;
}

std::vector<SurrogateSample> gen_training_set(std::size_t n, const SampleDistribution& dist,
                                              std::size_t oracle_draws, std::uint64_t seed) {
    if (n == 0) throw InvalidInput("training set size must be >= 1");
    if (oracle_draws == 0) throw InvalidInput("oracle draws must be >= 1");
    auto samples = sample_inputs(n, dist, seed);
    parallel_for(n, [&](std::size_t i) {
        SurrogateSample& s = samples[i];
        s.target = estimate_probs_mc(s.scaled_log_costs, s.cor_tfs, s.cor_fs, oracle_draws,
                                     mix64(seed ^ mix64(i + 0x7A11)));
    });
    return samples;
}

PreparedSample prepare_sample(const SurrogateSample& s) {
    PreparedSample p;
    p.input = encode_input(s.scaled_log_costs, s.cor_tfs, s.cor_fs);
    p.offset = closed_form_offset(s.scaled_log_costs, s.cor_tfs, s.cor_fs);
    p.target = s.target;
    for (std::size_t i = 0; i < kNumModes; ++i) p.mask[i] = s.scaled_log_costs[i] == kInf ? 0.0 : 1.0;
    return p;
}

double mean_loss(const MlpModel& model, std::span<const PreparedSample> batch) {
    const std::size_t n = active_entries(batch);
    if (n == 0) return 0.0;
    double total = 0.0;
    ForwardTrace tr;
    for (const auto& s : batch) {
        forward_trace(model, s.input, tr);
        for (std::size_t m = 0; m < kNumModes; ++m) {
            if (s.mask[m] == 0.0) continue;
            const double logit = tr.act[kSurrogateLayers][m] + s.offset[m];
            total += softplus(logit) - s.target[m] * logit;
        }
    }
    return total / static_cast<double>(n);
}

std::vector<double> loss_gradient(const MlpModel& model, std::span<const PreparedSample> batch) {
    std::vector<double> grad(model.parameter_count(), 0.0);
    const std::size_t n = active_entries(batch);
    if (n == 0) return grad;
    const double inv_n = 1.0 / static_cast<double>(n);

    std::array<std::size_t, kSurrogateLayers> w_offset{};
    std::array<std::size_t, kSurrogateLayers> b_offset{};
    std::size_t pos = 0;
    for (std::size_t l = 0; l < kSurrogateLayers; ++l) {
        w_offset[l] = pos;
        pos += model.layers[l].weights.size();
        b_offset[l] = pos;
        pos += model.layers[l].bias.size();
    }

    ForwardTrace tr;
    for (const auto& s : batch) {
        forward_trace(model, s.input, tr);
        Vec delta{};
        for (std::size_t m = 0; m < kNumModes; ++m) {
            const double logit = tr.act[kSurrogateLayers][m] + s.offset[m];
            delta[m] = s.mask[m] * (sigmoid(logit) - s.target[m]) * inv_n;
        }
        for (std::size_t l = kSurrogateLayers; l-- > 0;) {
            const DenseLayer& layer = model.layers[l];
            Vec prev{};
            for (std::size_t o = 0; o < layer.outputs; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                grad[b_offset[l] + o] += d;
                double* g = &grad[w_offset[l] + o * layer.inputs];
                const double* w = &layer.weights[o * layer.inputs];
                for (std::size_t i = 0; i < layer.inputs; ++i) {
                    g[i] += d * tr.act[l][i];
                    prev[i] += d * w[i];
                }
            }
            if (l > 0) {
                for (std::size_t i = 0; i < layer.inputs; ++i) {
                    delta[i] = tr.pre[l - 1][i] > 0.0 ? prev[i] : 0.0;
                }
            }
        }
    }
    return grad;
}

std::string_view optimizer_name(Optimizer o) { return o == Optimizer::adam ? "adam" : "momentum"; }

Optimizer optimizer_from_name(std::string_view name) {
    if (name == "adam") return Optimizer::adam;
    if (name == "momentum") return Optimizer::momentum;
    throw InvalidInput("unknown optimizer '" + std::string(name) + "' (expected adam or momentum)");
}

MlpModel train(std::span<const SurrogateSample> dataset, const TrainConfig& config) {
    if (dataset.empty()) throw InvalidInput("cannot train on an empty dataset");
    if (config.batch_size == 0 || config.epochs == 0) {
        throw InvalidInput("batch size and epochs must be >= 1");
    }
    if (!(config.learning_rate > 0.0) || !(config.momentum >= 0.0 && config.momentum < 1.0) ||
        !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
        throw InvalidInput("learning rate must be > 0 and moment decays in [0, 1)");
    }
    std::vector<PreparedSample> prepared(dataset.size());
    parallel_for(dataset.size(), [&](std::size_t i) { prepared[i] = prepare_sample(dataset[i]); });

    MlpModel model = MlpModel::random(config.seed);
    const std::size_t n_params = model.parameter_count();
    std::vector<double> velocity(n_params, 0.0);
    std::vector<double> second(n_params, 0.0);
    double decay1 = 1.0;
    double decay2 = 1.0;
    std::vector<std::size_t> order(prepared.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    model.info.initial_loss = mean_loss(model, prepared);
    std::vector<PreparedSample> batch;
    batch.reserve(config.batch_size);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        RngStream shuffle(config.seed, 0x5EED, epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle.next_u64() % i]);
        }
        const double progress = static_cast<double>(epoch) / static_cast<double>(config.epochs);
        const double lr = config.learning_rate *
                          (config.final_lr_fraction +
                           (1.0 - config.final_lr_fraction) * 0.5 *
                               (1.0 + std::cos(std::numbers::pi * progress)));
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (std::size_t k = start; k < end; ++k) batch.push_back(prepared[order[k]]);
            const auto grad = loss_gradient(model, batch);
            if (config.optimizer == Optimizer::momentum) {
                for (std::size_t p = 0; p < n_params; ++p) {
                    velocity[p] = config.momentum * velocity[p] - lr * grad[p];
                    model.parameter(p) += velocity[p];
                }
                continue;
            }
            // Adam with bias-corrected moments.
            decay1 *= config.momentum;
            decay2 *= config.beta2;
            for (std::size_t p = 0; p < n_params; ++p) {
                velocity[p] = config.momentum * velocity[p] + (1.0 - config.momentum) * grad[p];
                second[p] = config.beta2 * second[p] + (1.0 - config.beta2) * grad[p] * grad[p];
                const double m_hat = velocity[p] / (1.0 - decay1);
                const double v_hat = second[p] / (1.0 - decay2);
                model.parameter(p) -= lr * m_hat / (std::sqrt(v_hat) + 1e-8);
            }
        }
        const double loss = mean_loss(model, prepared);
        if (!std::isfinite(loss)) {
            throw Divergence("surrogate training diverged (non-finite loss); lower the learning rate");
        }
        model.info.loss_history.push_back(loss);
    }
    model.info.seed = config.seed;
    model.info.epochs = static_cast<std::uint32_t>(config.epochs);
    model.info.final_loss = model.info.loss_history.back();
    return model;
}

ChoiceProbs predict(const MlpModel& model, const PerMode<double>& x, double cor_tfs,
                    double cor_fs) {
    bool any = false;
    for (double v : x) {
        if (std::isnan(v) || v == -kInf) throw InvalidCost("scaled log costs must be > -inf");
        any = any || v != kInf;
    }
    if (!any) throw NoAvailableMode("no available mode");
    const PerMode<double> raw = model.forward(encode_input(x, cor_tfs, cor_fs));
    const PerMode<double> offset = closed_form_offset(x, cor_tfs, cor_fs);
    ChoiceProbs p{};
    double z = 0.0;
    for (std::size_t i = 0; i < kNumModes; ++i) {
        if (x[i] == kInf) continue;
        p[i] = sigmoid(raw[i] + offset[i]);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

ValidationReport validate(const ProbabilityBackend& backend, std::size_t n_points,
                          std::size_t oracle_draws, std::uint64_t seed,
                          const SampleDistribution& dist) {
    const auto points = sample_inputs(n_points, dist, seed);
    std::vector<std::array<double, 3>> per_point(n_points);  // sum, count, max
    parallel_for(n_points, [&](std::size_t i) {
        const auto& s = points[i];
        const ChoiceProbs truth = estimate_probs_mc(s.scaled_log_costs, s.cor_tfs, s.cor_fs,
                                                    oracle_draws, mix64(seed ^ mix64(i + 0xC0DE)));
        const ChoiceProbs got = backend.probs(s.scaled_log_costs, s.cor_tfs, s.cor_fs);
        std::array<double, 3> acc{};
        for (std::size_t m = 0; m < kNumModes; ++m) {
            const double e = std::abs(got[m] - truth[m]);
            acc[2] = std::max(acc[2], e);
            if (s.scaled_log_costs[m] != kInf) {
                acc[0] += e;
                acc[1] += 1.0;
            }
        }
        per_point[i] = acc;
    });
    ValidationReport r;
    r.n_points = n_points;
    double sum = 0.0;
    double count = 0.0;
    for (const auto& a : per_point) {
        sum += a[0];
        count += a[1];
        r.max_abs_err = std::max(r.max_abs_err, a[2]);
    }
    r.mean_abs_err = count > 0.0 ? sum / count : 0.0;
    return r;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingFile("cannot open '" + path.string() + "' for writing");
    out.write(kMagic, sizeof kMagic);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(kSurrogateLayout.size()));
    for (std::size_t s : kSurrogateLayout) put_u32(out, static_cast<std::uint32_t>(s));
    put_u64(out, model.info.seed);
    put_u32(out, model.info.epochs);
    put_f64(out, model.info.initial_loss);
    put_f64(out, model.info.final_loss);
    for (const auto& layer : model.layers) {
        for (double w : layer.weights) put_f64(out, w);
        for (double b : layer.bias) put_f64(out, b);
    }
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile("surrogate model '" + path.string() + "' not found");
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic)) {
        throw SchemaMismatch("'" + path.string() + "' is not a surrogate model file");
    }
    if (get_uint(in, 4) != kFormatVersion) throw SchemaMismatch("unsupported surrogate format version");
    if (get_uint(in, 4) != kSurrogateLayout.size()) {
        throw SchemaMismatch("surrogate architecture mismatch (layer count)");
    }
    for (std::size_t s : kSurrogateLayout) {
        if (get_uint(in, 4) != s) throw SchemaMismatch("surrogate architecture mismatch (layer width)");
    }
    MlpModel m = MlpModel::random(0, true);
    m.info.seed = get_uint(in, 8);
    m.info.epochs = static_cast<std::uint32_t>(get_uint(in, 4));
    m.info.initial_loss = get_f64(in);
    m.info.final_loss = get_f64(in);
    for (auto& layer : m.layers) {
        for (double& w : layer.weights) w = get_f64(in);
        for (double& b : layer.bias) b = get_f64(in);
    }
    for (std::size_t p = 0; p < m.parameter_count(); ++p) {
        if (!std::isfinite(m.parameter(p))) throw SchemaMismatch("surrogate weights must be finite");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw SchemaMismatch("trailing bytes in surrogate file");
    return m;
}

}  // namespace modeshift
