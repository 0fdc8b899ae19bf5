#pragma once

// Feed-forward surrogate for the six-mode choice probabilities of the
// individual-choice model: 8 inputs -> 8 -> 12 -> 8 -> 6, ReLU hidden layers,
// logistic outputs, trained on binary cross-entropy against Monte Carlo
// targets.
//
// Inputs are the six scaled log costs centred on their mean over available
// modes (unavailable modes pinned to +20), then corTFS and corFS. Each output
// logit is the network's value plus a fixed closed-form offset: the logit of
// a probit-scaled nested-logit approximation of the same choice problem. The
// network therefore learns only the residual of that approximation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "modeshift/closed_form.hpp"
#include "modeshift/prob_backend.hpp"

namespace modeshift {

inline constexpr std::array<std::size_t, 5> kSurrogateLayout{8, 8, 12, 8, 6};
inline constexpr std::size_t kSurrogateLayers = kSurrogateLayout.size() - 1;
inline constexpr double kUnavailableSentinel = 20.0;

using SurrogateInput = std::array<double, 8>;

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;  // outputs x inputs, row-major
    std::vector<double> bias;     // outputs

    bool operator==(const DenseLayer&) const = default;
};

struct TrainingInfo {
    std::uint64_t seed = 0;
    std::uint32_t epochs = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_history;  // full-dataset loss after each epoch; not persisted

    bool operator==(const TrainingInfo&) const = default;
};

struct MlpModel {
    std::array<DenseLayer, kSurrogateLayers> layers;
    TrainingInfo info;

    /// He-initialised hidden layers; output layer zero when zero_output is set,
    /// so a fresh model reproduces the closed-form offset exactly.
    static MlpModel random(std::uint64_t seed, bool zero_output = true);

    /// Raw network output before the offset and the logistic.
    PerMode<double> forward(const SurrogateInput& input) const;

    std::size_t parameter_count() const noexcept;
    /// Flat view helpers for optimisers and gradient checks.
    double& parameter(std::size_t flat_index);
    double parameter(std::size_t flat_index) const;

    bool operator==(const MlpModel&) const = default;
};

SurrogateInput encode_input(const PerMode<double>& scaled_log_costs, double cor_tfs,
                            double cor_fs);

/// Logit of the probit-scaled nested-logit approximation; very negative on
/// unavailable modes.
PerMode<double> closed_form_offset(const PerMode<double>& scaled_log_costs, double cor_tfs,
                                   double cor_fs);

struct SurrogateSample {
    PerMode<double> scaled_log_costs{};  // +inf = unavailable
    double cor_tfs = 0.0;
    double cor_fs = 0.0;
    ChoiceProbs target{};
};

/// Distribution that training and validation inputs are drawn from.
struct SampleDistribution {
    double cost_mean = 0.0;
    double cost_spread = 1.0;
    double p_unavailable = 0.15;  // per mode
    double p_four_mode = 0.3;     // fhv and sfhv both switched off
};

/// Inputs only (targets left zero), drawn from `dist`.
std::vector<SurrogateSample> sample_inputs(std::size_t n, const SampleDistribution& dist,
                                           std::uint64_t seed);

/// Inputs from `dist`, targets from estimate_probs_mc with `oracle_draws` draws.
std::vector<SurrogateSample> gen_training_set(std::size_t n, const SampleDistribution& dist,
                                              std::size_t oracle_draws, std::uint64_t seed);

enum class Optimizer { momentum, adam };

std::string_view optimizer_name(Optimizer o);
/// Throws InvalidInput on an unknown name.
Optimizer optimizer_from_name(std::string_view name);

struct TrainConfig {
    Optimizer optimizer = Optimizer::adam;
    std::size_t epochs = 300;
    double learning_rate = 0.001;
    /// Momentum coefficient, or the first-moment decay under Adam.
    double momentum = 0.9;
    /// Second-moment decay, Adam only.
    double beta2 = 0.999;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    /// Cosine decay of the learning rate down to this fraction at the end.
    double final_lr_fraction = 0.05;
};

/// Encoded input, offset, target and output mask of one sample.
struct PreparedSample {
    SurrogateInput input{};
    PerMode<double> offset{};
    ChoiceProbs target{};
    PerMode<double> mask{};  // 1 on available modes, 0 otherwise
};

PreparedSample prepare_sample(const SurrogateSample& sample);

/// Mean binary cross-entropy per (sample, output) over available outputs.
double mean_loss(const MlpModel& model, std::span<const PreparedSample> batch);

/// Gradient of mean_loss, laid out like the model's flat parameters.
std::vector<double> loss_gradient(const MlpModel& model, std::span<const PreparedSample> batch);

/// Mini-batch Adam or momentum descent. Deterministic given config.seed.
/// Throws Divergence on a non-finite loss.
MlpModel train(std::span<const SurrogateSample> dataset, const TrainConfig& config);

/// Logistic outputs renormalised over available modes.
ChoiceProbs predict(const MlpModel& model, const PerMode<double>& scaled_log_costs,
                    double cor_tfs, double cor_fs);

class SurrogateBackend final : public ProbabilityBackend {
public:
    explicit SurrogateBackend(MlpModel model) : model_(std::move(model)) {}

    ChoiceProbs probs(const PerMode<double>& scaled_log_costs, double cor_tfs,
                      double cor_fs) const override {
        return predict(model_, scaled_log_costs, cor_tfs, cor_fs);
    }
    std::string name() const override { return "surrogate"; }
    const MlpModel& model() const noexcept { return model_; }

private:
    MlpModel model_;
};

struct ValidationReport {
    double mean_abs_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t n_points = 0;
};

/// Errors against estimate_probs_mc on fresh points drawn from `dist`. The
/// mean runs over available (point, mode) entries.
ValidationReport validate(const ProbabilityBackend& backend, std::size_t n_points,
                          std::size_t oracle_draws, std::uint64_t seed,
                          const SampleDistribution& dist = {});

/// Binary layout: "MSNNET01" magic, u32 format version, u32 layer-size count,
/// u32 sizes, u64 seed, u32 epochs, f64 initial loss, f64 final loss, then per
/// layer the row-major weights and the biases, all little-endian.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace modeshift
