#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "optbin/labels.hpp"
#include "optbin/learning.hpp"

namespace optbin {

/// Fully connected layer; `weights` is outputs x inputs, row-major.
struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Feed-forward classifier: ReLU on every hidden layer, softmax on the output.
/// Inputs are standardized as (x - input_shift) / input_scale before the first
/// layer; a fresh model uses the identity transform.
class MlpModel {
public:
    MlpModel() = default;

    /// He-style uniform init in +-sqrt(6 / fan_in), zero biases.
    static MlpModel initialize(const std::vector<std::size_t>& sizes, std::uint64_t seed);
    static MlpModel zeros(const std::vector<std::size_t>& sizes);

    std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().inputs; }
    std::size_t n_classes() const { return layers_.empty() ? 0 : layers_.back().outputs; }
    std::vector<std::size_t> sizes() const;
    std::size_t parameter_count() const;

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    const std::vector<double>& input_shift() const { return input_shift_; }
    const std::vector<double>& input_scale() const { return input_scale_; }
    void set_input_transform(std::vector<double> shift, std::vector<double> scale);
    void standardized(std::span<const double> x, std::span<double> out) const;

    std::vector<double> logits(std::span<const double> x) const;
    std::vector<double> forward(std::span<const double> x) const;
    BinLabel predict_bin(std::span<const double> x) const;

    nlohmann::json to_json() const;
    static MlpModel from_json(const nlohmann::json& j);

    friend bool operator==(const MlpModel& a, const MlpModel& b);

private:
    void reset_input_transform();

    std::vector<DenseLayer> layers_;
    std::vector<double> input_shift_;
    std::vector<double> input_scale_;
};

bool operator==(const MlpModel& a, const MlpModel& b);

double ce_loss(std::span<const double> probs, BinLabel true_class);

/// Argmax over class probabilities, ties to the lowest class.
BinLabel predict_bin(std::span<const double> probs);

/// Parameter-shaped gradient of the batch-mean cross-entropy.
struct MlpGradients {
    std::vector<DenseLayer> layers;
    double mean_loss = 0.0;
};

MlpGradients gradients(const MlpModel& model, std::span<const std::vector<double>> xs,
                       std::span<const BinLabel> ys);

struct MlpTrainConfig {
    std::vector<std::size_t> hidden = {128, 64};
    int n_classes = 50;
    double learning_rate = 0.00012;
    std::size_t batch_size = 32;
    int epochs = 200;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Trailing share of the training rows held out for early stopping; 0 disables.
    double validation_fraction = 0.1;
    int patience = 20;
    // Fit input_shift/input_scale to the mean and std of the fitting rows.
    bool standardize_inputs = true;

    void validate() const;
};

struct MlpTrainResult {
    MlpModel model;
    std::vector<double> epoch_loss;       // mean training CE seen during each epoch
    std::vector<double> validation_loss;  // empty when no validation slice
    std::size_t adam_steps = 0;
    int epochs_run = 0;
    bool stopped_early = false;
};

MlpTrainResult train_mlp(const TrainingSet& data, const MlpTrainConfig& cfg);

}  // namespace optbin
