#include "optbin/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "optbin/errors.hpp"

namespace optbin {

namespace {

constexpr int kModelFormatVersion = 1;

std::vector<DenseLayer> shaped_layers(const std::vector<std::size_t>& sizes) {
    if (sizes.size() < 2) throw ValidationError("network needs an input and an output size");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        if (sizes[i] == 0 || sizes[i + 1] == 0) throw ValidationError("layer sizes must be positive");
        DenseLayer l;
        l.inputs = sizes[i];
        l.outputs = sizes[i + 1];
        l.weights.assign(l.inputs * l.outputs, 0.0);
        l.bias.assign(l.outputs, 0.0);
        layers.push_back(std::move(l));
    }
    return layers;
}

// Per-sample activations, reused across a batch.
struct Workspace {
    std::vector<double> input;              // standardized sample
    std::vector<std::vector<double>> pre;   // z per layer
    std::vector<std::vector<double>> post;  // a per layer; softmax output last
    std::vector<std::vector<double>> delta;

    explicit Workspace(const std::vector<DenseLayer>& layers) {
        if (!layers.empty()) input.resize(layers.front().inputs);
        for (const auto& l : layers) {
            pre.emplace_back(l.outputs);
            post.emplace_back(l.outputs);
            delta.emplace_back(l.outputs);
        }
    }
};

void affine(const DenseLayer& l, std::span<const double> in, std::span<double> out) {
    for (std::size_t o = 0; o < l.outputs; ++o) {
        const double* w = l.weights.data() + o * l.inputs;
        double s = l.bias[o];
        for (std::size_t i = 0; i < l.inputs; ++i) s += w[i] * in[i];
        out[o] = s;
    }
}

void run_forward(const MlpModel& model, std::span<const double> x, Workspace& ws) {
    const auto& layers = model.layers();
    model.standardized(x, ws.input);
    std::span<const double> in = ws.input;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        affine(layers[k], in, ws.pre[k]);
        auto& a = ws.post[k];
        if (k + 1 < layers.size()) {
            for (std::size_t o = 0; o < a.size(); ++o) a[o] = std::max(0.0, ws.pre[k][o]);
        } else {
            std::copy(ws.pre[k].begin(), ws.pre[k].end(), a.begin());
            softmax_inplace(a);
        }
        in = a;
    }
}

// Adds this sample's loss gradient into `grad`; returns the sample loss.
double accumulate_backward(const MlpModel& model, std::span<const double> x, BinLabel y, Workspace& ws,
                           std::vector<DenseLayer>& grad) {
    const auto& layers = model.layers();
    run_forward(model, x, ws);
    const std::size_t last = layers.size() - 1;
    const auto cls = static_cast<std::size_t>(y.value - 1);
    const double loss = cross_entropy(ws.post[last], y);

    // softmax + cross-entropy: dL/dz = p - onehot
    auto& d_out = ws.delta[last];
    std::copy(ws.post[last].begin(), ws.post[last].end(), d_out.begin());
    d_out[cls] -= 1.0;

    for (std::size_t k = layers.size(); k-- > 0;) {
        const auto& l = layers[k];
        auto& g = grad[k];
        const auto& d = ws.delta[k];
        std::span<const double> in = k == 0 ? std::span<const double>(ws.input)
                                            : std::span<const double>(ws.post[k - 1]);
        for (std::size_t o = 0; o < l.outputs; ++o) {
            const double dv = d[o];
            g.bias[o] += dv;
            if (dv == 0.0) continue;
            double* gw = g.weights.data() + o * l.inputs;
            for (std::size_t i = 0; i < l.inputs; ++i) gw[i] += dv * in[i];
        }
        if (k == 0) break;
        auto& d_prev = ws.delta[k - 1];
        std::fill(d_prev.begin(), d_prev.end(), 0.0);
        for (std::size_t o = 0; o < l.outputs; ++o) {
            const double dv = d[o];
            if (dv == 0.0) continue;
            const double* w = l.weights.data() + o * l.inputs;
            for (std::size_t i = 0; i < l.inputs; ++i) d_prev[i] += w[i] * dv;
        }
        const auto& z_prev = ws.pre[k - 1];
        for (std::size_t i = 0; i < d_prev.size(); ++i) {
            if (!(z_prev[i] > 0.0)) d_prev[i] = 0.0;
        }
    }
    return loss;
}

void zero_fill(std::vector<DenseLayer>& layers) {
    for (auto& l : layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

void check_input(const MlpModel& m, std::span<const double> x) {
    if (x.size() != m.input_size()) {
        throw ValidationError("input has " + std::to_string(x.size()) + " features, model expects " +
                              std::to_string(m.input_size()));
    }
}

// Flat view over every parameter, weights then bias, layer by layer.
template <typename Fn>
void for_each_param(std::vector<DenseLayer>& a, std::vector<DenseLayer>& b,
                    std::vector<DenseLayer>& c, std::vector<DenseLayer>& d, Fn&& fn) {
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t i = 0; i < a[k].weights.size(); ++i) {
            fn(a[k].weights[i], b[k].weights[i], c[k].weights[i], d[k].weights[i]);
        }
        for (std::size_t i = 0; i < a[k].bias.size(); ++i) {
            fn(a[k].bias[i], b[k].bias[i], c[k].bias[i], d[k].bias[i]);
        }
    }
}

double mean_loss(const MlpModel& model, const TrainingSet& data, std::span<const std::size_t> rows) {
    if (rows.empty()) return 0.0;
    Workspace ws(model.layers());
    double sum = 0.0;
    for (std::size_t r : rows) {
        run_forward(model, data.features[r], ws);
        sum += cross_entropy(ws.post.back(), data.labels[r]);
    }
    return sum / static_cast<double>(rows.size());
}

}  // namespace

void MlpModel::reset_input_transform() {
    input_shift_.assign(input_size(), 0.0);
    input_scale_.assign(input_size(), 1.0);
}

void MlpModel::set_input_transform(std::vector<double> shift, std::vector<double> scale) {
    if (shift.size() != input_size() || scale.size() != input_size()) {
        throw ValidationError("input transform size mismatch");
    }
    for (double s : scale) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("input scale must be positive");
    }
    input_shift_ = std::move(shift);
    input_scale_ = std::move(scale);
}

void MlpModel::standardized(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - input_shift_[i]) / input_scale_[i];
}

MlpModel MlpModel::initialize(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    MlpModel m;
    m.layers_ = shaped_layers(sizes);
    m.reset_input_transform();
    std::mt19937_64 rng(seed);
    for (auto& l : m.layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(l.inputs));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : l.weights) w = dist(rng);
    }
    return m;
}

MlpModel MlpModel::zeros(const std::vector<std::size_t>& sizes) {
    MlpModel m;
    m.layers_ = shaped_layers(sizes);
    m.reset_input_transform();
    return m;
}

std::vector<std::size_t> MlpModel::sizes() const {
    std::vector<std::size_t> s;
    if (layers_.empty()) return s;
    s.push_back(layers_.front().inputs);
    for (const auto& l : layers_) s.push_back(l.outputs);
    return s;
}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

std::vector<double> MlpModel::logits(std::span<const double> x) const {
    check_input(*this, x);
    Workspace ws(layers_);
    run_forward(*this, x, ws);
    return ws.pre.back();
}

std::vector<double> MlpModel::forward(std::span<const double> x) const {
    check_input(*this, x);
    Workspace ws(layers_);
    run_forward(*this, x, ws);
    return ws.post.back();
}

BinLabel MlpModel::predict_bin(std::span<const double> x) const {
    return optbin::predict_bin(forward(x));
}

nlohmann::json MlpModel::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_) {
        layers.push_back({{"inputs", l.inputs},
                          {"outputs", l.outputs},
                          {"weights", l.weights},
                          {"bias", l.bias}});
    }
    return {{"format", "optbin-mlp"},
            {"version", kModelFormatVersion},
            {"activations", "relu,...,softmax"},
            {"input_shift", input_shift_},
            {"input_scale", input_scale_},
            {"layers", layers}};
}

MlpModel MlpModel::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "optbin-mlp" || j.value("version", 0) != kModelFormatVersion) {
        throw ValidationError("not an optbin-mlp v1 model");
    }
    MlpModel m;
    for (const auto& jl : j.at("layers")) {
        DenseLayer l;
        l.inputs = jl.at("inputs").get<std::size_t>();
        l.outputs = jl.at("outputs").get<std::size_t>();
        l.weights = jl.at("weights").get<std::vector<double>>();
        l.bias = jl.at("bias").get<std::vector<double>>();
        if (l.weights.size() != l.inputs * l.outputs || l.bias.size() != l.outputs) {
            throw ValidationError("mlp layer shape mismatch");
        }
        if (!m.layers_.empty() && m.layers_.back().outputs != l.inputs) {
            throw ValidationError("mlp layers do not chain");
        }
        m.layers_.push_back(std::move(l));
    }
    if (m.layers_.empty()) throw ValidationError("mlp model has no layers");
    m.reset_input_transform();
    if (j.contains("input_shift")) {
        m.set_input_transform(j.at("input_shift").get<std::vector<double>>(),
                              j.at("input_scale").get<std::vector<double>>());
    }
    return m;
}

bool operator==(const MlpModel& a, const MlpModel& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t k = 0; k < a.layers_.size(); ++k) {
        const auto& x = a.layers_[k];
        const auto& y = b.layers_[k];
        if (x.inputs != y.inputs || x.outputs != y.outputs || x.weights != y.weights ||
            x.bias != y.bias) {
            return false;
        }
    }
    return a.input_shift_ == b.input_shift_ && a.input_scale_ == b.input_scale_;
}

double ce_loss(std::span<const double> probs, BinLabel true_class) {
    return cross_entropy(probs, true_class);
}

BinLabel predict_bin(std::span<const double> probs) {
    return BinLabel{static_cast<int>(argmax(probs)) + 1};
}

MlpGradients gradients(const MlpModel& model, std::span<const std::vector<double>> xs,
                       std::span<const BinLabel> ys) {
    if (xs.empty() || xs.size() != ys.size()) throw ValidationError("gradient batch is empty or ragged");
    MlpGradients g;
    g.layers = shaped_layers(model.sizes());
    Workspace ws(model.layers());
    double loss = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        check_input(model, xs[s]);
        if (ys[s].value < 1 || static_cast<std::size_t>(ys[s].value) > model.n_classes()) {
            throw ValidationError("label outside model classes");
        }
        loss += accumulate_backward(model, xs[s], ys[s], ws, g.layers);
    }
    const double scale = 1.0 / static_cast<double>(xs.size());
    for (auto& l : g.layers) {
        for (double& w : l.weights) w *= scale;
        for (double& b : l.bias) b *= scale;
    }
    g.mean_loss = loss * scale;
    return g;
}

void MlpTrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (batch_size < 1) throw ValidationError("batch size must be at least 1");
    if (epochs < 1) throw ValidationError("epochs must be at least 1");
    if (n_classes < 2) throw ValidationError("need at least two classes");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ValidationError("validation fraction must lie in [0, 1)");
    }
    if (patience < 1) throw ValidationError("patience must be at least 1");
}

MlpTrainResult train_mlp(const TrainingSet& data, const MlpTrainConfig& cfg) {
    cfg.validate();
    data.validate(cfg.n_classes);

    const std::size_t n = data.size();
    auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
    if (n_val >= n) n_val = 0;
    const std::size_t n_fit = n - n_val;
    std::vector<std::size_t> val_rows(n_val);
    std::iota(val_rows.begin(), val_rows.end(), n_fit);

    std::vector<std::size_t> sizes{data.dimension()};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(static_cast<std::size_t>(cfg.n_classes));

    MlpTrainResult result;
    result.model = MlpModel::initialize(sizes, cfg.seed);
    if (cfg.standardize_inputs) {
        const std::size_t d = data.dimension();
        std::vector<double> mean(d, 0.0);
        std::vector<double> scale(d, 0.0);
        for (std::size_t r = 0; r < n_fit; ++r) {
            for (std::size_t i = 0; i < d; ++i) mean[i] += data.features[r][i];
        }
        for (double& m : mean) m /= static_cast<double>(n_fit);
        for (std::size_t r = 0; r < n_fit; ++r) {
            for (std::size_t i = 0; i < d; ++i) {
                const double dv = data.features[r][i] - mean[i];
                scale[i] += dv * dv;
            }
        }
        // Constant columns keep unit scale.
        for (double& s : scale) {
            s = std::sqrt(s / static_cast<double>(n_fit));
            if (!(s > 1e-12)) s = 1.0;
        }
        result.model.set_input_transform(std::move(mean), std::move(scale));
    }
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    auto& layers = result.model.layers();
    auto grad = shaped_layers(sizes);
    auto first_moment = shaped_layers(sizes);
    auto second_moment = shaped_layers(sizes);
    Workspace ws(layers);

    std::vector<std::size_t> order(n_fit);
    std::iota(order.begin(), order.end(), 0);

    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    double beta1_pow = 1.0;
    double beta2_pow = 1.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_fit; start += cfg.batch_size) {
            const std::size_t stop = std::min(n_fit, start + cfg.batch_size);
            zero_fill(grad);
            for (std::size_t s = start; s < stop; ++s) {
                const auto r = order[s];
                epoch_loss += accumulate_backward(result.model, data.features[r], data.labels[r], ws, grad);
            }
            const double scale = 1.0 / static_cast<double>(stop - start);
            beta1_pow *= cfg.beta1;
            beta2_pow *= cfg.beta2;
            const double step = cfg.learning_rate * std::sqrt(1.0 - beta2_pow) / (1.0 - beta1_pow);
            for_each_param(layers, grad, first_moment, second_moment,
                           [&](double& p, double& g, double& m, double& v) {
                               const double gs = g * scale;
                               m = cfg.beta1 * m + (1.0 - cfg.beta1) * gs;
                               v = cfg.beta2 * v + (1.0 - cfg.beta2) * gs * gs;
                               p -= step * m / (std::sqrt(v) + cfg.epsilon);
                           });
            ++result.adam_steps;
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(n_fit));
        result.epochs_run = epoch + 1;

        if (n_val > 0) {
            const double vl = mean_loss(result.model, data, val_rows);
            result.validation_loss.push_back(vl);
            if (vl < best_val) {
                best_val = vl;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                result.stopped_early = true;
                break;
            }
        }
    }
    return result;
}

}  // namespace optbin
