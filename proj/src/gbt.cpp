#include "optbin/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "optbin/errors.hpp"

namespace optbin {

namespace {

constexpr int kModelFormatVersion = 1;

// Threshold strictly between two sorted distinct values, so that x <= t
// selects exactly the lower side even for adjacent doubles.
double split_point(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

struct NodeStats {
    double sum = 0.0;
    std::size_t count = 0;
};

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

// Running left-side state while one column is swept in sorted order.
struct SweepState {
    double left_sum = 0.0;
    std::size_t left_count = 0;
    double last_value = 0.0;
};

// Renumbers nodes into preorder (root, left subtree, right subtree), the
// layout the JSON dump reproduces.
std::vector<TreeNode> to_preorder(const std::vector<TreeNode>& nodes) {
    std::vector<TreeNode> out;
    out.reserve(nodes.size());
    auto visit = [&](auto&& self, std::size_t i) -> int {
        const int id = static_cast<int>(out.size());
        out.push_back(nodes[i]);
        if (!nodes[i].is_leaf()) {
            const int l = self(self, static_cast<std::size_t>(nodes[i].left));
            const int r = self(self, static_cast<std::size_t>(nodes[i].right));
            out[static_cast<std::size_t>(id)].left = l;
            out[static_cast<std::size_t>(id)].right = r;
        }
        return id;
    };
    visit(visit, 0);
    return out;
}

}  // namespace

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw ValidationError("tree needs at least one node");
}

double RegressionTree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                            : n.right);
    }
    return nodes_[i].value;
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes_[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

nlohmann::json RegressionTree::to_json() const {
    nlohmann::json out = nlohmann::json::array();
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const auto& n = nodes_[stack.back()];
        stack.pop_back();
        if (n.is_leaf()) {
            out.push_back({{"leaf", n.value}});
        } else {
            out.push_back({{"split", {n.feature, n.threshold}}});
            stack.push_back(static_cast<std::size_t>(n.right));
            stack.push_back(static_cast<std::size_t>(n.left));
        }
    }
    return out;
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw ValidationError("tree dump must be a non-empty array");
    std::vector<TreeNode> nodes;
    std::size_t pos = 0;
    auto build = [&](auto&& self) -> int {
        if (pos >= j.size()) throw ValidationError("truncated tree dump");
        const auto& rec = j[pos++];
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        if (rec.contains("leaf")) {
            nodes[static_cast<std::size_t>(id)].value = rec.at("leaf").get<double>();
            return id;
        }
        const auto& s = rec.at("split");
        nodes[static_cast<std::size_t>(id)].feature = s.at(0).get<int>();
        nodes[static_cast<std::size_t>(id)].threshold = s.at(1).get<double>();
        const int l = self(self);
        const int r = self(self);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    };
    build(build);
    if (pos != j.size()) throw ValidationError("trailing records in tree dump");
    return RegressionTree(std::move(nodes));
}

SortedColumns::SortedColumns(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("no samples");
    samples_ = rows.size();
    const auto d = rows.front().size();
    columns_.assign(d, std::vector<double>(samples_));
    order_.assign(d, std::vector<std::uint32_t>(samples_));
    for (std::size_t s = 0; s < samples_; ++s) {
        if (rows[s].size() != d) throw ValidationError("ragged feature matrix");
        for (std::size_t f = 0; f < d; ++f) columns_[f][s] = rows[s][f];
    }
    for (std::size_t f = 0; f < d; ++f) {
        auto& ord = order_[f];
        std::iota(ord.begin(), ord.end(), 0U);
        const auto& col = columns_[f];
        std::stable_sort(ord.begin(), ord.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
}

RegressionTree fit_tree(const SortedColumns& columns, std::span<const double> targets,
                        const TreeConfig& cfg) {
    const std::size_t n = columns.samples();
    if (targets.size() != n) throw ValidationError("targets/features length mismatch");

    std::vector<TreeNode> nodes(1);
    std::vector<NodeStats> stats(1);
    for (double t : targets) stats[0].sum += t;
    stats[0].count = n;

    // Node of each sample among the nodes still open for splitting; -1 once settled.
    std::vector<int> slot_of(n, 0);
    std::vector<int> open{0};

    for (int level = 0; level < cfg.max_depth && !open.empty(); ++level) {
        const std::size_t k = open.size();
        std::vector<SplitCandidate> best(k);
        std::vector<SweepState> sweep(k);

        for (std::size_t f = 0; f < columns.features(); ++f) {
            std::fill(sweep.begin(), sweep.end(), SweepState{});
            for (std::uint32_t s : columns.order(f)) {
                const int slot = slot_of[s];
                if (slot < 0) continue;
                auto& st = sweep[static_cast<std::size_t>(slot)];
                const double v = columns.value(f, s);
                const auto& total = stats[static_cast<std::size_t>(open[static_cast<std::size_t>(slot)])];
                if (st.left_count > 0 && v > st.last_value) {
                    const double right_sum = total.sum - st.left_sum;
                    const auto right_count = total.count - st.left_count;
                    const double gain = st.left_sum * st.left_sum / static_cast<double>(st.left_count) +
                                        right_sum * right_sum / static_cast<double>(right_count) -
                                        total.sum * total.sum / static_cast<double>(total.count);
                    auto& b = best[static_cast<std::size_t>(slot)];
                    if (gain > b.gain) {
                        b.gain = gain;
                        b.feature = static_cast<int>(f);
                        b.threshold = split_point(st.last_value, v);
                    }
                }
                st.left_sum += targets[s];
                ++st.left_count;
                st.last_value = v;
            }
        }

        // Children of split nodes become the next level's open slots.
        std::vector<int> next_open;
        std::vector<int> remap(k, -1);
        for (std::size_t slot = 0; slot < k; ++slot) {
            const int id = open[slot];
            const auto& b = best[slot];
            if (stats[static_cast<std::size_t>(id)].count < cfg.min_samples_split || b.feature < 0 ||
                !(b.gain > cfg.min_gain)) {
                continue;
            }
            const int left = static_cast<int>(nodes.size());
            auto& node = nodes[static_cast<std::size_t>(id)];
            node.feature = b.feature;
            node.threshold = b.threshold;
            node.left = left;
            node.right = left + 1;
            nodes.resize(nodes.size() + 2);
            stats.resize(stats.size() + 2);
            remap[slot] = static_cast<int>(next_open.size());
            next_open.push_back(left);
            next_open.push_back(left + 1);
        }
        for (std::size_t s = 0; s < n; ++s) {
            const int slot = slot_of[s];
            if (slot < 0) continue;
            const int base = remap[static_cast<std::size_t>(slot)];
            if (base < 0) {
                slot_of[s] = -1;
                continue;
            }
            const auto& parent = nodes[static_cast<std::size_t>(open[static_cast<std::size_t>(slot)])];
            const bool left = columns.value(static_cast<std::size_t>(parent.feature), s) <= parent.threshold;
            const int child_slot = base + (left ? 0 : 1);
            slot_of[s] = child_slot;
            auto& cs = stats[static_cast<std::size_t>(next_open[static_cast<std::size_t>(child_slot)])];
            cs.sum += targets[s];
            ++cs.count;
        }
        open = std::move(next_open);
    }

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].is_leaf() && stats[i].count > 0) {
            nodes[i].value = stats[i].sum / static_cast<double>(stats[i].count);
        }
    }
    return RegressionTree(to_preorder(nodes));
}

RegressionTree fit_tree(const std::vector<std::vector<double>>& rows, std::span<const double> targets,
                        const TreeConfig& cfg) {
    return fit_tree(SortedColumns(rows), targets, cfg);
}

std::vector<double> initial_scores(std::span<const BinLabel> labels, int n_classes) {
    if (labels.empty()) throw ValidationError("no labels");
    std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
    for (const auto& y : labels) {
        if (y.value < 1 || y.value > n_classes) throw ValidationError("label outside class range");
        counts[static_cast<std::size_t>(y.value - 1)] += 1.0;
    }
    const auto total = static_cast<double>(labels.size());
    for (double& c : counts) c = std::log(std::max(c / total, kProbabilityFloor));
    return counts;
}

std::vector<double> residuals(std::span<const double> scores, BinLabel true_class) {
    if (true_class.value < 1 || static_cast<std::size_t>(true_class.value) > scores.size()) {
        throw ValidationError("class index out of range");
    }
    auto r = softmax(scores);
    for (double& v : r) v = -v;
    r[static_cast<std::size_t>(true_class.value - 1)] += 1.0;
    return r;
}

std::vector<double> GbtModel::scores(std::span<const double> x) const {
    if (x.size() != input_size) {
        throw ValidationError("input has " + std::to_string(x.size()) + " features, model expects " +
                              std::to_string(input_size));
    }
    std::vector<double> f = base_scores;
    for (const auto& round : rounds) {
        for (std::size_t c = 0; c < round.size(); ++c) f[c] += shrinkage * round[c].predict(x);
    }
    return f;
}

std::vector<double> GbtModel::probabilities(std::span<const double> x) const { return softmax(scores(x)); }

BinLabel GbtModel::predict_bin(std::span<const double> x) const {
    return BinLabel{static_cast<int>(argmax(scores(x))) + 1};
}

nlohmann::json GbtModel::to_json() const {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& round : rounds) {
        nlohmann::json per_class = nlohmann::json::array();
        for (const auto& t : round) per_class.push_back(t.to_json());
        jr.push_back(std::move(per_class));
    }
    return {{"format", "optbin-gbt"}, {"version", kModelFormatVersion},
            {"input_size", input_size}, {"shrinkage", shrinkage},
            {"base_scores", base_scores}, {"rounds", jr}};
}

GbtModel GbtModel::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "optbin-gbt" || j.value("version", 0) != kModelFormatVersion) {
        throw ValidationError("not an optbin-gbt v1 model");
    }
    GbtModel m;
    m.input_size = j.at("input_size").get<std::size_t>();
    m.shrinkage = j.at("shrinkage").get<double>();
    m.base_scores = j.at("base_scores").get<std::vector<double>>();
    for (const auto& jr : j.at("rounds")) {
        std::vector<RegressionTree> round;
        for (const auto& jt : jr) round.push_back(RegressionTree::from_json(jt));
        if (round.size() != m.base_scores.size()) throw ValidationError("round/class count mismatch");
        m.rounds.push_back(std::move(round));
    }
    return m;
}

void GbtConfig::validate() const {
    if (n_rounds < 0) throw ValidationError("n_rounds must be non-negative");
    if (max_depth < 0) throw ValidationError("max_depth must be non-negative");
    if (!(shrinkage >= 0.0) || !std::isfinite(shrinkage)) throw ValidationError("shrinkage must be >= 0");
    if (n_classes < 2) throw ValidationError("need at least two classes");
}

namespace {

double mean_ce(const std::vector<double>& scores, std::size_t k, std::span<const BinLabel> labels) {
    double sum = 0.0;
    std::vector<double> row(k);
    for (std::size_t s = 0; s < labels.size(); ++s) {
        std::copy_n(scores.begin() + static_cast<std::ptrdiff_t>(s * k), k, row.begin());
        softmax_inplace(row);
        sum += cross_entropy(row, labels[s]);
    }
    return sum / static_cast<double>(labels.size());
}

}  // namespace

GbtTrainResult boost(const TrainingSet& data, const GbtConfig& cfg) {
    cfg.validate();
    data.validate(cfg.n_classes);

    const std::size_t n = data.size();
    const auto k = static_cast<std::size_t>(cfg.n_classes);
    const SortedColumns columns(data.features);

    GbtTrainResult result;
    auto& model = result.model;
    model.input_size = data.dimension();
    model.shrinkage = cfg.shrinkage;
    model.base_scores = initial_scores(data.labels, cfg.n_classes);

    // Row-major n x k score matrix F(x_j).
    std::vector<double> scores(n * k);
    for (std::size_t s = 0; s < n; ++s) {
        std::copy(model.base_scores.begin(), model.base_scores.end(),
                  scores.begin() + static_cast<std::ptrdiff_t>(s * k));
    }
    result.round_loss.push_back(mean_ce(scores, k, data.labels));

    const TreeConfig tree_cfg{cfg.max_depth, 1e-12, 2};
    std::vector<double> resid(n * k);
    std::vector<double> target(n);
    std::vector<double> row(k);
    for (int m = 0; m < cfg.n_rounds; ++m) {
        for (std::size_t s = 0; s < n; ++s) {
            std::copy_n(scores.begin() + static_cast<std::ptrdiff_t>(s * k), k, row.begin());
            softmax_inplace(row);
            for (std::size_t c = 0; c < k; ++c) resid[s * k + c] = -row[c];
            resid[s * k + static_cast<std::size_t>(data.labels[s].value - 1)] += 1.0;
        }
        std::vector<RegressionTree> round;
        round.reserve(k);
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t s = 0; s < n; ++s) target[s] = resid[s * k + c];
            round.push_back(fit_tree(columns, target, tree_cfg));
        }
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t c = 0; c < k; ++c) {
                scores[s * k + c] += cfg.shrinkage * round[c].predict(data.features[s]);
            }
        }
        model.rounds.push_back(std::move(round));
        result.round_loss.push_back(mean_ce(scores, k, data.labels));
    }
    return result;
}

}  // namespace optbin
