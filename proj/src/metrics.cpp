#include "optbin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "optbin/errors.hpp"

namespace optbin {

namespace {

void check_pair(std::span<const BinLabel> actual, std::span<const double> predicted) {
    if (actual.empty()) throw ValidationError("no predictions to score");
    if (actual.size() != predicted.size()) throw ValidationError("actual/predicted length mismatch");
}

}  // namespace

std::vector<double> as_values(std::span<const BinLabel> labels) {
    std::vector<double> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(static_cast<double>(l.value));
    return out;
}

double accuracy(std::span<const BinLabel> actual, std::span<const double> predicted) {
    check_pair(actual, predicted);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (static_cast<double>(actual[i].value) == predicted[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(actual.size());
}

double em(std::span<const BinLabel> actual, std::span<const double> predicted, double width) {
    check_pair(actual, predicted);
    if (!(width > 0.0)) throw ValidationError("bin width must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        sum += std::abs(static_cast<double>(actual[i].value) - predicted[i]);
    }
    return width * sum / static_cast<double>(actual.size());
}

double rho(std::span<const BinLabel> actual, std::span<const double> predicted) {
    check_pair(actual, predicted);
    std::size_t misses = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (std::abs(static_cast<double>(actual[i].value) - predicted[i]) > 2.0) ++misses;
    }
    return static_cast<double>(misses) / static_cast<double>(actual.size());
}

ErrorDistribution error_distribution(std::span<const BinLabel> actual, std::span<const double> predicted,
                                     std::span<const double> quantiles) {
    check_pair(actual, predicted);
    std::vector<double> err(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i) err[i] = static_cast<double>(actual[i].value) - predicted[i];
    std::sort(err.begin(), err.end());

    ErrorDistribution out;
    const auto n = static_cast<double>(err.size());
    for (double q : quantiles) {
        if (!(q > 0.0 && q < 1.0)) throw ValidationError("quantiles must lie in (0, 1)");
        // Nearest rank: smallest error whose rank is >= q*n.
        auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
        rank = std::clamp<std::size_t>(rank, 1, err.size());
        out.quantiles[q] = err[rank - 1];
    }
    for (std::size_t i = 0; i < err.size(); ++i) {
        if (i + 1 < err.size() && err[i + 1] == err[i]) continue;
        out.cdf.emplace_back(err[i], static_cast<double>(i + 1) / n);
    }
    return out;
}

RegressionDiagnostic orthogonal_regression(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("x/y length mismatch");
    if (x.size() < 2) throw ValidationError("orthogonal regression needs at least two points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 && syy == 0.0) throw ValidationError("all points identical; no regression line");

    RegressionDiagnostic d;
    if (sxy == 0.0) {
        if (!(sxx > syy)) throw ValidationError("orthogonal regression line is vertical or undefined");
        d.slope = 0.0;
    } else {
        const double diff = syy - sxx;
        d.slope = (diff + std::sqrt(diff * diff + 4.0 * sxy * sxy)) / (2.0 * sxy);
    }
    d.intercept = my - d.slope * mx;
    return d;
}

MetricsReport evaluate_predictions(std::span<const BinLabel> actual, std::span<const double> predicted,
                                   double width, std::span<const double> quantiles) {
    MetricsReport r;
    r.n = actual.size();
    r.accuracy = accuracy(actual, predicted);
    r.em = em(actual, predicted, width);
    r.rho = rho(actual, predicted);
    if (!quantiles.empty()) r.error_quantiles = error_distribution(actual, predicted, quantiles).quantiles;
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json q = nlohmann::json::object();
    for (const auto& [k, v] : r.error_quantiles) {
        char key[32];
        std::snprintf(key, sizeof key, "%g", k);
        q[key] = v;
    }
    return {{"n", r.n}, {"accuracy", r.accuracy}, {"em", r.em}, {"rho", r.rho}, {"error_quantiles", q}};
}

BinConfig config_for_width(double width, double range) {
    if (!(width > 0.0)) throw ValidationError("bin width must be positive");
    BinConfig cfg;
    cfg.width = width;
    cfg.n_classes = std::max(2, static_cast<int>(std::ceil(range / width - 1e-9)));
    return cfg;
}

std::vector<BinLabel> true_labels(std::span<const ContractRecord> records, const BinConfig& cfg) {
    std::vector<BinLabel> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(bin_of(scaled_output(r.quote.close, r.quote.strike), cfg));
    return out;
}

std::vector<BinWidthPoint> em_vs_binwidth(const SplitDataset& data, std::span<const double> widths,
                                          const BinTrainer& trainer, double range) {
    if (widths.empty()) throw ValidationError("no bin widths given");
    if (data.test.empty() || data.train.empty()) throw ValidationError("bin-width study needs train and test data");
    std::vector<BinWidthPoint> out;
    for (double w : widths) {
        const auto cfg = config_for_width(w, range);
        const auto predicted = trainer(data.train, data.test, cfg);
        const auto actual = true_labels(data.test, cfg);
        out.push_back({w, em(actual, predicted, w)});
    }
    return out;
}

}  // namespace optbin
