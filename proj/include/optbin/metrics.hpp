#pragma once

#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "optbin/labels.hpp"
#include "optbin/market_data.hpp"

namespace optbin {

// Predictions are doubles so that half-integer ensemble outputs are scored by
// the same code as plain class labels.
std::vector<double> as_values(std::span<const BinLabel> labels);

double accuracy(std::span<const BinLabel> actual, std::span<const double> predicted);

/// w * mean |C_i - P_i|.
double em(std::span<const BinLabel> actual, std::span<const double> predicted, double width);

/// Share of predictions more than two bins away (strict).
double rho(std::span<const BinLabel> actual, std::span<const double> predicted);

struct ErrorDistribution {
    std::map<double, double> quantiles;             // q -> nearest-rank quantile of C - P
    std::vector<std::pair<double, double>> cdf;     // (error, P[C - P <= error]) per distinct error
};

ErrorDistribution error_distribution(std::span<const BinLabel> actual, std::span<const double> predicted,
                                     std::span<const double> quantiles);

/// Orthogonal (total least squares) fit y = slope * x + intercept.
struct RegressionDiagnostic {
    double slope = 0.0;
    double intercept = 0.0;
};

RegressionDiagnostic orthogonal_regression(std::span<const double> x, std::span<const double> y);

struct MetricsReport {
    std::size_t n = 0;
    double accuracy = 0.0;
    double em = 0.0;
    double rho = 0.0;
    std::map<double, double> error_quantiles;
};

MetricsReport evaluate_predictions(std::span<const BinLabel> actual, std::span<const double> predicted,
                                   double width, std::span<const double> quantiles = {});

nlohmann::json to_json(const MetricsReport& r);

/// Trains on `train` under `cfg` and returns one prediction per `test` record.
using BinTrainer = std::function<std::vector<double>(
    const std::vector<ContractRecord>& train, const std::vector<ContractRecord>& test,
    const BinConfig& cfg)>;

struct BinWidthPoint {
    double width = 0.0;
    double em = 0.0;
};

/// Rebins, retrains and scores test EM for each width. The covered output range
/// n_classes * width is held at `range` (5.0 by default).
std::vector<BinWidthPoint> em_vs_binwidth(const SplitDataset& data, std::span<const double> widths,
                                          const BinTrainer& trainer, double range = 5.0);

BinConfig config_for_width(double width, double range = 5.0);

std::vector<BinLabel> true_labels(std::span<const ContractRecord> records, const BinConfig& cfg);

}  // namespace optbin
