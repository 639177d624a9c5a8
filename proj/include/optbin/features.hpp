#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "optbin/market_data.hpp"

namespace optbin {

enum class Approach { I = 1, II = 2, III = 3 };

Approach approach_from_int(int id);
std::size_t feature_count(Approach a);

struct FeatureVector {
    Approach approach = Approach::I;
    std::vector<double> values;
};

/// ln(p[i+1] / p[i]); one fewer value than `prices`.
std::vector<double> log_returns(std::span<const double> prices);

std::vector<double> order_statistics(std::span<const double> values);

/// Means and sample covariance (denominator n-1) of the open, high, low and
/// close log-return series, in that facet order.
struct OhlcMoments {
    std::array<double, 4> mean{};
    std::array<std::array<double, 4>, 4> cov{};
};

OhlcMoments ohlc_moments(const ContractRecord& rec);

/// x / sqrt(|x|), with 0 -> 0.
double signed_sqrt(double x);

// Index map (frozen):
//   I   [0..18] sorted close log returns, [19] ttm days, [20] rate, [21] S/K
//   II  [0..3] mean O,H,L,C log returns, [4..13] signed_sqrt(cov(i,j)) for
//       i >= j in row-major order (00,10,11,20,21,22,30,31,32,33),
//       [14] ttm days, [15] rate, [16] S/K
//   III II followed by [17] prev_close/K, [18] mean window close / K
FeatureVector approach1(const ContractRecord& rec);
FeatureVector approach2(const ContractRecord& rec);
FeatureVector approach3(const ContractRecord& rec);
FeatureVector make_features(const ContractRecord& rec, Approach a);

std::vector<std::string> feature_names(Approach a);

void write_feature_csv(std::ostream& out, Approach a, std::span<const FeatureVector> rows);

}  // namespace optbin
