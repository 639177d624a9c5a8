#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "optbin/labels.hpp"
#include "optbin/market_data.hpp"

namespace optbin {

double norm_cdf(double x);

struct BsInputs {
    double spot = 0.0;
    double strike = 0.0;
    double rate = 0.0;
    double sigma = 0.0;
    double tau_years = 0.0;
};

/// European call, no dividends.
double bs_call(const BsInputs& in);

/// No-arbitrage bounds for a call: max(S - K e^{-r tau}, 0) and S.
struct CallBounds {
    double lower = 0.0;
    double upper = 0.0;
};
CallBounds call_bounds(double spot, double strike, double rate, double tau_years);

struct HistoricalVol {
    double sigma = 0.0;
    bool degenerate = false;  // zero dispersion in the window
};

/// Sample std (n-1) of close log returns, annualized by sqrt(periods_per_year).
HistoricalVol historical_volatility(std::span<const double> closes, double periods_per_year = 252.0);

inline constexpr double kIvLow = 1e-4;
inline constexpr double kIvHigh = 5.0;

/// Bisection on [1e-4, 5]. Throws NoSolutionError if `price` violates the
/// call bounds or lies outside the prices the bracket can produce.
double implied_vol(double price, double spot, double strike, double rate, double tau_years);
std::optional<double> try_implied_vol(double price, double spot, double strike, double rate,
                                      double tau_years);

struct DayCount {
    double days_per_year = 365.0;      // ttm days -> year fraction
    double periods_per_year = 252.0;   // historical vol annualization
};

struct BenchmarkOptions {
    std::optional<double> fixed_sigma;  // use instead of the window's historical vol
    DayCount day_count{};
};

struct BenchmarkResult {
    std::vector<BinLabel> labels;
    std::vector<double> prices;
    std::size_t floored_sigma = 0;  // records whose sigma was floored at 1e-4
};

/// Prices every record with Black-Scholes and bins 100 * price / K.
BenchmarkResult bs_benchmark(std::span<const ContractRecord> records, const BinConfig& cfg,
                             const BenchmarkOptions& opts = {});

struct IvBandPoint {
    Date date;
    double iv_low = 0.0;
    double iv_high = 0.0;
    double iv_market = 0.0;
};

struct IvBandSeries {
    std::vector<IvBandPoint> points;
    double hit_rate = 0.0;  // share of dates with iv_low <= iv_market <= iv_high
    std::size_t dropped_dates = 0;
};

/// Implied-volatility band per date from the predicted price bands, averaged
/// over that date's contracts, next to the average market IV.
IvBandSeries iv_band_series(std::span<const ContractRecord> records, std::span<const double> predictions,
                            const BinConfig& cfg, const DayCount& day_count = {});

}  // namespace optbin
