#include "optbin/black_scholes.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "optbin/errors.hpp"
#include "optbin/features.hpp"

namespace optbin {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr int kBisectionIterations = 200;
constexpr double kPriceTolerance = 1e-8;
constexpr double kBandClamp = 1e-8;

struct DatedIv {
    double low_sum = 0.0;
    double high_sum = 0.0;
    std::size_t band_count = 0;
    double market_sum = 0.0;
    std::size_t market_count = 0;
};

// IV for a band endpoint: clamped into the bracket instead of failing.
double band_iv(double price, double spot, double strike, double rate, double tau) {
    const auto bounds = call_bounds(spot, strike, rate, tau);
    price = std::clamp(price, bounds.lower + kBandClamp, bounds.upper - kBandClamp);
    if (price <= bs_call({spot, strike, rate, kIvLow, tau})) return kIvLow;
    if (price >= bs_call({spot, strike, rate, kIvHigh, tau})) return kIvHigh;
    return implied_vol(price, spot, strike, rate, tau);
}

}  // namespace

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double bs_call(const BsInputs& in) {
    if (!(in.sigma > 0.0)) throw ValidationError("volatility must be positive");
    if (!(in.tau_years > 0.0)) throw ValidationError("time to maturity must be positive");
    if (!(in.spot > 0.0) || !(in.strike > 0.0)) throw ValidationError("spot and strike must be positive");
    const double vol_sqrt_t = in.sigma * std::sqrt(in.tau_years);
    const double d1 =
        (std::log(in.spot / in.strike) + (in.rate + 0.5 * in.sigma * in.sigma) * in.tau_years) / vol_sqrt_t;
    const double d2 = d1 - vol_sqrt_t;
    return in.spot * norm_cdf(d1) - in.strike * std::exp(-in.rate * in.tau_years) * norm_cdf(d2);
}

CallBounds call_bounds(double spot, double strike, double rate, double tau_years) {
    return {std::max(spot - strike * std::exp(-rate * tau_years), 0.0), spot};
}

HistoricalVol historical_volatility(std::span<const double> closes, double periods_per_year) {
    const auto lr = log_returns(closes);
    if (lr.size() < 2) throw ValidationError("historical volatility needs at least three prices");
    double mean = 0.0;
    for (double x : lr) mean += x;
    mean /= static_cast<double>(lr.size());
    double ss = 0.0;
    for (double x : lr) ss += (x - mean) * (x - mean);
    HistoricalVol hv;
    hv.sigma = std::sqrt(ss / static_cast<double>(lr.size() - 1)) * std::sqrt(periods_per_year);
    hv.degenerate = hv.sigma == 0.0;
    return hv;
}

std::optional<double> try_implied_vol(double price, double spot, double strike, double rate,
                                      double tau_years) {
    if (!(tau_years > 0.0) || !(spot > 0.0) || !(strike > 0.0)) return std::nullopt;
    const auto bounds = call_bounds(spot, strike, rate, tau_years);
    if (!(price > bounds.lower && price < bounds.upper)) return std::nullopt;

    double lo = kIvLow;
    double hi = kIvHigh;
    const double f_lo = bs_call({spot, strike, rate, lo, tau_years}) - price;
    const double f_hi = bs_call({spot, strike, rate, hi, tau_years}) - price;
    if (std::abs(f_lo) <= kPriceTolerance) return lo;
    if (std::abs(f_hi) <= kPriceTolerance) return hi;
    if (f_lo > 0.0 || f_hi < 0.0) return std::nullopt;

    double mid = 0.5 * (lo + hi);
    for (int i = 0; i < kBisectionIterations; ++i) {
        mid = 0.5 * (lo + hi);
        const double f = bs_call({spot, strike, rate, mid, tau_years}) - price;
        if (std::abs(f) <= kPriceTolerance) break;
        if (f > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return mid;
}

double implied_vol(double price, double spot, double strike, double rate, double tau_years) {
    const auto iv = try_implied_vol(price, spot, strike, rate, tau_years);
    if (!iv) throw NoSolutionError("no implied volatility in [1e-4, 5] reproduces the price");
    return *iv;
}

BenchmarkResult bs_benchmark(std::span<const ContractRecord> records, const BinConfig& cfg,
                             const BenchmarkOptions& opts) {
    BenchmarkResult out;
    out.labels.reserve(records.size());
    out.prices.reserve(records.size());
    std::vector<double> closes;
    for (const auto& rec : records) {
        double sigma = 0.0;
        if (opts.fixed_sigma) {
            sigma = *opts.fixed_sigma;
        } else {
            closes.clear();
            for (const auto& b : rec.window) closes.push_back(b.close);
            sigma = historical_volatility(closes, opts.day_count.periods_per_year).sigma;
        }
        if (sigma < kIvLow) {
            sigma = kIvLow;
            ++out.floored_sigma;
        }
        const double tau = static_cast<double>(rec.ttm_days) / opts.day_count.days_per_year;
        const double price = bs_call({rec.spot, rec.quote.strike, rec.rate, sigma, tau});
        out.prices.push_back(price);
        out.labels.push_back(bin_of(scaled_output(price, rec.quote.strike), cfg));
    }
    return out;
}

IvBandSeries iv_band_series(std::span<const ContractRecord> records, std::span<const double> predictions,
                            const BinConfig& cfg, const DayCount& day_count) {
    if (records.size() != predictions.size()) throw ValidationError("predictions not aligned with records");
    std::map<Date, DatedIv> by_date;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        auto& acc = by_date[rec.date()];
        const double k = rec.quote.strike;
        const double tau = static_cast<double>(rec.ttm_days) / day_count.days_per_year;
        if (!(tau > 0.0)) continue;
        const auto band = price_band(predictions[i], k, cfg);
        acc.low_sum += band_iv(band.lo, rec.spot, k, rec.rate, tau);
        acc.high_sum += band_iv(band.hi, rec.spot, k, rec.rate, tau);
        ++acc.band_count;
        if (const auto iv = try_implied_vol(rec.quote.close, rec.spot, k, rec.rate, tau)) {
            acc.market_sum += *iv;
            ++acc.market_count;
        }
    }

    IvBandSeries out;
    std::size_t hits = 0;
    for (const auto& [date, acc] : by_date) {
        if (acc.band_count == 0 || acc.market_count == 0) {
            ++out.dropped_dates;
            continue;
        }
        IvBandPoint p;
        p.date = date;
        p.iv_low = acc.low_sum / static_cast<double>(acc.band_count);
        p.iv_high = acc.high_sum / static_cast<double>(acc.band_count);
        p.iv_market = acc.market_sum / static_cast<double>(acc.market_count);
        if (p.iv_low <= p.iv_market && p.iv_market <= p.iv_high) ++hits;
        out.points.push_back(p);
    }
    if (!out.points.empty()) out.hit_rate = static_cast<double>(hits) / static_cast<double>(out.points.size());
    return out;
}

}  // namespace optbin
