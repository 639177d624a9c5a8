#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "optbin/black_scholes.hpp"
#include "optbin/labels.hpp"
#include "optbin/market_data.hpp"

namespace optbin {

struct GbmConfig {
    double mu = 0.1;
    double sigma = 0.13;
    int days = 500;
    double steps_per_year = 252.0;
    double s0 = 100.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Daily GBM closes, path[0] = s0, exact log-normal stepping.
std::vector<double> simulate_gbm(const GbmConfig& cfg);

struct SynthConfig {
    std::vector<int> ttms = {10, 25, 40};
    // 1 - S/K targets for the listed strikes, before tick rounding.
    std::vector<double> moneyness_offsets = {-0.03, -0.015, 0.0, 0.015, 0.03};
    double rate = 0.05;
    double strike_tick = 0.01;  // fraction of path[0]; 0 keeps exact strikes
    double max_moneyness_gap = 0.04;
    Date start = Date{std::chrono::year{2015} / 1 / 1};
    DayCount day_count{};
};

/// Black-Scholes-priced near-ATM calls on a simulated path. Contracts are
/// listed from the first full-window day, which only seeds previous closes,
/// so path.size() - 21 quote days are emitted. Windows carry O=H=L=C.
std::vector<ContractRecord> synth_contracts(std::span<const double> path, double sigma_true,
                                            const SynthConfig& cfg);

std::vector<ContractRecord> synthetic_dataset(const GbmConfig& gbm, const SynthConfig& synth);

/// Maps one Approach I feature vector to a (possibly half-integer) bin prediction.
using FeaturePredictor = std::function<double(std::span<const double>)>;

std::vector<double> default_sigma_grid();  // 0.01, 0.02, ..., 0.20

struct SweepConfig {
    GbmConfig gbm;  // sigma is overridden per grid point
    SynthConfig synth;
    std::vector<double> sigmas = default_sigma_grid();
    int repetitions = 1;
};

struct EmvPoint {
    double sigma = 0.0;
    double em = 0.0;
};

struct EmvCurve {
    std::vector<EmvPoint> points;  // ascending sigma
    double emv = 0.0;              // grid argmin of EM, ties to the lower sigma
};

/// Seed for one grid point: depends on sigma and repetition, not grid order.
std::uint64_t sweep_seed(std::uint64_t base, double sigma, int repetition);

EmvCurve emv_sweep(const FeaturePredictor& model, const SweepConfig& cfg, const BinConfig& bins);

}  // namespace optbin
