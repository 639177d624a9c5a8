#include "optbin/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "optbin/errors.hpp"
#include "optbin/features.hpp"
#include "optbin/metrics.hpp"

namespace optbin {

void GbmConfig::validate() const {
    if (!(sigma > 0.0)) throw ValidationError("GBM volatility must be positive");
    if (days < static_cast<int>(kWindowBars) + 1) throw ValidationError("GBM path needs at least 21 days");
    if (!(steps_per_year > 0.0)) throw ValidationError("steps per year must be positive");
    if (!(s0 > 0.0)) throw ValidationError("initial price must be positive");
}

std::vector<double> simulate_gbm(const GbmConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double dt = 1.0 / cfg.steps_per_year;
    const double drift = (cfg.mu - 0.5 * cfg.sigma * cfg.sigma) * dt;
    const double diffusion = cfg.sigma * std::sqrt(dt);
    std::vector<double> path(static_cast<std::size_t>(cfg.days));
    path[0] = cfg.s0;
    for (std::size_t t = 1; t < path.size(); ++t) {
        path[t] = path[t - 1] * std::exp(drift + diffusion * normal(rng));
    }
    return path;
}

std::vector<ContractRecord> synth_contracts(std::span<const double> path, double sigma_true,
                                            const SynthConfig& cfg) {
    if (path.size() < kWindowBars + 1) throw ValidationError("path too short for a 20-bar window");
    if (!(sigma_true > 0.0)) throw ValidationError("true volatility must be positive");
    const double tick = cfg.strike_tick * path[0];

    std::vector<ContractRecord> out;
    for (std::size_t t = kWindowBars; t < path.size(); ++t) {
        const double spot = path[t];
        const Date date = cfg.start + std::chrono::days{static_cast<int>(t)};
        std::vector<UnderlyingBar> window;
        window.reserve(kWindowBars);
        for (std::size_t i = t + 1 - kWindowBars; i <= t; ++i) {
            const double p = path[i];
            window.push_back({cfg.start + std::chrono::days{static_cast<int>(i)}, p, p, p, p});
        }
        for (int ttm : cfg.ttms) {
            for (double m : cfg.moneyness_offsets) {
                double strike = spot / (1.0 - m);
                if (tick > 0.0) strike = std::max(tick, std::round(strike / tick) * tick);
                if (!(std::abs(1.0 - spot / strike) <= cfg.max_moneyness_gap)) continue;
                // First listing day has no earlier quote to serve as prev_close.
                if (t == kWindowBars) continue;
                const double tau = static_cast<double>(ttm) / cfg.day_count.days_per_year;
                const double tau_prev = static_cast<double>(ttm + 1) / cfg.day_count.days_per_year;

                ContractRecord rec;
                rec.quote.date = date;
                rec.quote.expiry = date + std::chrono::days{ttm};
                rec.quote.strike = strike;
                rec.quote.close = bs_call({spot, strike, cfg.rate, sigma_true, tau});
                rec.quote.prev_close = bs_call({path[t - 1], strike, cfg.rate, sigma_true, tau_prev});
                rec.quote.volume = 1;
                rec.spot = spot;
                rec.window = window;
                rec.ttm_days = ttm;
                rec.rate = cfg.rate;
                out.push_back(std::move(rec));
            }
        }
    }
    return out;
}

std::vector<ContractRecord> synthetic_dataset(const GbmConfig& gbm, const SynthConfig& synth) {
    const auto path = simulate_gbm(gbm);
    return synth_contracts(path, gbm.sigma, synth);
}

std::vector<double> default_sigma_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 20; ++i) g.push_back(i / 100.0);
    return g;
}

std::uint64_t sweep_seed(std::uint64_t base, double sigma, int repetition) {
    return base + static_cast<std::uint64_t>(std::llround(sigma * 1e4)) +
           1000003ULL * static_cast<std::uint64_t>(repetition);
}

EmvCurve emv_sweep(const FeaturePredictor& model, const SweepConfig& cfg, const BinConfig& bins) {
    if (cfg.sigmas.empty()) throw ValidationError("empty volatility grid");
    if (cfg.repetitions < 1) throw ValidationError("repetitions must be at least 1");
    auto grid = cfg.sigmas;
    std::sort(grid.begin(), grid.end());
    if (std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
        throw ValidationError("volatility grid has duplicates");
    }

    EmvCurve curve;
    for (double sigma : grid) {
        double em_sum = 0.0;
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            GbmConfig g = cfg.gbm;
            g.sigma = sigma;
            g.seed = sweep_seed(cfg.gbm.seed, sigma, rep);
            const auto records = synthetic_dataset(g, cfg.synth);
            if (records.empty()) throw ValidationError("simulation produced no contracts");
            const auto actual = true_labels(records, bins);
            std::vector<double> predicted;
            predicted.reserve(records.size());
            for (const auto& rec : records) predicted.push_back(model(approach1(rec).values));
            em_sum += em(actual, predicted, bins.width);
        }
        curve.points.push_back({sigma, em_sum / cfg.repetitions});
    }
    const auto best = std::min_element(curve.points.begin(), curve.points.end(),
                                       [](const EmvPoint& a, const EmvPoint& b) { return a.em < b.em; });
    curve.emv = best->sigma;
    return curve;
}

}  // namespace optbin
