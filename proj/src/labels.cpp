#include "optbin/labels.hpp"

#include <algorithm>
#include <cmath>

#include "optbin/errors.hpp"

namespace optbin {

namespace {
// Keeps exact multiples of the width in the lower bin despite rounding in v/w.
constexpr double kBoundaryEps = 1e-9;
}  // namespace

void BinConfig::validate() const {
    if (!(width > 0.0) || !std::isfinite(width)) throw ValidationError("bin width must be positive");
    if (n_classes < 2) throw ValidationError("need at least two classes");
}

double scaled_output(double close, double strike) {
    if (!(strike > 0.0)) throw ValidationError("strike must be positive");
    if (close < 0.0) throw ValidationError("close must be non-negative");
    return 100.0 * close / strike;
}

BinAssignment assign_bin(double value, const BinConfig& cfg) {
    BinAssignment out;
    if (!(value > 0.0)) {
        out.label = BinLabel{1};
        out.degenerate = true;
        return out;
    }
    const double raw = std::ceil(value / cfg.width - kBoundaryEps);
    if (raw > static_cast<double>(cfg.n_classes)) {
        out.label = BinLabel{cfg.n_classes};
        out.clamped = true;
        return out;
    }
    out.label = BinLabel{std::max(1, static_cast<int>(raw))};
    return out;
}

BinLabel bin_of(double value, const BinConfig& cfg) { return assign_bin(value, cfg).label; }

PriceInterval bin_interval(BinLabel n, const BinConfig& cfg) {
    return {static_cast<double>(n.value - 1) * cfg.width, static_cast<double>(n.value) * cfg.width};
}

PriceInterval price_band(double center, double strike, const BinConfig& cfg) {
    const double lo = strike * (center - 3.0) * cfg.width / 100.0;
    const double hi = strike * (center + 2.0) * cfg.width / 100.0;
    return {std::max(0.0, lo), hi};
}

double bin_mid_price(double center, double strike, const BinConfig& cfg) {
    return strike * (center - 0.5) * cfg.width / 100.0;
}

}  // namespace optbin
