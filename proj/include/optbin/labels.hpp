#pragma once

#include <compare>

namespace optbin {

/// Equispaced binning of the scaled output 100*C/K: bin n is ((n-1)w, nw].
struct BinConfig {
    double width = 0.1;
    int n_classes = 50;

    void validate() const;
};

/// Ordinal class, 1-based.
struct BinLabel {
    int value = 1;

    friend auto operator<=>(const BinLabel&, const BinLabel&) = default;
};

struct BinAssignment {
    BinLabel label;
    bool degenerate = false;  // value <= 0, mapped to bin 1
    bool clamped = false;     // value above n_classes * width
};

struct PriceInterval {
    double lo = 0.0;  // open
    double hi = 0.0;  // closed
};

double scaled_output(double close, double strike);

BinAssignment assign_bin(double value, const BinConfig& cfg);
BinLabel bin_of(double value, const BinConfig& cfg);

/// Dimensionless interval ((n-1)w, nw].
PriceInterval bin_interval(BinLabel n, const BinConfig& cfg);

/// Price interval covered by the five bins centred on `center`, i.e.
/// (K(c-3)w/100, K(c+2)w/100], floored at zero. `center` may be a
/// half-integer ensemble prediction.
PriceInterval price_band(double center, double strike, const BinConfig& cfg);
inline PriceInterval price_band(BinLabel n, double strike, const BinConfig& cfg) {
    return price_band(static_cast<double>(n.value), strike, cfg);
}

/// Price at the middle of bin `center`: K(c - 1/2)w/100.
double bin_mid_price(double center, double strike, const BinConfig& cfg);

}  // namespace optbin
