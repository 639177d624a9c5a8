#pragma once

#include <span>
#include <vector>

#include "optbin/labels.hpp"

namespace optbin {

/// Mean of two bin labels; always an integer multiple of 1/2.
struct EnsemblePrediction {
    int twice = 2;

    double value() const { return twice / 2.0; }
    friend auto operator<=>(const EnsemblePrediction&, const EnsemblePrediction&) = default;
};

EnsemblePrediction average_predict(BinLabel ann, BinLabel gbt);

std::vector<double> average_predictions(std::span<const BinLabel> ann, std::span<const BinLabel> gbt);

}  // namespace optbin
