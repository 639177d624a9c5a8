#include "optbin/ensemble.hpp"

#include "optbin/errors.hpp"

namespace optbin {

EnsemblePrediction average_predict(BinLabel ann, BinLabel gbt) {
    if (ann.value < 1 || gbt.value < 1) throw ValidationError("bin labels are 1-based");
    return EnsemblePrediction{ann.value + gbt.value};
}

std::vector<double> average_predictions(std::span<const BinLabel> ann, std::span<const BinLabel> gbt) {
    if (ann.size() != gbt.size()) throw ValidationError("prediction lists differ in length");
    std::vector<double> out;
    out.reserve(ann.size());
    for (std::size_t i = 0; i < ann.size(); ++i) out.push_back(average_predict(ann[i], gbt[i]).value());
    return out;
}

}  // namespace optbin
