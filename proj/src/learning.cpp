#include "optbin/learning.hpp"

#include <algorithm>
#include <cmath>

#include "optbin/errors.hpp"

namespace optbin {

void TrainingSet::validate(int n_classes) const {
    if (labels.empty()) throw ValidationError("training set is empty");
    if (features.size() != labels.size()) throw ValidationError("features/labels length mismatch");
    const auto d = features.front().size();
    for (const auto& row : features) {
        if (row.size() != d) throw ValidationError("ragged feature matrix");
    }
    for (const auto& y : labels) {
        if (y.value < 1 || y.value > n_classes) {
            throw ValidationError("label " + std::to_string(y.value) + " outside [1, " +
                                  std::to_string(n_classes) + "]");
        }
    }
}

void softmax_inplace(std::span<double> scores) {
    const double top = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - top);
        sum += s;
    }
    for (double& s : scores) s /= sum;
}

std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> p(scores.begin(), scores.end());
    softmax_inplace(p);
    return p;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

double cross_entropy(std::span<const double> probs, BinLabel true_class) {
    if (true_class.value < 1 || static_cast<std::size_t>(true_class.value) > probs.size()) {
        throw ValidationError("class index out of range");
    }
    return -std::log(std::max(probs[static_cast<std::size_t>(true_class.value - 1)], kProbabilityFloor));
}

}  // namespace optbin
