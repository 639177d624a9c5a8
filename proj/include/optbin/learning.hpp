#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "optbin/labels.hpp"

namespace optbin {

/// Row-per-sample feature matrix with 1-based bin labels.
struct TrainingSet {
    std::vector<std::vector<double>> features;
    std::vector<BinLabel> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t dimension() const { return features.empty() ? 0 : features.front().size(); }
    void validate(int n_classes) const;
};

/// Max-subtracted softmax; finite for any finite input.
std::vector<double> softmax(std::span<const double> scores);
void softmax_inplace(std::span<double> scores);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// -log(max(p[true], 1e-12)). `true_class` is 1-based.
double cross_entropy(std::span<const double> probs, BinLabel true_class);

inline constexpr double kProbabilityFloor = 1e-12;

}  // namespace optbin
