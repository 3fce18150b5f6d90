#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsctm/objectives.hpp"

namespace tsctm {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct GradientCheckCase {
    bool augmented = false;
    bool include_positive = true;
    VqNorm vq_norm = VqNorm::squared;
    Reduction reduce = Reduction::sum;
    std::uint64_t seed = 1;
    std::size_t vocab_size = 30;
    std::size_t num_topics = 5;
    std::size_t hidden = 7;
    std::size_t batch = 8;
    std::size_t encoder_layers = 2;
    bool batch_norm = true;
};

struct GradientCheckOutcome {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    std::size_t anchors_with_pairs = 0;
};

/// Compares total_loss gradients with central differences (step h) on a
/// random instance. Quantization indices and stop-gradient values are pinned
/// at the base point.
GradientCheckOutcome gradient_check(const GradientCheckCase& c, double h = 1e-6);

/// Relative error used by the gradient suite: |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradientScaleFloor = 1e-3;
inline constexpr double kGradientTolerance = 1e-4;

/// `instances` cases cycling through augmentation, denominator and VQ-norm modes.
std::vector<CheckResult> run_gradient_suite(std::size_t instances = 20, std::uint64_t seed = 7);
CheckResult run_quantization_oracle(std::size_t samples = 1000, std::size_t K = 5,
                                    std::uint64_t seed = 11);
std::vector<CheckResult> run_metric_oracles();

}  // namespace tsctm
