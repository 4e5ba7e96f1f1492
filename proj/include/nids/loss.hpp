#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace nids {

struct FocalLossParams {
    double alpha = 0.25;
    double gamma = 2.0;
    double recall_boost = 1.0;    // multiplies the loss of a missed positive (y=1, p<0.5)
    double penalty_factor = 0.0;  // adds penalty_factor * (1-p) for a missed positive

    void validate() const;
    // gamma=0, alpha=0.5, no boost or penalty: one half of binary cross-entropy.
    static FocalLossParams half_cross_entropy() { return {0.5, 0.0, 1.0, 0.0}; }
};

inline constexpr double kProbabilityClamp = 1e-7;

double focal_loss(double p, std::uint8_t y, const FocalLossParams& fp);
// d focal_loss / dp, evaluated at the clamped probability.
double focal_loss_grad(double p, std::uint8_t y, const FocalLossParams& fp);

double binary_cross_entropy(double p, std::uint8_t y);
double binary_cross_entropy_grad(double p, std::uint8_t y);

struct BatchLoss {
    double value = 0.0;                 // weighted mean over the batch
    std::vector<double> grad;           // d value / d p_i
};

// class_weights[y] scales each sample's term; the mean divides by the batch size.
BatchLoss batch_focal_loss(std::span<const double> probs, std::span<const std::uint8_t> labels,
                           const FocalLossParams& fp, const std::array<double, 2>& class_weights = {1.0, 1.0});

}  // namespace nids
