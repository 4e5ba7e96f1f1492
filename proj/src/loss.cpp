#include "nids/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nids/common.hpp"

namespace nids {

void FocalLossParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("focal loss: alpha must be in (0,1]");
    if (!(gamma >= 0.0)) throw Error("focal loss: gamma must be >= 0");
    if (!(recall_boost >= 1.0)) throw Error("focal loss: recall_boost must be >= 1");
    if (!(penalty_factor >= 0.0)) throw Error("focal loss: penalty_factor must be >= 0");
}

namespace {

double clamp_p(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

// (1-q)^g and its derivative in q, with 0^0 = 1.
double focus(double q, double g) { return g == 0.0 ? 1.0 : std::pow(1.0 - q, g); }
double focus_grad(double q, double g) { return g == 0.0 ? 0.0 : -g * std::pow(1.0 - q, g - 1.0); }

}  // namespace

double focal_loss(double p, std::uint8_t y, const FocalLossParams& fp) {
    const double pc = clamp_p(p);
    if (y) {
        double loss = -fp.alpha * focus(pc, fp.gamma) * std::log(pc);
        if (pc < 0.5) loss = loss * fp.recall_boost + fp.penalty_factor * (1.0 - pc);
        return loss;
    }
    const double q = 1.0 - pc;
    return -(1.0 - fp.alpha) * focus(q, fp.gamma) * std::log(q);
}

double focal_loss_grad(double p, std::uint8_t y, const FocalLossParams& fp) {
    const double pc = clamp_p(p);
    if (y) {
        double g = -fp.alpha * (focus_grad(pc, fp.gamma) * std::log(pc) + focus(pc, fp.gamma) / pc);
        if (pc < 0.5) g = g * fp.recall_boost - fp.penalty_factor;
        return g;
    }
    const double q = 1.0 - pc;
    // d/dp = -d/dq
    return (1.0 - fp.alpha) * (focus_grad(q, fp.gamma) * std::log(q) + focus(q, fp.gamma) / q);
}

double binary_cross_entropy(double p, std::uint8_t y) {
    const double pc = clamp_p(p);
    return y ? -std::log(pc) : -std::log(1.0 - pc);
}

double binary_cross_entropy_grad(double p, std::uint8_t y) {
    const double pc = clamp_p(p);
    return y ? -1.0 / pc : 1.0 / (1.0 - pc);
}

BatchLoss batch_focal_loss(std::span<const double> probs, std::span<const std::uint8_t> labels,
                           const FocalLossParams& fp, const std::array<double, 2>& class_weights) {
    if (probs.size() != labels.size()) throw ShapeError("batch loss: probability and label counts differ");
    if (probs.empty()) throw ShapeError("batch loss: empty batch");
    BatchLoss out;
    out.grad.resize(probs.size());
    const double inv_n = 1.0 / static_cast<double>(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double w = class_weights[labels[i] ? 1 : 0];
        out.value += w * focal_loss(probs[i], labels[i], fp);
        out.grad[i] = w * focal_loss_grad(probs[i], labels[i], fp) * inv_n;
    }
    out.value *= inv_n;
    return out;
}

}  // namespace nids
