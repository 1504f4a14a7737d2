#pragma once

#include <torch/torch.h>

#include "tss/backbone.hpp"

namespace tss {

inline constexpr double kDiceSmooth = 1e-5;
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kWarmupBeta = 0.1;

/// Integer labels B x ... -> one-hot B x K x ... with the given dtype.
torch::Tensor one_hot(const torch::Tensor& labels, int64_t num_classes, torch::ScalarType dtype);

/// 1 - mean_k (2 sum(p_k y_k) + eps) / (sum p_k + sum y_k + eps), sums over
/// batch and voxels.
torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& target_one_hot);

/// Mean over voxels of -log(max(p_true, 1e-12)).
torch::Tensor ce_loss(const torch::Tensor& probs, const torch::Tensor& labels);

/// dice_loss + ce_loss against integer labels.
torch::Tensor seg_loss(const torch::Tensor& probs, const torch::Tensor& labels);

struct SupLosses {
    torch::Tensor first;
    torch::Tensor second;
};

SupLosses sup_losses(const torch::Tensor& probs1, const torch::Tensor& probs2, const torch::Tensor& labels);

/// Cross-decoder consistency: each decoder is supervised by the other's
/// binarized, detached prediction.
torch::Tensor unsup_loss(const torch::Tensor& probs1, const torch::Tensor& probs2);

/// Segmentation loss on both mixed batches, read from `target_decoder`'s
/// head only. Throws ValidationError unless target_decoder is 1 or 2.
torch::Tensor mix_loss(const DualPrediction& pred_mix_l, const DualPrediction& pred_mix_u, const torch::Tensor& y_mix_l,
                       const torch::Tensor& y_mix_u, int target_decoder);

/// Gaussian ramp beta * exp(-5 (1 - t/t_max)^2); t beyond t_max is clamped.
double warmup(double t, double t_max, double beta = kWarmupBeta);

struct LossReport {
    double l_sup_1 = 0, l_sup_2 = 0, l_unsup = 0, l_cog = 0, l_mix = 0, lambda_u = 0, l_total = 0;

    /// Fills l_total = l_sup_1 + l_sup_2 + l_cog + l_mix + lambda_u * l_unsup.
    static LossReport make(double sup1, double sup2, double unsup, double cog, double mix, double lambda_u);
    bool identity_holds() const;
};

/// Differentiable counterpart of LossReport::make. Undefined tensors count
/// as zero.
struct LossTerms {
    torch::Tensor sup1, sup2, unsup, cog, mix;
    double lambda_u = 0.0;

    torch::Tensor total() const;
    LossReport report() const;
};

}  // namespace tss
