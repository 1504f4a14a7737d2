#include "tss/losses.hpp"

#include <algorithm>
#include <cmath>

#include "tss/dca.hpp"
#include "tss/errors.hpp"

namespace tss {

torch::Tensor one_hot(const torch::Tensor& labels, int64_t num_classes, torch::ScalarType dtype) {
    torch::Tensor oh = torch::nn::functional::one_hot(labels.to(torch::kLong), num_classes).to(dtype);
    // B x ... x K -> B x K x ...
    std::vector<int64_t> order{0, oh.dim() - 1};
    for (int64_t i = 1; i + 1 < oh.dim(); ++i) order.push_back(i);
    return oh.permute(order).contiguous();
}

torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& target) {
    if (probs.sizes() != target.sizes()) throw ValidationError("dice_loss: prediction and target shapes differ");
    std::vector<int64_t> dims{0};
    for (int64_t i = 2; i < probs.dim(); ++i) dims.push_back(i);
    torch::Tensor inter = (probs * target).sum(dims);
    torch::Tensor denom = probs.sum(dims) + target.sum(dims);
    torch::Tensor per_class = (2.0 * inter + kDiceSmooth) / (denom + kDiceSmooth);
    return 1.0 - per_class.mean();
}

torch::Tensor ce_loss(const torch::Tensor& probs, const torch::Tensor& labels) {
    if (labels.dim() + 1 != probs.dim()) throw ValidationError("ce_loss: labels must drop the class axis");
    torch::Tensor p_true = probs.gather(1, labels.to(torch::kLong).unsqueeze(1)).squeeze(1);
    return -torch::log(p_true.clamp_min(kProbFloor)).mean();
}

torch::Tensor seg_loss(const torch::Tensor& probs, const torch::Tensor& labels) {
    return dice_loss(probs, one_hot(labels, probs.size(1), probs.scalar_type())) + ce_loss(probs, labels);
}

SupLosses sup_losses(const torch::Tensor& probs1, const torch::Tensor& probs2, const torch::Tensor& labels) {
    return {seg_loss(probs1, labels), seg_loss(probs2, labels)};
}

torch::Tensor unsup_loss(const torch::Tensor& probs1, const torch::Tensor& probs2) {
    if (probs1.sizes() != probs2.sizes()) throw ValidationError("unsup_loss: decoder outputs differ in shape");
    return seg_loss(probs1, binarize(probs2.detach())) + seg_loss(probs2, binarize(probs1.detach()));
}

torch::Tensor mix_loss(const DualPrediction& pred_mix_l, const DualPrediction& pred_mix_u, const torch::Tensor& y_mix_l,
                       const torch::Tensor& y_mix_u, int target_decoder) {
    if (target_decoder != 1 && target_decoder != 2)
        throw ValidationError("mix_loss: target decoder must be 1 or 2, got " + std::to_string(target_decoder));
    return seg_loss(pred_mix_l[target_decoder], y_mix_l) + seg_loss(pred_mix_u[target_decoder], y_mix_u);
}

double warmup(double t, double t_max, double beta) {
    if (!(t >= 0.0) || !(t_max >= 0.0)) throw ValidationError("warmup: t and t_max must be >= 0");
    if (t_max == 0.0) return beta;
    const double phase = 1.0 - std::min(t, t_max) / t_max;
    return beta * std::exp(-5.0 * phase * phase);
}

LossReport LossReport::make(double sup1, double sup2, double unsup, double cog, double mix, double lambda_u) {
    LossReport r;
    r.l_sup_1 = sup1;
    r.l_sup_2 = sup2;
    r.l_unsup = unsup;
    r.l_cog = cog;
    r.l_mix = mix;
    r.lambda_u = lambda_u;
    r.l_total = sup1 + sup2 + cog + mix + lambda_u * unsup;
    return r;
}

bool LossReport::identity_holds() const {
    return l_total == l_sup_1 + l_sup_2 + l_cog + l_mix + lambda_u * l_unsup;
}

namespace {

double value_of(const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; }

}  // namespace

torch::Tensor LossTerms::total() const {
    torch::Tensor acc;
    auto add = [&](const torch::Tensor& t, double w) {
        if (!t.defined()) return;
        torch::Tensor term = w == 1.0 ? t : t * w;
        acc = acc.defined() ? acc + term : term;
    };
    add(sup1, 1.0);
    add(sup2, 1.0);
    add(cog, 1.0);
    add(mix, 1.0);
    add(unsup, lambda_u);
    return acc;
}

LossReport LossTerms::report() const {
    return LossReport::make(value_of(sup1), value_of(sup2), value_of(unsup), value_of(cog), value_of(mix), lambda_u);
}

}  // namespace tss
