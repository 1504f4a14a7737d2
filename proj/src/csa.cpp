#include "tss/csa.hpp"

#include "tss/errors.hpp"

namespace tss {

ProjectionHeadImpl::ProjectionHeadImpl(int channels, int text_dim) {
    conv = register_module("conv", torch::nn::Conv3d(torch::nn::Conv3dOptions(channels, text_dim, 1)));
}

torch::Tensor ProjectionHeadImpl::forward(const torch::Tensor& fv) { return conv->forward(fv); }

torch::Tensor class_masked_average(const torch::Tensor& fvp, const torch::Tensor& mask) {
    if (fvp.dim() != 5 || mask.dim() != 4 || fvp.size(0) != mask.size(0) || fvp.size(2) != mask.size(1) ||
        fvp.size(3) != mask.size(2) || fvp.size(4) != mask.size(3))
        throw ValidationError("class_masked_average: feature and mask shapes differ");
    return (fvp * mask.unsqueeze(1)).mean({2, 3, 4});
}

torch::Tensor downsample_probs(const torch::Tensor& probs, at::IntArrayRef spatial) {
    if (probs.dim() != 5 || spatial.size() != 3) throw ValidationError("downsample_probs: expected B x K x H x W x D");
    std::vector<int64_t> kernel(3);
    for (int a = 0; a < 3; ++a) {
        const int64_t n = probs.size(a + 2);
        if (spatial[a] < 1 || n % spatial[a] != 0) throw ValidationError("downsample_probs: non-integer reduction");
        kernel[a] = n / spatial[a];
    }
    if (kernel == std::vector<int64_t>{1, 1, 1}) return probs;
    return torch::avg_pool3d(probs, kernel, kernel);
}

torch::Tensor cognitive_loss(const torch::Tensor& text, const torch::Tensor& fvp, const torch::Tensor& probs1,
                             const torch::Tensor& probs2) {
    if (text.dim() != 2 || fvp.dim() != 5 || text.size(1) != fvp.size(1))
        throw ValidationError("cognitive_loss: text dim does not match projected features");
    if (probs1.sizes() != probs2.sizes() || probs1.size(1) != text.size(0))
        throw ValidationError("cognitive_loss: prediction shapes inconsistent with K");
    const int64_t k_count = text.size(0);
    torch::Tensor per_sample = torch::zeros({fvp.size(0)}, fvp.options());
    for (int64_t k = 0; k < k_count; ++k) {
        torch::Tensor tk = text[k].unsqueeze(0);  // 1 x C_t
        torch::Tensor m1 = class_masked_average(fvp, probs1.select(1, k));
        torch::Tensor m2 = class_masked_average(fvp, probs2.select(1, k));
        per_sample = per_sample + (tk - m1).pow(2).sum(1) + (tk - m2).pow(2).sum(1);
    }
    return per_sample.mean();
}

}  // namespace tss
