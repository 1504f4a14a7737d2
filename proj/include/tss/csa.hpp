#pragma once

#include <torch/torch.h>

namespace tss {

/// Per-voxel linear map C -> C_t (1x1x1 convolution).
class ProjectionHeadImpl : public torch::nn::Module {
public:
    ProjectionHeadImpl(int channels, int text_dim);
    torch::Tensor forward(const torch::Tensor& fv);

    torch::nn::Conv3d conv{nullptr};
};
TORCH_MODULE(ProjectionHead);

/// Plain global average of fvp * mask per channel.
/// fvp: B x C_t x h x w x d, mask: B x h x w x d  ->  B x C_t.
torch::Tensor class_masked_average(const torch::Tensor& fvp, const torch::Tensor& mask);

/// Average-pools B x K x H x W x D probabilities down to the given spatial
/// extent (integer reduction factor per axis).
torch::Tensor downsample_probs(const torch::Tensor& probs, at::IntArrayRef spatial);

/// Sum over classes and channels of the squared distance between each
/// class text feature and both decoders' masked averages, averaged over
/// the batch. Probabilities must already be at the resolution of fvp.
torch::Tensor cognitive_loss(const torch::Tensor& text, const torch::Tensor& fvp, const torch::Tensor& probs1,
                             const torch::Tensor& probs2);

}  // namespace tss
