#pragma once

#include <torch/torch.h>

namespace tss {

/// Decoder of the pseudo-labeler, and the other one as the mix-loss target.
struct DecoderChoice {
    int pseudo_labeler = 1;
    int target = 2;
};

/// Lower supervised loss labels the unlabeled data; ties go to decoder 1.
/// Throws ValidationError on NaN.
DecoderChoice select_pseudo_labeler(double sup_loss_1, double sup_loss_2);

/// Per-voxel argmax over the class axis (dim 1) of B x K x ... probabilities;
/// ties resolve to the lowest class index. Returns int64 B x ... labels.
torch::Tensor binarize(const torch::Tensor& probs);

struct MixedVolumes {
    torch::Tensor labeled;    // labeled foreground over unlabeled background
    torch::Tensor unlabeled;  // pseudo-labeled foreground over labeled background
};

struct MixedLabels {
    torch::Tensor labeled;
    torch::Tensor unlabeled;
};

/// Foreground cut-and-paste. Volumes are B x 1 x H x W x D (or B x H x W x D),
/// label maps B x H x W x D with 0 = background; foreground is any
/// nonzero class.
MixedVolumes mix_volumes(const torch::Tensor& x_l, const torch::Tensor& y_l, const torch::Tensor& x_u, const torch::Tensor& y_p);
MixedLabels mix_labels(const torch::Tensor& y_l, const torch::Tensor& y_p);

struct MixedBatch {
    torch::Tensor x_mix_l, x_mix_u;
    torch::Tensor y_mix_l, y_mix_u;
    DecoderChoice decoders;
};

/// Builds the mixed batch from detached pseudo-labels of the selected decoder.
MixedBatch build_mixed_batch(const torch::Tensor& x_l, const torch::Tensor& y_l, const torch::Tensor& x_u,
                             const torch::Tensor& probs_u_1, const torch::Tensor& probs_u_2, DecoderChoice choice);

}  // namespace tss
