#pragma once

#include <torch/torch.h>

namespace tss {

/// Three orthogonal mean projections of a B x C x H x W x D feature volume.
///   coronal:  B x C x H x W  (averaged over depth)
///   sagittal: B x C x W x D  (averaged over height)
///   axial:    B x C x H x D  (averaged over width)
struct PlaneFeatures {
    torch::Tensor coronal;
    torch::Tensor sagittal;
    torch::Tensor axial;
};

PlaneFeatures pool_planes(const torch::Tensor& fv);

struct AttentionOutput {
    torch::Tensor output;   // B x N_q x d
    torch::Tensor weights;  // B x N_q x N_k, rows sum to 1
};

/// softmax(q k^T / sqrt(d)) v. `q` may be unbatched (N_q x d) and is then
/// shared across the batch.
AttentionOutput scaled_dot_attention(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v);

/// Single-head self-attention over the flattened spatial tokens of a plane.
class PlaneSelfAttentionImpl : public torch::nn::Module {
public:
    PlaneSelfAttentionImpl(int channels, int attn_dim);

    /// B x C x U x V plane -> B x (U*V) x d tokens.
    AttentionOutput forward(const torch::Tensor& plane);

    torch::nn::Linear query{nullptr}, key{nullptr}, value{nullptr};
};
TORCH_MODULE(PlaneSelfAttention);

struct TextEnhanceOutput {
    torch::Tensor enhanced;        // B x C x U x V
    torch::Tensor class_weights;   // S: B x K x (U*V)
    torch::Tensor class_context;   // O = S V(a): B x K x d
    torch::Tensor redistributed;   // R = S^T O: B x (U*V) x d
};

/// Text-to-plane cross attention. Class text features query the attended
/// plane tokens; the per-class context O is spread back onto positions
/// with the same weights (R = S^T O) and projected from d to C channels.
class TextCrossAttentionImpl : public torch::nn::Module {
public:
    TextCrossAttentionImpl(int text_dim, int attn_dim, int channels);

    TextEnhanceOutput forward(const torch::Tensor& text, const torch::Tensor& tokens, int64_t u, int64_t v);

    torch::nn::Linear query{nullptr}, key{nullptr}, value{nullptr}, output{nullptr};
};
TORCH_MODULE(TextCrossAttention);

/// Per-voxel broadcast of the three planes plus the residual:
///   out[c,x,y,z] = w_c P_c[c,x,y] + w_s P_s[c,y,z] + w_a P_a[c,x,z] + fv[c,x,y,z]
/// `weights` holds (w_c, w_s, w_a).
torch::Tensor reconstruct_voxels(const PlaneFeatures& planes, const torch::Tensor& fv, const torch::Tensor& weights);

struct TmrConfig {
    int channels = 16;  // C of the bottleneck
    int text_dim = 16;  // C_t
    int attn_dim = 16;  // d
};

/// Text-enhanced multiplanar block: drop-in residual on the bottleneck.
class TmrImpl : public torch::nn::Module {
public:
    explicit TmrImpl(const TmrConfig& cfg);

    torch::Tensor forward(const torch::Tensor& fv, const torch::Tensor& text);
    /// Enhanced planes before reconstruction.
    PlaneFeatures enhance(const torch::Tensor& fv, const torch::Tensor& text);

    const TmrConfig& config() const { return cfg_; }

    PlaneSelfAttention coronal_self{nullptr}, sagittal_self{nullptr}, axial_self{nullptr};
    TextCrossAttention coronal_text{nullptr}, sagittal_text{nullptr}, axial_text{nullptr};
    torch::Tensor plane_weights;  // (w_c, w_s, w_a), zero at construction

private:
    TmrConfig cfg_;
};
TORCH_MODULE(Tmr);

/// Ablation alternative: the flattened class text features are projected
/// to C channels and added identically at every voxel.
class RepeatInjectionImpl : public torch::nn::Module {
public:
    RepeatInjectionImpl(int num_classes, int text_dim, int channels);

    torch::Tensor forward(const torch::Tensor& fv, const torch::Tensor& text);

    torch::nn::Linear project{nullptr};
    torch::Tensor weight;  // scalar gate, zero at construction
};
TORCH_MODULE(RepeatInjection);

}  // namespace tss
