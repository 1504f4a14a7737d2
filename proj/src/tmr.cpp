#include "tss/tmr.hpp"

#include <cmath>

#include "tss/errors.hpp"

namespace tss {

PlaneFeatures pool_planes(const torch::Tensor& fv) {
    if (fv.dim() != 5) throw ValidationError("pool_planes: expected B x C x H x W x D");
    return {fv.mean(4), fv.mean(2), fv.mean(3)};
}

AttentionOutput scaled_dot_attention(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(k.size(-1)));
    torch::Tensor logits = torch::matmul(q, k.transpose(-2, -1)) * scale;
    torch::Tensor weights = torch::softmax(logits, -1);
    return {torch::matmul(weights, v), weights};
}

namespace {

torch::nn::Linear projection(int in, int out, bool bias) {
    return torch::nn::Linear(torch::nn::LinearOptions(in, out).bias(bias));
}

// B x C x U x V -> B x (U*V) x C
torch::Tensor to_tokens(const torch::Tensor& plane) { return plane.flatten(2).transpose(1, 2); }

}  // namespace

PlaneSelfAttentionImpl::PlaneSelfAttentionImpl(int channels, int attn_dim) {
    query = register_module("query", projection(channels, attn_dim, false));
    key = register_module("key", projection(channels, attn_dim, false));
    value = register_module("value", projection(channels, attn_dim, false));
}

AttentionOutput PlaneSelfAttentionImpl::forward(const torch::Tensor& plane) {
    if (plane.dim() != 4) throw ValidationError("plane self-attention: expected B x C x U x V");
    torch::Tensor tokens = to_tokens(plane);
    return scaled_dot_attention(query->forward(tokens), key->forward(tokens), value->forward(tokens));
}

TextCrossAttentionImpl::TextCrossAttentionImpl(int text_dim, int attn_dim, int channels) {
    query = register_module("query", projection(text_dim, attn_dim, false));
    key = register_module("key", projection(attn_dim, attn_dim, false));
    value = register_module("value", projection(attn_dim, attn_dim, false));
    output = register_module("output", projection(attn_dim, channels, true));
}

TextEnhanceOutput TextCrossAttentionImpl::forward(const torch::Tensor& text, const torch::Tensor& tokens, int64_t u, int64_t v) {
    if (text.dim() != 2 || tokens.dim() != 3 || tokens.size(1) != u * v)
        throw ValidationError("text enhancement: expected K x C_t text and B x (U*V) x d tokens");
    TextEnhanceOutput out;
    AttentionOutput att = scaled_dot_attention(query->forward(text), key->forward(tokens), value->forward(tokens));
    out.class_weights = att.weights;
    out.class_context = att.output;
    out.redistributed = torch::matmul(att.weights.transpose(1, 2), att.output);
    torch::Tensor projected = output->forward(out.redistributed);  // B x N x C
    out.enhanced = projected.transpose(1, 2).reshape({tokens.size(0), projected.size(2), u, v});
    return out;
}

torch::Tensor reconstruct_voxels(const PlaneFeatures& p, const torch::Tensor& fv, const torch::Tensor& weights) {
    if (fv.dim() != 5 || weights.numel() != 3) throw ValidationError("reconstruct_voxels: bad shapes");
    torch::Tensor c = p.coronal.unsqueeze(4);   // B C H W 1
    torch::Tensor s = p.sagittal.unsqueeze(2);  // B C 1 W D
    torch::Tensor a = p.axial.unsqueeze(3);     // B C H 1 D
    return weights[0] * c + weights[1] * s + weights[2] * a + fv;
}

TmrImpl::TmrImpl(const TmrConfig& cfg) : cfg_(cfg) {
    if (cfg.channels < 1 || cfg.text_dim < 1 || cfg.attn_dim < 1) throw ValidationError("tmr: dims must be >= 1");
    coronal_self = register_module("coronal_self", PlaneSelfAttention(cfg.channels, cfg.attn_dim));
    sagittal_self = register_module("sagittal_self", PlaneSelfAttention(cfg.channels, cfg.attn_dim));
    axial_self = register_module("axial_self", PlaneSelfAttention(cfg.channels, cfg.attn_dim));
    coronal_text = register_module("coronal_text", TextCrossAttention(cfg.text_dim, cfg.attn_dim, cfg.channels));
    sagittal_text = register_module("sagittal_text", TextCrossAttention(cfg.text_dim, cfg.attn_dim, cfg.channels));
    axial_text = register_module("axial_text", TextCrossAttention(cfg.text_dim, cfg.attn_dim, cfg.channels));
    plane_weights = register_parameter("plane_weights", torch::zeros({3}));
}

PlaneFeatures TmrImpl::enhance(const torch::Tensor& fv, const torch::Tensor& text) {
    if (fv.dim() != 5 || fv.size(1) != cfg_.channels) throw ValidationError("tmr: feature channel mismatch");
    if (text.dim() != 2 || text.size(1) != cfg_.text_dim) throw ValidationError("tmr: text feature dim mismatch");
    const PlaneFeatures planes = pool_planes(fv);
    auto run = [&](PlaneSelfAttention& self, TextCrossAttention& cross, const torch::Tensor& plane) {
        torch::Tensor tokens = self->forward(plane).output;
        return cross->forward(text, tokens, plane.size(2), plane.size(3)).enhanced;
    };
    return {run(coronal_self, coronal_text, planes.coronal), run(sagittal_self, sagittal_text, planes.sagittal),
            run(axial_self, axial_text, planes.axial)};
}

torch::Tensor TmrImpl::forward(const torch::Tensor& fv, const torch::Tensor& text) {
    return reconstruct_voxels(enhance(fv, text), fv, plane_weights);
}

RepeatInjectionImpl::RepeatInjectionImpl(int num_classes, int text_dim, int channels) {
    project = register_module("project", torch::nn::Linear(num_classes * text_dim, channels));
    weight = register_parameter("weight", torch::zeros({1}));
}

torch::Tensor RepeatInjectionImpl::forward(const torch::Tensor& fv, const torch::Tensor& text) {
    torch::Tensor tiled = project->forward(text.reshape({1, -1})).reshape({1, -1, 1, 1, 1});
    if (tiled.size(1) != fv.size(1)) throw ValidationError("repeat injection: channel mismatch");
    return weight * tiled + fv;
}

}  // namespace tss
