#pragma once

#include <torch/torch.h>

#include <vector>

namespace tss {

struct BackboneConfig {
    int in_channels = 1;
    int base_channels = 4;
    int depth = 3;  // encoder stages; spatial reduction 2^(depth-1)
    int num_classes = 2;
    int convs_per_stage = 1;
    double dropout = 0.0;  // applied before each prediction head

    int channels(int stage) const { return base_channels << stage; }
    int bottleneck_channels() const { return channels(depth - 1); }
    int reduction() const { return 1 << (depth - 1); }
    void validate() const;
    /// Throws ValidationError unless every spatial extent is divisible by 2^(depth-1).
    void check_spatial(const std::vector<int64_t>& dims) const;
};

/// Per-stage encoder outputs. Stage s has base_channels*2^s channels at
/// input/2^s resolution; `skips` holds stages 0..depth-2.
struct EncoderFeatures {
    std::vector<torch::Tensor> skips;
    torch::Tensor bottleneck;
};

/// Per-voxel class probabilities of the two decoders, each B x K x H x W x D.
struct DualPrediction {
    torch::Tensor first;
    torch::Tensor second;

    const torch::Tensor& operator[](int decoder) const { return decoder == 1 ? first : second; }
};

class ConvBlockImpl : public torch::nn::Module {
public:
    ConvBlockImpl(int in_channels, int out_channels, int repeats);
    torch::Tensor forward(torch::Tensor x);

private:
    torch::nn::ModuleList convs_{nullptr};
    torch::nn::ModuleList norms_{nullptr};
};
TORCH_MODULE(ConvBlock);

class EncoderImpl : public torch::nn::Module {
public:
    explicit EncoderImpl(const BackboneConfig& cfg);
    EncoderFeatures forward(const torch::Tensor& x);

private:
    BackboneConfig cfg_;
    torch::nn::ModuleList blocks_{nullptr};
    torch::nn::ModuleList downs_{nullptr};
    torch::nn::ModuleList down_norms_{nullptr};
};
TORCH_MODULE(Encoder);

enum class Upsampling { Transposed, Trilinear };

/// V-Net style decoder: upsample, add the skip, conv block; softmax head.
class DecoderImpl : public torch::nn::Module {
public:
    DecoderImpl(const BackboneConfig& cfg, Upsampling mode);
    torch::Tensor forward(const EncoderFeatures& f);

private:
    BackboneConfig cfg_;
    Upsampling mode_;
    torch::nn::ModuleList ups_{nullptr};
    torch::nn::ModuleList up_norms_{nullptr};
    torch::nn::ModuleList blocks_{nullptr};
    torch::nn::Dropout dropout_{nullptr};
    torch::nn::Conv3d head_{nullptr};
};
TORCH_MODULE(Decoder);

/// Shared encoder with two structurally different decoders: decoder 1
/// upsamples with transposed convolutions, decoder 2 with trilinear
/// interpolation followed by a 1x1x1 convolution.
class BackboneImpl : public torch::nn::Module {
public:
    explicit BackboneImpl(const BackboneConfig& cfg);

    EncoderFeatures encode(const torch::Tensor& x);
    DualPrediction decode_dual(const EncoderFeatures& f);

    const BackboneConfig& config() const { return cfg_; }
    Decoder& decoder(int index) { return index == 1 ? decoder1 : decoder2; }

    Encoder encoder{nullptr};
    Decoder decoder1{nullptr};
    Decoder decoder2{nullptr};

private:
    BackboneConfig cfg_;
};
TORCH_MODULE(Backbone);

/// Fan-in Kaiming normal for conv weights, zeros for biases.
void init_conv_weights(torch::nn::Module& module);

}  // namespace tss
