#include "tss/backbone.hpp"

#include <string>

#include "tss/errors.hpp"

namespace F = torch::nn::functional;

namespace tss {

void BackboneConfig::validate() const {
    if (in_channels < 1) throw ValidationError("backbone: in_channels must be >= 1");
    if (base_channels < 1) throw ValidationError("backbone: base_channels must be >= 1");
    if (depth < 1 || depth > 8) throw ValidationError("backbone: depth must be in [1, 8]");
    if (num_classes < 2) throw ValidationError("backbone: num_classes must be >= 2");
    if (convs_per_stage < 1) throw ValidationError("backbone: convs_per_stage must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("backbone: dropout must be in [0, 1)");
}

void BackboneConfig::check_spatial(const std::vector<int64_t>& dims) const {
    for (int64_t n : dims)
        if (n < reduction() || n % reduction() != 0)
            throw ValidationError("spatial extent " + std::to_string(n) + " not divisible by " + std::to_string(reduction()) +
                                  " (depth " + std::to_string(depth) + ")");
}

void init_conv_weights(torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    for (auto& m : module.modules(/*include_self=*/false)) {
        if (auto* c = m->as<torch::nn::Conv3dImpl>()) {
            torch::nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanIn, torch::kReLU);
            if (c->bias.defined()) c->bias.zero_();
        } else if (auto* t = m->as<torch::nn::ConvTranspose3dImpl>()) {
            torch::nn::init::kaiming_normal_(t->weight, 0.0, torch::kFanIn, torch::kReLU);
            if (t->bias.defined()) t->bias.zero_();
        }
    }
}

namespace {

torch::nn::InstanceNorm3d make_norm(int channels) {
    return torch::nn::InstanceNorm3d(torch::nn::InstanceNorm3dOptions(channels).affine(true));
}

}  // namespace

ConvBlockImpl::ConvBlockImpl(int in_channels, int out_channels, int repeats) {
    convs_ = register_module("conv", torch::nn::ModuleList());
    norms_ = register_module("norm", torch::nn::ModuleList());
    for (int i = 0; i < repeats; ++i) {
        convs_->push_back(torch::nn::Conv3d(torch::nn::Conv3dOptions(i == 0 ? in_channels : out_channels, out_channels, 3).padding(1)));
        norms_->push_back(make_norm(out_channels));
    }
}

torch::Tensor ConvBlockImpl::forward(torch::Tensor x) {
    for (std::size_t i = 0; i < convs_->size(); ++i) {
        x = convs_[i]->as<torch::nn::Conv3d>()->forward(x);
        x = torch::relu(norms_[i]->as<torch::nn::InstanceNorm3d>()->forward(x));
    }
    return x;
}

EncoderImpl::EncoderImpl(const BackboneConfig& cfg) : cfg_(cfg) {
    blocks_ = register_module("stage", torch::nn::ModuleList());
    downs_ = register_module("down", torch::nn::ModuleList());
    down_norms_ = register_module("down_norm", torch::nn::ModuleList());
    blocks_->push_back(ConvBlock(cfg.in_channels, cfg.channels(0), cfg.convs_per_stage));
    for (int s = 1; s < cfg.depth; ++s) {
        downs_->push_back(torch::nn::Conv3d(torch::nn::Conv3dOptions(cfg.channels(s - 1), cfg.channels(s), 2).stride(2)));
        down_norms_->push_back(make_norm(cfg.channels(s)));
        blocks_->push_back(ConvBlock(cfg.channels(s), cfg.channels(s), cfg.convs_per_stage));
    }
}

EncoderFeatures EncoderImpl::forward(const torch::Tensor& input) {
    if (input.dim() != 5 || input.size(1) != cfg_.in_channels)
        throw ValidationError("encode: expected B x " + std::to_string(cfg_.in_channels) + " x H x W x D input");
    cfg_.check_spatial({input.size(2), input.size(3), input.size(4)});

    EncoderFeatures f;
    torch::Tensor x = blocks_[0]->as<ConvBlock>()->forward(input);
    for (int s = 1; s < cfg_.depth; ++s) {
        f.skips.push_back(x);
        x = downs_[s - 1]->as<torch::nn::Conv3d>()->forward(x);
        x = torch::relu(down_norms_[s - 1]->as<torch::nn::InstanceNorm3d>()->forward(x));
        x = blocks_[s]->as<ConvBlock>()->forward(x);
    }
    f.bottleneck = x;
    return f;
}

DecoderImpl::DecoderImpl(const BackboneConfig& cfg, Upsampling mode) : cfg_(cfg), mode_(mode) {
    ups_ = register_module("up", torch::nn::ModuleList());
    up_norms_ = register_module("up_norm", torch::nn::ModuleList());
    blocks_ = register_module("stage", torch::nn::ModuleList());
    for (int s = cfg.depth - 1; s >= 1; --s) {
        const int in = cfg.channels(s);
        const int out = cfg.channels(s - 1);
        if (mode == Upsampling::Transposed)
            ups_->push_back(torch::nn::ConvTranspose3d(torch::nn::ConvTranspose3dOptions(in, out, 2).stride(2)));
        else
            ups_->push_back(torch::nn::Conv3d(torch::nn::Conv3dOptions(in, out, 1)));
        up_norms_->push_back(make_norm(out));
        blocks_->push_back(ConvBlock(out, out, cfg.convs_per_stage));
    }
    dropout_ = register_module("dropout", torch::nn::Dropout(cfg.dropout));
    head_ = register_module("head", torch::nn::Conv3d(torch::nn::Conv3dOptions(cfg.channels(0), cfg.num_classes, 1)));
}

torch::Tensor DecoderImpl::forward(const EncoderFeatures& f) {
    if (static_cast<int>(f.skips.size()) != cfg_.depth - 1)
        throw ValidationError("decode: expected " + std::to_string(cfg_.depth - 1) + " skip tensors");
    if (!f.bottleneck.defined() || f.bottleneck.dim() != 5 || f.bottleneck.size(1) != cfg_.bottleneck_channels())
        throw ValidationError("decode: bottleneck channel mismatch");

    torch::Tensor x = f.bottleneck;
    for (int j = 0; j + 1 < cfg_.depth; ++j) {
        const int s = cfg_.depth - 1 - j;
        const torch::Tensor& skip = f.skips[s - 1];
        if (skip.dim() != 5 || skip.size(1) != cfg_.channels(s - 1) || skip.size(2) != 2 * x.size(2) ||
            skip.size(3) != 2 * x.size(3) || skip.size(4) != 2 * x.size(4))
            throw ValidationError("decode: skip " + std::to_string(s - 1) + " shape mismatch");
        if (mode_ == Upsampling::Transposed) {
            x = ups_[j]->as<torch::nn::ConvTranspose3d>()->forward(x);
        } else {
            x = F::interpolate(x, F::InterpolateFuncOptions()
                                      .scale_factor(std::vector<double>{2.0, 2.0, 2.0})
                                      .mode(torch::kTrilinear)
                                      .align_corners(false));
            x = ups_[j]->as<torch::nn::Conv3d>()->forward(x);
        }
        x = torch::relu(up_norms_[j]->as<torch::nn::InstanceNorm3d>()->forward(x));
        x = blocks_[j]->as<ConvBlock>()->forward(x + skip);
    }
    if (cfg_.dropout > 0.0) x = dropout_->forward(x);
    return torch::softmax(head_->forward(x), 1);
}

BackboneImpl::BackboneImpl(const BackboneConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    encoder = register_module("encoder", Encoder(cfg));
    decoder1 = register_module("decoder1", Decoder(cfg, Upsampling::Transposed));
    decoder2 = register_module("decoder2", Decoder(cfg, Upsampling::Trilinear));
    init_conv_weights(*this);
}

EncoderFeatures BackboneImpl::encode(const torch::Tensor& x) { return encoder->forward(x); }

DualPrediction BackboneImpl::decode_dual(const EncoderFeatures& f) {
    return {decoder1->forward(f), decoder2->forward(f)};
}

}  // namespace tss
