#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>

#include "tss/archive.hpp"
#include "tss/backbone.hpp"
#include "tss/csa.hpp"
#include "tss/textprompt.hpp"
#include "tss/tmr.hpp"

namespace tss {

enum class TextMode { Multiplanar, Repeat };

std::string to_string(TextMode m);
TextMode parse_text_mode(const std::string& s);

struct ModelConfig {
    BackboneConfig backbone;
    bool with_text = true;  // false builds the plain dual-decoder network
    TextMode text_mode = TextMode::Multiplanar;
    int context_length = 4;  // M
    int text_dim = 0;        // C_t; 0 = attention dim
    int attn_dim = 0;        // d; 0 = bottleneck channels
    bool inject_text = true;  // inference-time routing through the injector

    /// Copy with the 0 = default sizes filled in.
    ModelConfig resolved() const;
    void validate() const;

    std::map<std::string, std::string> to_meta() const;
    static ModelConfig from_meta(const std::map<std::string, std::string>& meta);
};

struct ModelOutput {
    EncoderFeatures features;  // raw encoder output (bottleneck before injection)
    torch::Tensor injected;    // bottleneck fed to the decoders
    torch::Tensor text;        // K x C_t, undefined unless requested
    DualPrediction pred;
};

/// Backbone plus the text pathway: prompt bank, multiplanar (or repeat)
/// injection at the bottleneck and the projection head used for semantic
/// alignment. Text modules are registered after the backbone so that a
/// seeded construction initializes the backbone identically with or
/// without them.
class TextSemiSegImpl : public torch::nn::Module {
public:
    explicit TextSemiSegImpl(const ModelConfig& cfg);

    /// `inject_text` routes the bottleneck through the text injector;
    /// `want_text` computes F_t even when not injecting.
    ModelOutput forward(const torch::Tensor& x, bool inject_text, bool want_text);

    /// Inference path: averaged decoder probabilities, B x K x H x W x D.
    torch::Tensor predict(const torch::Tensor& x);

    const ModelConfig& config() const { return cfg_; }
    long forward_count() const { return forward_count_; }

    Backbone backbone{nullptr};
    TextPromptBank prompts{nullptr};
    Tmr tmr{nullptr};
    RepeatInjection repeat{nullptr};
    ProjectionHead projection{nullptr};

private:
    ModelConfig cfg_;
    long forward_count_ = 0;
};
TORCH_MODULE(TextSemiSeg);

/// Every named parameter and buffer in a stable dotted-path order.
std::vector<std::pair<std::string, torch::Tensor>> named_state(torch::nn::Module& module);

std::string encode_meta(const std::map<std::string, std::string>& meta);
std::map<std::string, std::string> decode_meta(const std::string& text);

/// Model weights + config as an Archive (optional extra entries appended).
Archive model_archive(TextSemiSeg& model, const std::map<std::string, std::string>& extra_meta = {});
void save_model(const std::filesystem::path& path, TextSemiSeg& model);
/// Rebuilds the network from the archive header and copies every tensor.
TextSemiSeg load_model(const std::filesystem::path& path);
TextSemiSeg model_from_archive(const Archive& archive);

/// Converts a volume to a 1 x 1 x H x W x D float tensor.
torch::Tensor volume_tensor(const std::vector<float>& voxels, int64_t h, int64_t w, int64_t d);

}  // namespace tss
