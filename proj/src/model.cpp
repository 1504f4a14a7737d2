#include "tss/model.hpp"

#include <sstream>

#include "tss/errors.hpp"

namespace tss {

std::string to_string(TextMode m) { return m == TextMode::Multiplanar ? "multiplanar" : "repeat"; }

TextMode parse_text_mode(const std::string& s) {
    if (s == "multiplanar") return TextMode::Multiplanar;
    if (s == "repeat") return TextMode::Repeat;
    throw ValidationError("text mode must be 'multiplanar' or 'repeat', got '" + s + "'");
}

ModelConfig ModelConfig::resolved() const {
    ModelConfig c = *this;
    if (c.attn_dim == 0) c.attn_dim = c.backbone.bottleneck_channels();
    if (c.text_dim == 0) c.text_dim = c.attn_dim;
    return c;
}

void ModelConfig::validate() const {
    backbone.validate();
    if (context_length < 1) throw ValidationError("context_length must be >= 1");
    if (text_dim < 0 || attn_dim < 0) throw ValidationError("text_dim and attn_dim must be >= 0");
}

std::map<std::string, std::string> ModelConfig::to_meta() const {
    const ModelConfig c = resolved();
    return {{"in_channels", std::to_string(c.backbone.in_channels)},
            {"base_channels", std::to_string(c.backbone.base_channels)},
            {"depth", std::to_string(c.backbone.depth)},
            {"num_classes", std::to_string(c.backbone.num_classes)},
            {"convs_per_stage", std::to_string(c.backbone.convs_per_stage)},
            {"dropout", std::to_string(c.backbone.dropout)},
            {"with_text", c.with_text ? "1" : "0"},
            {"text_mode", to_string(c.text_mode)},
            {"context_length", std::to_string(c.context_length)},
            {"text_dim", std::to_string(c.text_dim)},
            {"attn_dim", std::to_string(c.attn_dim)},
            {"inject_text", c.inject_text ? "1" : "0"}};
}

ModelConfig ModelConfig::from_meta(const std::map<std::string, std::string>& meta) {
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = meta.find(key);
        if (it == meta.end()) throw FormatError("checkpoint header lacks '" + key + "'");
        return it->second;
    };
    auto get_int = [&](const std::string& key) {
        try {
            return std::stoi(get(key));
        } catch (const std::invalid_argument&) {
            throw FormatError("checkpoint header: bad integer for '" + key + "'");
        }
    };
    ModelConfig c;
    c.backbone.in_channels = get_int("in_channels");
    c.backbone.base_channels = get_int("base_channels");
    c.backbone.depth = get_int("depth");
    c.backbone.num_classes = get_int("num_classes");
    c.backbone.convs_per_stage = get_int("convs_per_stage");
    c.backbone.dropout = std::stod(get("dropout"));
    c.with_text = get("with_text") == "1";
    c.text_mode = parse_text_mode(get("text_mode"));
    c.context_length = get_int("context_length");
    c.text_dim = get_int("text_dim");
    c.attn_dim = get_int("attn_dim");
    c.inject_text = get("inject_text") == "1";
    return c;
}

TextSemiSegImpl::TextSemiSegImpl(const ModelConfig& cfg) : cfg_(cfg.resolved()) {
    cfg_.validate();
    backbone = register_module("backbone", Backbone(cfg_.backbone));
    if (!cfg_.with_text) return;
    const int channels = cfg_.backbone.bottleneck_channels();
    const int classes = cfg_.backbone.num_classes;
    prompts = register_module("prompts", TextPromptBank(classes, cfg_.context_length, cfg_.text_dim));
    if (cfg_.text_mode == TextMode::Multiplanar)
        tmr = register_module("tmr", Tmr(TmrConfig{channels, cfg_.text_dim, cfg_.attn_dim}));
    else
        repeat = register_module("repeat", RepeatInjection(classes, cfg_.text_dim, channels));
    projection = register_module("projection", ProjectionHead(channels, cfg_.text_dim));
}

ModelOutput TextSemiSegImpl::forward(const torch::Tensor& x, bool inject_text, bool want_text) {
    ++forward_count_;
    if ((inject_text || want_text) && !cfg_.with_text) throw ValidationError("model was built without the text pathway");
    ModelOutput out;
    out.features = backbone->encode(x);
    if (inject_text || want_text) out.text = prompts->forward();
    out.injected = out.features.bottleneck;
    if (inject_text) out.injected = tmr ? tmr->forward(out.injected, out.text) : repeat->forward(out.injected, out.text);
    EncoderFeatures decoded_from{out.features.skips, out.injected};
    out.pred = backbone->decode_dual(decoded_from);
    return out;
}

torch::Tensor TextSemiSegImpl::predict(const torch::Tensor& x) {
    const bool inject = cfg_.with_text && cfg_.inject_text;
    ModelOutput out = forward(x, inject, false);
    return 0.5 * (out.pred.first + out.pred.second);
}

std::vector<std::pair<std::string, torch::Tensor>> named_state(torch::nn::Module& module) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& item : module.named_parameters(/*recurse=*/true)) out.emplace_back(item.key(), item.value());
    for (const auto& item : module.named_buffers(/*recurse=*/true)) out.emplace_back(item.key(), item.value());
    return out;
}

std::string encode_meta(const std::map<std::string, std::string>& meta) {
    std::ostringstream os;
    for (const auto& [k, v] : meta) os << k << " = " << v << "\n";
    return os.str();
}

std::map<std::string, std::string> decode_meta(const std::string& text) {
    std::map<std::string, std::string> meta;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        meta[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return meta;
}

Archive model_archive(TextSemiSeg& model, const std::map<std::string, std::string>& extra_meta) {
    auto meta = model->config().to_meta();
    if (model->prompts) meta["class_emb_frozen"] = model->prompts->class_embeddings_frozen() ? "1" : "0";
    for (const auto& [k, v] : extra_meta) meta[k] = v;
    Archive a;
    a.meta = encode_meta(meta);
    a.tensors = named_state(*model);
    return a;
}

void save_model(const std::filesystem::path& path, TextSemiSeg& model) { write_archive(path, model_archive(model)); }

TextSemiSeg model_from_archive(const Archive& archive) {
    const auto meta = decode_meta(archive.meta);
    TextSemiSeg model(ModelConfig::from_meta(meta));
    torch::NoGradGuard no_grad;
    for (auto& [name, tensor] : named_state(*model)) {
        const torch::Tensor* stored = archive.find(name);
        if (!stored) throw FormatError("checkpoint lacks tensor '" + name + "'");
        if (stored->sizes() != tensor.sizes()) throw FormatError("checkpoint tensor '" + name + "' has the wrong shape");
        tensor.copy_(*stored);
    }
    auto frozen = meta.find("class_emb_frozen");
    if (model->prompts && frozen != meta.end() && frozen->second == "1") model->prompts->freeze_class_embeddings();
    return model;
}

TextSemiSeg load_model(const std::filesystem::path& path) { return model_from_archive(read_archive(path)); }

torch::Tensor volume_tensor(const std::vector<float>& voxels, int64_t h, int64_t w, int64_t d) {
    if (static_cast<int64_t>(voxels.size()) != h * w * d) throw ValidationError("volume_tensor: size mismatch");
    return torch::from_blob(const_cast<float*>(voxels.data()), {1, 1, h, w, d}, torch::kFloat32).clone();
}

}  // namespace tss
