#pragma once

#include <torch/torch.h>

#include <filesystem>

namespace tss {

/// Learnable prompt bank standing in for a frozen CLIP text encoder.
///
/// Holds M shared context vectors V_1..V_M and one class embedding E_k per
/// category. The class text feature is the mean of the sequence
/// [V_1 .. V_M, E_k] passed through a learnable linear mixer:
///
///     F_t[k] = mixer((V_1 + ... + V_M + E_k) / (M + 1))
///
/// Class embeddings may be replaced by externally supplied vectors
/// (e.g. genuine CLIP class embeddings), which are then frozen.
class TextPromptBankImpl : public torch::nn::Module {
public:
    TextPromptBankImpl(int num_classes, int context_length, int text_dim);

    /// K x C_t class text features.
    torch::Tensor forward();

    /// Replaces class embeddings from a TSSEMB1 file and freezes them.
    /// Throws ValidationError on a row/column count mismatch.
    void load_class_embeddings(const std::filesystem::path& path);
    void save_class_embeddings(const std::filesystem::path& path) const;
    bool class_embeddings_frozen() const { return !class_emb.requires_grad(); }
    void freeze_class_embeddings();

    int num_classes() const { return static_cast<int>(class_emb.size(0)); }
    int context_length() const { return static_cast<int>(context.size(0)); }
    int text_dim() const { return static_cast<int>(context.size(1)); }

    torch::Tensor context;    // M x C_t
    torch::Tensor class_emb;  // K x C_t
    torch::nn::Linear mixer{nullptr};
};
TORCH_MODULE(TextPromptBank);

inline constexpr double kContextInitStd = 0.02;

// Class-embedding file: magic "TSSEMB1\0", u32 K, u32 C_t, f32 payload
// row-major, little-endian.
void write_embedding_file(const std::filesystem::path& path, const torch::Tensor& rows);
torch::Tensor read_embedding_file(const std::filesystem::path& path);

}  // namespace tss
