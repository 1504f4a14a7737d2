#include "tss/textprompt.hpp"

#include <string>

#include "binio.hpp"
#include "tss/errors.hpp"

namespace tss {

TextPromptBankImpl::TextPromptBankImpl(int num_classes, int context_length, int text_dim) {
    if (num_classes < 1 || context_length < 1 || text_dim < 1)
        throw ValidationError("text prompt bank: K, M and C_t must all be >= 1");
    context = register_parameter("context", torch::randn({context_length, text_dim}) * kContextInitStd);
    class_emb = register_parameter("class_emb", torch::randn({num_classes, text_dim}));
    mixer = register_module("mixer", torch::nn::Linear(text_dim, text_dim));
}

torch::Tensor TextPromptBankImpl::forward() {
    const double count = static_cast<double>(context.size(0) + 1);
    torch::Tensor pooled = (context.sum(0, /*keepdim=*/true) + class_emb) / count;
    return mixer->forward(pooled);
}

void TextPromptBankImpl::freeze_class_embeddings() { class_emb.set_requires_grad(false); }

void TextPromptBankImpl::load_class_embeddings(const std::filesystem::path& path) {
    torch::Tensor rows = read_embedding_file(path);
    if (rows.size(0) != class_emb.size(0) || rows.size(1) != class_emb.size(1))
        throw ValidationError(path.string() + ": embedding file is " + std::to_string(rows.size(0)) + "x" + std::to_string(rows.size(1)) +
                              ", bank expects " + std::to_string(class_emb.size(0)) + "x" + std::to_string(class_emb.size(1)));
    torch::NoGradGuard no_grad;
    class_emb.copy_(rows.to(class_emb.dtype()));
    freeze_class_embeddings();
}

void TextPromptBankImpl::save_class_embeddings(const std::filesystem::path& path) const {
    write_embedding_file(path, class_emb);
}

void write_embedding_file(const std::filesystem::path& path, const torch::Tensor& rows) {
    if (rows.dim() != 2) throw ValidationError("embedding rows must be a 2-D tensor");
    torch::Tensor data = rows.detach().to(torch::kFloat32).contiguous();
    binio::Writer out(path);
    out.magic("TSSEMB1");
    out.u32(static_cast<std::uint32_t>(data.size(0)));
    out.u32(static_cast<std::uint32_t>(data.size(1)));
    out.f32_array({data.data_ptr<float>(), static_cast<std::size_t>(data.numel())});
    out.close();
}

torch::Tensor read_embedding_file(const std::filesystem::path& path) {
    binio::Reader in(path);
    in.expect_magic("TSSEMB1");
    const std::uint32_t k = in.u32();
    const std::uint32_t c = in.u32();
    if (k == 0 || c == 0 || std::uint64_t{k} * c > (std::uint64_t{1} << 28))
        throw ValidationError(path.string() + ": invalid embedding dims");
    std::vector<float> values = in.f32_array(std::size_t{k} * c);
    if (!in.at_end()) throw FormatError(path.string() + ": trailing bytes after payload");
    return torch::from_blob(values.data(), {static_cast<int64_t>(k), static_cast<int64_t>(c)}, torch::kFloat32).clone();
}

}  // namespace tss
