#include "tss/archive.hpp"

#include "binio.hpp"
#include "tss/errors.hpp"

namespace tss {

namespace {

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxName = 4096;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 30;

}  // namespace

const torch::Tensor* Archive::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
    binio::Writer out(path);
    out.magic("TSSCKPT1");
    out.u32(static_cast<std::uint32_t>(archive.meta.size()));
    out.bytes({reinterpret_cast<const std::uint8_t*>(archive.meta.data()), archive.meta.size()});
    out.u32(static_cast<std::uint32_t>(archive.tensors.size()));
    for (const auto& [name, tensor] : archive.tensors) {
        torch::Tensor t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
        out.u32(static_cast<std::uint32_t>(name.size()));
        out.bytes({reinterpret_cast<const std::uint8_t*>(name.data()), name.size()});
        out.u32(static_cast<std::uint32_t>(t.dim()));
        for (int64_t s : t.sizes()) out.u32(static_cast<std::uint32_t>(s));
        out.f32_array({t.data_ptr<float>(), static_cast<std::size_t>(t.numel())});
    }
    out.close();
}

Archive read_archive(const std::filesystem::path& path) {
    binio::Reader in(path);
    in.expect_magic("TSSCKPT1");
    Archive a;
    const std::uint32_t meta_len = in.u32();
    if (meta_len > (1u << 20)) throw FormatError(path.string() + ": oversized header");
    a.meta = in.string(meta_len);
    const std::uint32_t count = in.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = in.u32();
        if (name_len == 0 || name_len > kMaxName) throw FormatError(path.string() + ": bad tensor name length");
        std::string name = in.string(name_len);
        const std::uint32_t rank = in.u32();
        if (rank > kMaxRank) throw FormatError(path.string() + ": bad rank for " + name);
        std::vector<int64_t> sizes;
        std::uint64_t numel = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            sizes.push_back(in.u32());
            numel *= static_cast<std::uint64_t>(sizes.back());
            if (numel > kMaxElements) throw FormatError(path.string() + ": tensor too large: " + name);
        }
        std::vector<float> values = in.f32_array(numel);
        torch::Tensor t = torch::from_blob(values.data(), sizes, torch::kFloat32).clone();
        a.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (!in.at_end()) throw FormatError(path.string() + ": trailing bytes");
    return a;
}

}  // namespace tss
