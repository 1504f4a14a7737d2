#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tss {

/// Named f32 arrays plus a free-form text header.
///
/// Layout (little-endian): magic "TSSCKPT1", u32 meta length, meta bytes,
/// u32 tensor count, then per tensor: u32 name length, name bytes,
/// u32 rank, rank x u32 extents, f32 payload row-major.
struct Archive {
    std::string meta;
    std::vector<std::pair<std::string, torch::Tensor>> tensors;

    const torch::Tensor* find(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

}  // namespace tss
