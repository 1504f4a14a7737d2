#pragma once

#include <filesystem>

#include "tss/config.hpp"
#include "tss/dataio.hpp"

namespace fixtures {

/// Small phantom dataset under `dir`; returns the manifest path.
std::filesystem::path phantom_dataset(const std::filesystem::path& dir, int n_labeled, int n_unlabeled, int n_test, int size,
                                      int num_classes = 2, int n_val = 0, std::uint64_t seed = 7);

/// Desk-sized deterministic run writing into `dir`.
tss::TrainConfig tiny_config(const std::filesystem::path& manifest, const std::filesystem::path& dir, int iterations, int patch = 16);

}  // namespace fixtures
