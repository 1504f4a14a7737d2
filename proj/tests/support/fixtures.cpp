#include "fixtures.hpp"

namespace fixtures {

std::filesystem::path phantom_dataset(const std::filesystem::path& dir, int n_labeled, int n_unlabeled, int n_test, int size,
                                      int num_classes, int n_val, std::uint64_t seed) {
    tss::PhantomSpec spec;
    spec.seed = seed;
    spec.n_labeled = n_labeled;
    spec.n_unlabeled = n_unlabeled;
    spec.n_test = n_test;
    spec.n_val = n_val;
    spec.size = tss::Shape3{static_cast<std::uint32_t>(size), static_cast<std::uint32_t>(size), static_cast<std::uint32_t>(size)};
    spec.num_classes = num_classes;
    tss::generate_phantom_dataset(spec, dir);
    return dir / "manifest.txt";
}

tss::TrainConfig tiny_config(const std::filesystem::path& manifest, const std::filesystem::path& dir, int iterations, int patch) {
    tss::TrainConfig c;
    c.manifest = manifest;
    c.patch_size = tss::Shape3{static_cast<std::uint32_t>(patch), static_cast<std::uint32_t>(patch), static_cast<std::uint32_t>(patch)};
    c.iterations = iterations;
    c.base_channels = 2;
    c.checkpoint_dir = dir / "ckpt";
    c.deterministic = true;
    return c;
}

}  // namespace fixtures
