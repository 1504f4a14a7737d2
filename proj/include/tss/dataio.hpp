#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tss {

using Rng = std::mt19937_64;

/// Grid extents, row-major with the depth axis fastest.
struct Shape3 {
    std::uint32_t h = 1;
    std::uint32_t w = 1;
    std::uint32_t d = 1;

    std::size_t voxels() const { return std::size_t{h} * w * d; }
    std::size_t index(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
        return (std::size_t{x} * w + y) * d + z;
    }
    bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);
/// Parses "H,W,D" or a single "N" (cube).
Shape3 parse_shape(const std::string& text);

using Spacing = std::array<float, 3>;

struct Volume {
    Shape3 shape;
    std::vector<float> voxels;
    Spacing spacing{1.0f, 1.0f, 1.0f};

    Volume() = default;
    Volume(Shape3 s, float fill = 0.0f, Spacing sp = {1.0f, 1.0f, 1.0f})
        : shape(s), voxels(s.voxels(), fill), spacing(sp) {}

    float& at(std::uint32_t x, std::uint32_t y, std::uint32_t z) { return voxels[shape.index(x, y, z)]; }
    float at(std::uint32_t x, std::uint32_t y, std::uint32_t z) const { return voxels[shape.index(x, y, z)]; }
};

struct LabelMap {
    Shape3 shape;
    std::vector<std::uint8_t> labels;
    Spacing spacing{1.0f, 1.0f, 1.0f};

    LabelMap() = default;
    LabelMap(Shape3 s, std::uint8_t fill = 0, Spacing sp = {1.0f, 1.0f, 1.0f})
        : shape(s), labels(s.voxels(), fill), spacing(sp) {}

    std::uint8_t& at(std::uint32_t x, std::uint32_t y, std::uint32_t z) { return labels[shape.index(x, y, z)]; }
    std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t z) const { return labels[shape.index(x, y, z)]; }
    std::uint8_t max_label() const;
};

// Binary grid format: magic "TSSVOL1\0", u32 H, W, D, 3 x f32 spacing,
// u8 dtype tag (0 = f32 voxels, 1 = u8 labels), row-major payload.
// All integers and floats little-endian.
void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);
void save_labels(const LabelMap& y, const std::filesystem::path& path);
LabelMap load_labels(const std::filesystem::path& path);

struct LabeledPair {
    std::filesystem::path volume;
    std::filesystem::path labels;
};

/// Split listing of a dataset. Paths are stored relative to `root`
/// (the directory holding the manifest file).
struct DatasetManifest {
    std::filesystem::path root;
    int num_classes = 2;
    std::vector<std::string> class_names;
    std::vector<LabeledPair> labeled;
    std::vector<std::filesystem::path> unlabeled;
    std::vector<LabeledPair> test;
    std::vector<LabeledPair> val;  // optional held-out split for best-model selection

    std::filesystem::path resolve(const std::filesystem::path& p) const { return root / p; }
    /// Throws ValidationError when a path appears in two splits, K < 2, or
    /// class_names does not hold K entries.
    void validate() const;
};

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct Ellipsoid {
    std::array<double, 3> center{};
    std::array<double, 3> radii{};
    int label = 1;

    bool contains(double x, double y, double z) const;
};

struct Phantom {
    Volume volume;
    LabelMap labels;
    std::vector<Ellipsoid> ellipsoids;
};

inline constexpr double kPhantomNoiseSigma = 0.1;
inline constexpr int kPlacementRetries = 200;

/// Foreground intensity offset of class k (k >= 1).
inline double phantom_intensity(int k) { return 0.5 + 0.1 * k; }

/// One phantom with K-1 disjoint ellipsoids over Gaussian noise.
Phantom generate_phantom(Rng& rng, Shape3 size, int num_classes);

struct PhantomSpec {
    std::uint64_t seed = 7;
    int n_labeled = 6;
    int n_unlabeled = 24;
    int n_test = 10;
    int n_val = 0;
    Shape3 size{32, 32, 32};
    int num_classes = 2;
};

/// Writes volumes, label maps and `manifest.txt` under `out_dir`.
DatasetManifest generate_phantom_dataset(const PhantomSpec& spec, const std::filesystem::path& out_dir);

struct Patch {
    Volume volume;
    std::optional<LabelMap> labels;
    std::array<std::uint32_t, 3> offset{};
};

Volume crop(const Volume& v, std::array<std::uint32_t, 3> offset, Shape3 size);
LabelMap crop(const LabelMap& y, std::array<std::uint32_t, 3> offset, Shape3 size);

/// Random contiguous crop; volume and labels share the offset, drawn
/// uniformly over all valid corner positions.
Patch sample_patch(const Volume& v, const LabelMap* y, Shape3 patch_size, Rng& rng);

}  // namespace tss
