#include "tss/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "binio.hpp"
#include "tss/errors.hpp"

namespace fs = std::filesystem;

namespace tss {

namespace {

constexpr const char* kVolumeMagic = "TSSVOL1";
constexpr std::uint8_t kTagF32 = 0;
constexpr std::uint8_t kTagU8 = 1;
// 2^31 voxels is far beyond desk scale; anything larger is a corrupt header.
constexpr std::uint64_t kMaxVoxels = std::uint64_t{1} << 31;

void check_shape(const Shape3& s, const std::string& where) {
    if (s.h == 0 || s.w == 0 || s.d == 0) throw ValidationError(where + ": dims must be >= 1, got " + to_string(s));
    const std::uint64_t n = std::uint64_t{s.h} * s.w * s.d;
    if (n > kMaxVoxels) throw ValidationError(where + ": dims overflow (" + to_string(s) + ")");
}

void check_spacing(const Spacing& sp, const std::string& where) {
    for (float v : sp)
        if (!(std::isfinite(v) && v > 0.0f)) throw ValidationError(where + ": spacing must be positive and finite");
}

void write_header(binio::Writer& out, const Shape3& s, const Spacing& sp, std::uint8_t tag) {
    out.magic(kVolumeMagic);
    out.u32(s.h);
    out.u32(s.w);
    out.u32(s.d);
    for (float v : sp) out.f32(v);
    out.u8(tag);
}

struct Header {
    Shape3 shape;
    Spacing spacing;
};

Header read_header(binio::Reader& in, std::uint8_t want_tag) {
    in.expect_magic(kVolumeMagic);
    Header h;
    h.shape.h = in.u32();
    h.shape.w = in.u32();
    h.shape.d = in.u32();
    for (auto& v : h.spacing) v = in.f32();
    const std::uint8_t tag = in.u8();
    if (tag != kTagF32 && tag != kTagU8) throw FormatError(in.path().string() + ": unknown dtype tag " + std::to_string(tag));
    if (tag != want_tag)
        throw FormatError(in.path().string() + (want_tag == kTagF32 ? ": holds labels, expected voxels" : ": holds voxels, expected labels"));
    check_shape(h.shape, in.path().string());
    check_spacing(h.spacing, in.path().string());
    return h;
}

void expect_end(binio::Reader& in) {
    if (!in.at_end()) throw FormatError(in.path().string() + ": trailing bytes after payload");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string tok; is >> tok;) out.push_back(tok);
    return out;
}

std::string case_name(int i) {
    std::ostringstream os;
    os << "case_" << std::setw(3) << std::setfill('0') << i;
    return os.str();
}

}  // namespace

std::string to_string(const Shape3& s) {
    return std::to_string(s.h) + "x" + std::to_string(s.w) + "x" + std::to_string(s.d);
}

Shape3 parse_shape(const std::string& text) {
    std::vector<std::uint32_t> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        try {
            std::size_t used = 0;
            const long v = std::stol(item, &used);
            if (used != item.size() || v <= 0 || v > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("");
            parts.push_back(static_cast<std::uint32_t>(v));
        } catch (const std::exception&) {
            throw ValidationError("invalid shape '" + text + "'");
        }
    }
    if (parts.size() == 1) return {parts[0], parts[0], parts[0]};
    if (parts.size() != 3) throw ValidationError("shape needs 1 or 3 components: '" + text + "'");
    return {parts[0], parts[1], parts[2]};
}

std::uint8_t LabelMap::max_label() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

void save_volume(const Volume& v, const fs::path& path) {
    check_shape(v.shape, "save_volume");
    check_spacing(v.spacing, "save_volume");
    if (v.voxels.size() != v.shape.voxels()) throw ValidationError("save_volume: payload size does not match dims");
    for (float x : v.voxels)
        if (!std::isfinite(x)) throw ValidationError("save_volume: non-finite voxel value");
    binio::Writer out(path);
    write_header(out, v.shape, v.spacing, kTagF32);
    out.f32_array(v.voxels);
    out.close();
}

Volume load_volume(const fs::path& path) {
    binio::Reader in(path);
    const Header h = read_header(in, kTagF32);
    Volume v;
    v.shape = h.shape;
    v.spacing = h.spacing;
    v.voxels = in.f32_array(h.shape.voxels());
    expect_end(in);
    for (float x : v.voxels)
        if (!std::isfinite(x)) throw ValidationError(path.string() + ": non-finite voxel value");
    return v;
}

void save_labels(const LabelMap& y, const fs::path& path) {
    check_shape(y.shape, "save_labels");
    check_spacing(y.spacing, "save_labels");
    if (y.labels.size() != y.shape.voxels()) throw ValidationError("save_labels: payload size does not match dims");
    binio::Writer out(path);
    write_header(out, y.shape, y.spacing, kTagU8);
    out.bytes(y.labels);
    out.close();
}

LabelMap load_labels(const fs::path& path) {
    binio::Reader in(path);
    const Header h = read_header(in, kTagU8);
    LabelMap y;
    y.shape = h.shape;
    y.spacing = h.spacing;
    y.labels = in.bytes(h.shape.voxels());
    expect_end(in);
    return y;
}

void DatasetManifest::validate() const {
    if (num_classes < 2) throw ValidationError("manifest: num_classes must be >= 2");
    if (static_cast<int>(class_names.size()) != num_classes)
        throw ValidationError("manifest: class_names has " + std::to_string(class_names.size()) + " entries, expected " +
                              std::to_string(num_classes));
    std::set<std::string> seen;
    auto claim = [&](const fs::path& p) {
        const std::string key = p.lexically_normal().generic_string();
        if (!seen.insert(key).second) throw ValidationError("manifest: path listed more than once: " + key);
    };
    for (const auto& e : labeled) claim(e.volume), claim(e.labels);
    for (const auto& p : unlabeled) claim(p);
    for (const auto& e : test) claim(e.volume), claim(e.labels);
    for (const auto& e : val) claim(e.volume), claim(e.labels);
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
    m.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "num_classes = " << m.num_classes << "\n";
    out << "class_names =";
    for (const auto& n : m.class_names) out << " " << n;
    out << "\n";
    for (const auto& e : m.labeled) out << "labeled = " << e.volume.generic_string() << " " << e.labels.generic_string() << "\n";
    for (const auto& p : m.unlabeled) out << "unlabeled = " << p.generic_string() << "\n";
    for (const auto& e : m.test) out << "test = " << e.volume.generic_string() << " " << e.labels.generic_string() << "\n";
    for (const auto& e : m.val) out << "val = " << e.volume.generic_string() << " " << e.labels.generic_string() << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    DatasetManifest m;
    m.root = path.parent_path();
    bool have_k = false;
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const auto values = split_ws(line.substr(eq + 1));
        auto need = [&](std::size_t n) {
            if (values.size() != n)
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": '" + key + "' expects " + std::to_string(n) + " value(s)");
        };
        if (key == "num_classes") {
            need(1);
            try {
                m.num_classes = std::stoi(values[0]);
            } catch (const std::exception&) {
                throw FormatError(path.string() + ": bad num_classes");
            }
            have_k = true;
        } else if (key == "class_names") {
            m.class_names = values;
        } else if (key == "labeled" || key == "test" || key == "val") {
            need(2);
            auto& dst = key == "labeled" ? m.labeled : key == "test" ? m.test : m.val;
            dst.push_back({values[0], values[1]});
        } else if (key == "unlabeled") {
            need(1);
            m.unlabeled.emplace_back(values[0]);
        } else {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (!have_k) throw FormatError(path.string() + ": missing num_classes");
    m.validate();
    return m;
}

bool Ellipsoid::contains(double x, double y, double z) const {
    const double a = (x - center[0]) / radii[0];
    const double b = (y - center[1]) / radii[1];
    const double c = (z - center[2]) / radii[2];
    return a * a + b * b + c * c <= 1.0;
}

Phantom generate_phantom(Rng& rng, Shape3 size, int num_classes) {
    if (num_classes < 2 || num_classes > 255) throw ValidationError("phantom: num_classes must be in [2, 255]");
    check_shape(size, "phantom");
    const std::array<std::uint32_t, 3> ext{size.h, size.w, size.d};

    Phantom ph;
    ph.volume = Volume(size);
    ph.labels = LabelMap(size);

    for (int k = 1; k < num_classes; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
            Ellipsoid e;
            e.label = k;
            bool fits = true;
            for (int a = 0; a < 3; ++a) {
                const double n = ext[a];
                std::uniform_real_distribution<double> radius(n / 8.0, n / 4.0);
                e.radii[a] = radius(rng);
                const double lo = e.radii[a];
                const double hi = n - 1.0 - e.radii[a];
                if (hi < lo) {
                    fits = false;
                    e.center[a] = lo;
                } else {
                    std::uniform_real_distribution<double> centre(lo, hi);
                    e.center[a] = centre(rng);
                }
            }
            if (!fits) continue;

            std::vector<std::size_t> members;
            bool overlaps = false;
            for (std::uint32_t x = 0; x < size.h && !overlaps; ++x)
                for (std::uint32_t y = 0; y < size.w && !overlaps; ++y)
                    for (std::uint32_t z = 0; z < size.d; ++z) {
                        if (!e.contains(x, y, z)) continue;
                        const std::size_t idx = size.index(x, y, z);
                        if (ph.labels.labels[idx] != 0) {
                            overlaps = true;
                            break;
                        }
                        members.push_back(idx);
                    }
            if (overlaps || members.empty()) continue;
            for (std::size_t idx : members) ph.labels.labels[idx] = static_cast<std::uint8_t>(k);
            ph.ellipsoids.push_back(e);
            placed = true;
        }
        if (!placed)
            throw GenerationError("could not place ellipsoid " + std::to_string(k) + " in a " + to_string(size) + " volume after " +
                                  std::to_string(kPlacementRetries) + " attempts");
    }

    std::normal_distribution<double> noise(0.0, kPhantomNoiseSigma);
    for (std::size_t i = 0; i < ph.volume.voxels.size(); ++i) {
        const int k = ph.labels.labels[i];
        const double base = k == 0 ? 0.0 : phantom_intensity(k);
        ph.volume.voxels[i] = static_cast<float>(base + noise(rng));
    }
    return ph;
}

DatasetManifest generate_phantom_dataset(const PhantomSpec& spec, const fs::path& out_dir) {
    if (spec.n_labeled < 1) throw ValidationError("gen-data: n_labeled must be >= 1");
    if (spec.n_test < 1) throw ValidationError("gen-data: n_test must be >= 1");
    if (spec.n_unlabeled < 0 || spec.n_val < 0) throw ValidationError("gen-data: counts must be >= 0");
    if (spec.num_classes < 2) throw ValidationError("gen-data: classes must be >= 2");

    DatasetManifest m;
    m.root = out_dir;
    m.num_classes = spec.num_classes;
    m.class_names.push_back("background");
    for (int k = 1; k < spec.num_classes; ++k) m.class_names.push_back("class" + std::to_string(k));

    Rng rng(spec.seed);
    auto emit = [&](const std::string& split, int count, bool with_labels) {
        if (count == 0) return;
        fs::create_directories(out_dir / split);
        for (int i = 0; i < count; ++i) {
            Phantom ph = generate_phantom(rng, spec.size, spec.num_classes);
            const fs::path vol = fs::path(split) / (case_name(i) + ".vol");
            save_volume(ph.volume, out_dir / vol);
            if (with_labels) {
                const fs::path lbl = fs::path(split) / (case_name(i) + ".lbl");
                save_labels(ph.labels, out_dir / lbl);
                auto& dst = split == "labeled" ? m.labeled : split == "test" ? m.test : m.val;
                dst.push_back({vol, lbl});
            } else {
                m.unlabeled.push_back(vol);
            }
        }
    };
    fs::create_directories(out_dir);
    emit("labeled", spec.n_labeled, true);
    emit("unlabeled", spec.n_unlabeled, false);
    emit("test", spec.n_test, true);
    emit("val", spec.n_val, true);
    save_manifest(m, out_dir / "manifest.txt");
    return m;
}

Volume crop(const Volume& v, std::array<std::uint32_t, 3> o, Shape3 size) {
    Volume out(size, 0.0f, v.spacing);
    for (std::uint32_t x = 0; x < size.h; ++x)
        for (std::uint32_t y = 0; y < size.w; ++y) {
            const float* src = &v.voxels[v.shape.index(x + o[0], y + o[1], o[2])];
            std::copy(src, src + size.d, &out.voxels[size.index(x, y, 0)]);
        }
    return out;
}

LabelMap crop(const LabelMap& lm, std::array<std::uint32_t, 3> o, Shape3 size) {
    LabelMap out(size, 0, lm.spacing);
    for (std::uint32_t x = 0; x < size.h; ++x)
        for (std::uint32_t y = 0; y < size.w; ++y) {
            const std::uint8_t* src = &lm.labels[lm.shape.index(x + o[0], y + o[1], o[2])];
            std::copy(src, src + size.d, &out.labels[size.index(x, y, 0)]);
        }
    return out;
}

Patch sample_patch(const Volume& v, const LabelMap* y, Shape3 patch_size, Rng& rng) {
    check_shape(patch_size, "sample_patch");
    if (patch_size.h > v.shape.h || patch_size.w > v.shape.w || patch_size.d > v.shape.d)
        throw ValidationError("sample_patch: patch " + to_string(patch_size) + " larger than volume " + to_string(v.shape));
    if (y && y->shape != v.shape) throw ValidationError("sample_patch: label map dims differ from volume");

    Patch p;
    const std::array<std::uint32_t, 3> room{v.shape.h - patch_size.h, v.shape.w - patch_size.w, v.shape.d - patch_size.d};
    for (int a = 0; a < 3; ++a) {
        std::uniform_int_distribution<std::uint32_t> pick(0, room[a]);
        p.offset[a] = pick(rng);
    }
    p.volume = crop(v, p.offset, patch_size);
    if (y) p.labels = crop(*y, p.offset, patch_size);
    return p;
}

}  // namespace tss
