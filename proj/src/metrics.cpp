#include "tss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "tss/dca.hpp"
#include "tss/errors.hpp"

namespace tss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One pass of the 1-D exact squared distance transform along a strided line.
// out[i] = min_j f[j] + (step * (i - j))^2
void envelope_pass(std::vector<double>& grid, std::size_t start, std::size_t stride, std::size_t n, double step,
                   std::vector<double>& f, std::vector<std::size_t>& v, std::vector<double>& z) {
    const double s2 = step * step;
    for (std::size_t i = 0; i < n; ++i) f[i] = grid[start + i * stride];

    std::size_t k = 0;
    bool any = false;
    for (std::size_t q = 0; q < n; ++q) {
        if (!std::isfinite(f[q])) continue;
        if (!any) {
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            k = 0;
            any = true;
            continue;
        }
        auto intersect = [&](std::size_t p) {
            const double qd = static_cast<double>(q), pd = static_cast<double>(p);
            return ((f[q] + s2 * qd * qd) - (f[p] + s2 * pd * pd)) / (2.0 * s2 * (qd - pd));
        };
        double s = intersect(v[k]);
        while (s <= z[k]) {  // z[0] = -inf stops the walk
            --k;
            s = intersect(v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (!any) return;  // line stays at +inf

    k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double id = static_cast<double>(i);
        while (z[k + 1] < id) ++k;
        const double delta = step * (id - static_cast<double>(v[k]));
        grid[start + i * stride] = f[v[k]] + delta * delta;
    }
}

double mean_of(const std::vector<double>& a, const std::vector<double>& b) {
    const double sum = std::accumulate(a.begin(), a.end(), 0.0) + std::accumulate(b.begin(), b.end(), 0.0);
    return sum / static_cast<double>(a.size() + b.size());
}

void check_sizes(MaskView a, MaskView b, const Shape3& shape) {
    if (a.size() != shape.voxels() || b.size() != shape.voxels()) throw ValidationError("metrics: mask size does not match shape");
}

}  // namespace

OverlapScores dice_jaccard(MaskView a, MaskView b) {
    if (a.size() != b.size()) throw ValidationError("dice_jaccard: mask sizes differ");
    std::size_t na = 0, nb = 0, inter = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool pa = a[i] != 0, pb = b[i] != 0;
        na += pa;
        nb += pb;
        inter += pa && pb;
    }
    if (na + nb == 0) return {1.0, 1.0};
    const double uni = static_cast<double>(na + nb - inter);
    return {2.0 * static_cast<double>(inter) / static_cast<double>(na + nb), static_cast<double>(inter) / uni};
}

std::vector<std::size_t> surface_voxels(MaskView mask, const Shape3& shape) {
    if (mask.size() != shape.voxels()) throw ValidationError("surface_voxels: mask size does not match shape");
    std::vector<std::size_t> out;
    auto bg = [&](long x, long y, long z) {
        if (x < 0 || y < 0 || z < 0 || x >= shape.h || y >= shape.w || z >= shape.d) return true;
        return mask[shape.index(x, y, z)] == 0;
    };
    for (long x = 0; x < shape.h; ++x)
        for (long y = 0; y < shape.w; ++y)
            for (long z = 0; z < shape.d; ++z) {
                if (mask[shape.index(x, y, z)] == 0) continue;
                if (bg(x - 1, y, z) || bg(x + 1, y, z) || bg(x, y - 1, z) || bg(x, y + 1, z) || bg(x, y, z - 1) || bg(x, y, z + 1))
                    out.push_back(shape.index(x, y, z));
            }
    return out;
}

std::vector<double> squared_distance_transform(MaskView sites, const Shape3& shape, const Spacing& spacing) {
    if (sites.size() != shape.voxels()) throw ValidationError("distance transform: mask size does not match shape");
    std::vector<double> grid(shape.voxels());
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = sites[i] ? 0.0 : kInf;

    const std::size_t n_max = std::max({shape.h, shape.w, shape.d});
    std::vector<double> f(n_max), z(n_max + 1);
    std::vector<std::size_t> v(n_max);
    const std::size_t H = shape.h, W = shape.w, D = shape.d;

    for (std::size_t x = 0; x < H; ++x)
        for (std::size_t y = 0; y < W; ++y) envelope_pass(grid, (x * W + y) * D, 1, D, spacing[2], f, v, z);
    for (std::size_t x = 0; x < H; ++x)
        for (std::size_t zc = 0; zc < D; ++zc) envelope_pass(grid, x * W * D + zc, D, W, spacing[1], f, v, z);
    for (std::size_t y = 0; y < W; ++y)
        for (std::size_t zc = 0; zc < D; ++zc) envelope_pass(grid, y * D + zc, W * D, H, spacing[0], f, v, z);
    return grid;
}

double nearest_rank_percentile(std::vector<double> values, int percent) {
    if (values.empty()) throw UndefinedMetricError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;  // ceil(p n / 100)
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

SurfaceScores surface_distances(MaskView a, MaskView b, const Shape3& shape, const Spacing& spacing) {
    check_sizes(a, b, shape);
    const auto surf_a = surface_voxels(a, shape);
    const auto surf_b = surface_voxels(b, shape);
    if (surf_a.empty() || surf_b.empty()) throw UndefinedMetricError("surface distance undefined for an empty mask");

    auto directed = [&](const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) {
        std::vector<std::uint8_t> sites(shape.voxels(), 0);
        for (std::size_t i : to) sites[i] = 1;
        const auto dt = squared_distance_transform(sites, shape, spacing);
        std::vector<double> d(from.size());
        for (std::size_t i = 0; i < from.size(); ++i) d[i] = std::sqrt(dt[from[i]]);
        return d;
    };
    const auto d_ab = directed(surf_a, surf_b);
    const auto d_ba = directed(surf_b, surf_a);
    SurfaceScores s;
    s.hd95 = std::max(nearest_rank_percentile(d_ab, 95), nearest_rank_percentile(d_ba, 95));
    s.asd = mean_of(d_ab, d_ba);
    return s;
}

MetricReport compare_masks(MaskView a, MaskView b, const Shape3& shape, const Spacing& spacing) {
    check_sizes(a, b, shape);
    MetricReport r;
    const OverlapScores o = dice_jaccard(a, b);
    r.dice = o.dice;
    r.jaccard = o.jaccard;
    const bool a_empty = std::none_of(a.begin(), a.end(), [](std::uint8_t v) { return v != 0; });
    const bool b_empty = std::none_of(b.begin(), b.end(), [](std::uint8_t v) { return v != 0; });
    if (a_empty || b_empty) {
        r.hd95 = r.asd = kNaN;
        r.surface_defined = false;
        return r;
    }
    const SurfaceScores s = surface_distances(a, b, shape, spacing);
    r.hd95 = s.hd95;
    r.asd = s.asd;
    r.surface_defined = true;
    return r;
}

CaseReport evaluate_labels(const LabelMap& prediction, const LabelMap& truth, int num_classes) {
    if (prediction.shape != truth.shape) throw ValidationError("evaluate: prediction and truth shapes differ");
    const std::size_t n = truth.labels.size();
    std::vector<std::uint8_t> pa(n), tb(n);
    CaseReport out;
    for (std::size_t i = 0; i < n; ++i) {
        pa[i] = prediction.labels[i] != 0;
        tb[i] = truth.labels[i] != 0;
    }
    out.foreground = compare_masks(pa, tb, truth.shape, truth.spacing);
    for (int k = 1; k < num_classes; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            pa[i] = prediction.labels[i] == k;
            tb[i] = truth.labels[i] == k;
        }
        out.per_class.push_back(compare_masks(pa, tb, truth.shape, truth.spacing));
    }
    return out;
}

CaseReport evaluate_case(const torch::Tensor& probs, const LabelMap& truth) {
    torch::Tensor p = probs.dim() == 4 ? probs.unsqueeze(0) : probs;
    if (p.dim() != 5 || p.size(0) != 1) throw ValidationError("evaluate_case: expected K x H x W x D probabilities");
    if (p.size(2) != truth.shape.h || p.size(3) != truth.shape.w || p.size(4) != truth.shape.d)
        throw ValidationError("evaluate_case: prediction and truth shapes differ");
    torch::Tensor labels = binarize(p).squeeze(0).to(torch::kUInt8).contiguous();
    LabelMap pred(truth.shape, 0, truth.spacing);
    std::copy(labels.data_ptr<std::uint8_t>(), labels.data_ptr<std::uint8_t>() + labels.numel(), pred.labels.begin());
    return evaluate_labels(pred, truth, static_cast<int>(p.size(1)));
}

AggregateMetric aggregate(const std::vector<double>& values) {
    AggregateMetric a;
    a.count = static_cast<int>(values.size());
    if (values.empty()) {
        a.mean = a.stddev = kNaN;
        return a;
    }
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) / a.count;
    if (a.count > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / (a.count - 1));
    }
    return a;
}

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<CaseMetrics>& cases, const std::vector<std::string>& class_names) {
    out << "case_id,class,dice,jaccard,hd95,asd,defined_flag\n";
    auto label_of = [&](std::size_t slot) {
        if (slot == 0) return std::string("foreground");
        return slot < class_names.size() ? class_names[slot] : "class" + std::to_string(slot);
    };
    auto report_at = [](const CaseReport& r, std::size_t slot) -> const MetricReport& {
        return slot == 0 ? r.foreground : r.per_class.at(slot - 1);
    };
    const std::size_t slots = cases.empty() ? 1 : 1 + cases.front().report.per_class.size();
    for (const auto& c : cases)
        for (std::size_t s = 0; s < slots; ++s) {
            const MetricReport& m = report_at(c.report, s);
            out << c.case_id << "," << label_of(s) << "," << fmt(m.dice) << "," << fmt(m.jaccard) << ","
                << fmt(m.surface_defined ? m.hd95 : NAN) << "," << fmt(m.surface_defined ? m.asd : NAN) << ","
                << (m.surface_defined ? 1 : 0) << "\n";
        }
    for (std::size_t s = 0; s < slots; ++s) {
        std::vector<double> dice, jac, hd, asd;
        for (const auto& c : cases) {
            const MetricReport& m = report_at(c.report, s);
            dice.push_back(m.dice);
            jac.push_back(m.jaccard);
            if (m.surface_defined) {
                hd.push_back(m.hd95);
                asd.push_back(m.asd);
            }
        }
        const auto d = aggregate(dice), j = aggregate(jac), h = aggregate(hd), a = aggregate(asd);
        out << "mean," << label_of(s) << "," << fmt(d.mean) << "," << fmt(j.mean) << "," << fmt(h.mean) << "," << fmt(a.mean) << ","
            << h.count << "\n";
        out << "std," << label_of(s) << "," << fmt(d.stddev) << "," << fmt(j.stddev) << "," << fmt(h.stddev) << ","
            << fmt(a.stddev) << "," << h.count << "\n";
    }
}

}  // namespace tss
