#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "tss/dataio.hpp"

namespace tss {

using MaskView = std::span<const std::uint8_t>;  // nonzero = foreground

struct OverlapScores {
    double dice = 1.0;
    double jaccard = 1.0;
};

/// Both-empty masks score (1, 1).
OverlapScores dice_jaccard(MaskView a, MaskView b);

struct SurfaceScores {
    double hd95 = 0.0;
    double asd = 0.0;
};

/// Foreground voxels with at least one 6-connected neighbour that is
/// background or outside the grid. Returns flat indices in ascending order.
std::vector<std::size_t> surface_voxels(MaskView mask, const Shape3& shape);

/// Squared Euclidean distance (spacing-scaled) from every voxel to the
/// nearest voxel flagged in `sites`; +inf everywhere when there are none.
/// Separable exact transform (lower envelope of parabolas per axis).
std::vector<double> squared_distance_transform(MaskView sites, const Shape3& shape, const Spacing& spacing);

/// hd95: max of the two directed nearest-rank 95th percentiles of
/// surface-to-surface distances; asd: mean over the union of both directed
/// sets. Throws UndefinedMetricError when either mask is empty.
SurfaceScores surface_distances(MaskView a, MaskView b, const Shape3& shape, const Spacing& spacing);

/// Nearest-rank percentile (1-based rank ceil(p/100 * n)) of unsorted values.
double nearest_rank_percentile(std::vector<double> values, int percent);

struct MetricReport {
    double dice = 0.0;
    double jaccard = 0.0;
    double hd95 = 0.0;  // NaN when !surface_defined
    double asd = 0.0;
    bool surface_defined = false;
};

MetricReport compare_masks(MaskView a, MaskView b, const Shape3& shape, const Spacing& spacing);

struct CaseReport {
    MetricReport foreground;               // union of all nonzero classes
    std::vector<MetricReport> per_class;  // classes 1..K-1
};

/// Scores a predicted label map against ground truth.
CaseReport evaluate_labels(const LabelMap& prediction, const LabelMap& truth, int num_classes);

/// Binarizes a K x H x W x D (or 1 x K x ...) probability field and scores it.
CaseReport evaluate_case(const torch::Tensor& probs, const LabelMap& truth);

struct CaseMetrics {
    std::string case_id;
    CaseReport report;
};

/// CSV with columns case_id,class,dice,jaccard,hd95,asd,defined_flag. Per-case
/// rows are followed by "mean" and "std" rows per class; on aggregate rows
/// defined_flag counts the cases whose surface metrics were defined (the
/// only ones averaged into hd95/asd).
void write_metrics_csv(std::ostream& out, const std::vector<CaseMetrics>& cases, const std::vector<std::string>& class_names);

struct AggregateMetric {
    double mean = 0.0;
    double stddev = 0.0;
    int count = 0;
};

AggregateMetric aggregate(const std::vector<double>& values);

}  // namespace tss
