#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "checks.hpp"
#include "oracles.hpp"
#include "tss/errors.hpp"
#include "tss/metrics.hpp"

using namespace tss;

namespace {

std::vector<std::uint8_t> cube(Shape3 s, int x0, int y0, int z0, int n) {
    std::vector<std::uint8_t> m(s.voxels(), 0);
    for (int x = x0; x < x0 + n; ++x)
        for (int y = y0; y < y0 + n; ++y)
            for (int z = z0; z < z0 + n; ++z) m[s.index(x, y, z)] = 1;
    return m;
}

}  // namespace

TEST(DiceJaccard, IdenticalNonEmpty) {
    std::vector<std::uint8_t> a{0, 1, 1, 0};
    OverlapScores o = dice_jaccard(a, a);
    EXPECT_EQ(o.dice, 1.0);
    EXPECT_EQ(o.jaccard, 1.0);
}

TEST(DiceJaccard, Disjoint) {
    OverlapScores o = dice_jaccard(std::vector<std::uint8_t>{1, 0}, std::vector<std::uint8_t>{0, 1});
    EXPECT_EQ(o.dice, 0.0);
    EXPECT_EQ(o.jaccard, 0.0);
}

TEST(DiceJaccard, CountingExample) {
    std::vector<std::uint8_t> a{1, 1, 1, 1, 0, 0, 0, 0}, b{0, 0, 1, 1, 1, 1, 0, 0};
    OverlapScores o = dice_jaccard(a, b);
    EXPECT_DOUBLE_EQ(o.dice, 0.5);
    EXPECT_DOUBLE_EQ(o.jaccard, 1.0 / 3);
}

TEST(DiceJaccard, BothEmptyIsOne) {
    std::vector<std::uint8_t> z(5, 0);
    OverlapScores o = dice_jaccard(z, z);
    EXPECT_EQ(o.dice, 1.0);
    EXPECT_EQ(o.jaccard, 1.0);
}

TEST(Surface, SixConnectedBoundary) {
    const Shape3 s{5, 5, 5};
    auto m = cube(s, 1, 1, 1, 3);
    auto surf = surface_voxels(m, s);
    EXPECT_EQ(surf.size(), 26u);  // 27 minus the center
    EXPECT_EQ(surf, oracle::surface(m, 5, 5, 5));
    auto full = std::vector<std::uint8_t>(s.voxels(), 1);
    EXPECT_EQ(surface_voxels(full, s).size(), 125u - 27u);
}

TEST(DistanceTransform, MatchesBruteForceWithSpacing) {
    const Shape3 s{6, 7, 5};
    std::mt19937_64 rng(3);
    std::vector<std::uint8_t> sites(s.voxels(), 0);
    for (auto& v : sites) v = rng() % 17 == 0;
    sites[0] = 1;
    const Spacing sp{0.7f, 1.3f, 2.1f};
    auto dt = squared_distance_transform(sites, s, sp);
    for (std::uint32_t x = 0; x < s.h; ++x)
        for (std::uint32_t y = 0; y < s.w; ++y)
            for (std::uint32_t z = 0; z < s.d; ++z) {
                double best = INFINITY;
                for (std::uint32_t a = 0; a < s.h; ++a)
                    for (std::uint32_t b = 0; b < s.w; ++b)
                        for (std::uint32_t c = 0; c < s.d; ++c) {
                            if (!sites[s.index(a, b, c)]) continue;
                            const double dx = (double(x) - a) * sp[0], dy = (double(y) - b) * sp[1], dz = (double(z) - c) * sp[2];
                            best = std::min(best, dx * dx + dy * dy + dz * dz);
                        }
                EXPECT_NEAR(dt[s.index(x, y, z)], best, 1e-9);
            }
}

TEST(DistanceTransform, NoSitesIsInfinite) {
    const Shape3 s{3, 3, 3};
    auto dt = squared_distance_transform(std::vector<std::uint8_t>(27, 0), s, {1, 1, 1});
    for (double v : dt) EXPECT_TRUE(std::isinf(v));
}

TEST(Percentile, NearestRank) {
    EXPECT_EQ(nearest_rank_percentile({5, 1, 3, 2, 4}, 95), 5.0);
    std::vector<double> v(20);
    for (int i = 0; i < 20; ++i) v[i] = i + 1;
    EXPECT_EQ(nearest_rank_percentile(v, 95), 19.0);
    v.push_back(21);
    EXPECT_EQ(nearest_rank_percentile(v, 95), 20.0);
    EXPECT_THROW(nearest_rank_percentile({}, 95), UndefinedMetricError);
}

TEST(SurfaceDistances, IdenticalMasksAreZero) {
    const Shape3 s{6, 6, 6};
    auto m = cube(s, 1, 1, 1, 3);
    SurfaceScores d = surface_distances(m, m, s, {1, 1, 1});
    EXPECT_EQ(d.hd95, 0.0);
    EXPECT_EQ(d.asd, 0.0);
}

TEST(SurfaceDistances, SingleVoxelsThreeApart) {
    const Shape3 s{8, 3, 3};
    std::vector<std::uint8_t> a(s.voxels(), 0), b(s.voxels(), 0);
    a[s.index(1, 1, 1)] = 1;
    b[s.index(4, 1, 1)] = 1;
    SurfaceScores d = surface_distances(a, b, s, {1, 1, 1});
    EXPECT_DOUBLE_EQ(d.hd95, 3.0);
    EXPECT_DOUBLE_EQ(d.asd, 3.0);
}

TEST(SurfaceDistances, OffsetCubesMatchAllPairsOracle) {
    const Shape3 s{10, 10, 10};
    auto a = cube(s, 2, 2, 2, 3);
    auto b = cube(s, 4, 2, 2, 3);
    SurfaceScores d = surface_distances(a, b, s, {1, 1, 1});
    oracle::BruteMetrics ref = oracle::brute_metrics(a, b, 10, 10, 10, {1, 1, 1});
    EXPECT_NEAR(d.hd95, ref.hd95, 1e-12);
    EXPECT_NEAR(d.asd, ref.asd, 1e-12);
    EXPECT_DOUBLE_EQ(d.hd95, 2.0);
}

TEST(SurfaceDistances, EmptyMaskIsUndefined) {
    const Shape3 s{4, 4, 4};
    auto a = cube(s, 0, 0, 0, 2);
    std::vector<std::uint8_t> e(s.voxels(), 0);
    EXPECT_THROW(surface_distances(a, e, s, {1, 1, 1}), UndefinedMetricError);
    MetricReport r = compare_masks(a, e, s, {1, 1, 1});
    EXPECT_FALSE(r.surface_defined);
    EXPECT_TRUE(std::isnan(r.hd95));
    EXPECT_EQ(r.dice, 0.0);
}

TEST(Metrics, RandomPairsMatchBruteForce) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        checks::MetricResult r = checks::metric_instance(seed);
        EXPECT_TRUE(r.overlap_exact) << seed;
        EXPECT_TRUE(r.defined_match) << seed;
        EXPECT_LT(r.distance_error, 1e-9) << seed;
        EXPECT_LT(r.identity_error, 1e-12) << seed;
        EXPECT_TRUE(r.bounds_hold) << seed << r.detail;
    }
}

TEST(EvaluateCase, PerfectPredictionScoresOne) {
    LabelMap y(Shape3{6, 6, 6});
    for (std::uint32_t x = 1; x < 4; ++x)
        for (std::uint32_t z = 2; z < 5; ++z) y.at(x, 2, z) = 1, y.at(x, 3, z) = 2;
    torch::Tensor labels = torch::from_blob(y.labels.data(), {6, 6, 6}, torch::kUInt8).to(torch::kLong);
    torch::Tensor probs = torch::one_hot(labels, 3).permute({3, 0, 1, 2}).to(torch::kFloat);
    CaseReport r = evaluate_case(probs, y);
    EXPECT_EQ(r.foreground.dice, 1.0);
    ASSERT_EQ(r.per_class.size(), 2u);
    for (const auto& c : r.per_class) {
        EXPECT_EQ(c.dice, 1.0);
        EXPECT_EQ(c.hd95, 0.0);
    }
}

TEST(EvaluateCase, AllBackgroundPredictionIsZeroAndUndefined) {
    LabelMap y(Shape3{4, 4, 4});
    y.at(1, 1, 1) = 1;
    torch::Tensor probs = torch::zeros({2, 4, 4, 4});
    probs[0].fill_(1.0f);
    CaseReport r = evaluate_case(probs, y);
    EXPECT_EQ(r.foreground.dice, 0.0);
    EXPECT_FALSE(r.foreground.surface_defined);
}

TEST(EvaluateCase, RandomSixCubedMatchesComposedOracles) {
    torch::manual_seed(1);
    LabelMap y(Shape3{6, 6, 6});
    for (auto& v : y.labels) v = static_cast<std::uint8_t>(torch::randint(0, 3, {1}).item<int>());
    torch::Tensor probs = torch::softmax(torch::randn({3, 6, 6, 6}), 0);
    CaseReport r = evaluate_case(probs, y);
    auto pred = oracle::argmax_classes(oracle::to_vec(probs), 3, 216);
    for (int k = 1; k < 3; ++k) {
        std::vector<std::uint8_t> a(216), b(216);
        for (int i = 0; i < 216; ++i) a[i] = pred[i] == k, b[i] = y.labels[i] == k;
        oracle::BruteMetrics ref = oracle::brute_metrics(a, b, 6, 6, 6, {1, 1, 1});
        EXPECT_EQ(r.per_class[k - 1].dice, ref.dice);
        EXPECT_NEAR(r.per_class[k - 1].hd95, ref.hd95, 1e-9);
        EXPECT_NEAR(r.per_class[k - 1].asd, ref.asd, 1e-9);
    }
    std::vector<std::uint8_t> a(216), b(216);
    for (int i = 0; i < 216; ++i) a[i] = pred[i] != 0, b[i] = y.labels[i] != 0;
    EXPECT_EQ(r.foreground.jaccard, oracle::brute_metrics(a, b, 6, 6, 6, {1, 1, 1}).jaccard);
}

TEST(MetricsCsv, HeaderRowsAndUndefinedMarkers) {
    CaseMetrics a{"case_000", {}}, b{"case_001", {}};
    a.report.foreground = MetricReport{0.8, 0.8 / 1.2, 2.0, 1.0, true};
    b.report.foreground = MetricReport{0.0, 0.0, NAN, NAN, false};
    a.report.per_class = {a.report.foreground};
    b.report.per_class = {b.report.foreground};
    std::ostringstream out;
    write_metrics_csv(out, {a, b}, {"background", "organ"});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "case_id,class,dice,jaccard,hd95,asd,defined_flag");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    EXPECT_EQ(rows.size(), 4u + 4u);
    EXPECT_NE(out.str().find("case_001,foreground,0.000000,0.000000,NA,NA,0"), std::string::npos);
    EXPECT_NE(out.str().find("mean,foreground,0.400000,0.333333,2.000000,1.000000,1"), std::string::npos);
    EXPECT_NE(out.str().find("case_000,organ,"), std::string::npos);
}

TEST(Aggregate, SampleStd) {
    AggregateMetric m = aggregate({1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_NEAR(m.stddev, std::sqrt(5.0 / 3), 1e-12);
    EXPECT_EQ(m.count, 4);
}
