#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "oracles.hpp"
#include "tss/archive.hpp"
#include "tss/errors.hpp"
#include "tss/model.hpp"

using namespace tss;

namespace {

ModelConfig small(bool with_text = true, TextMode mode = TextMode::Multiplanar) {
    ModelConfig c;
    c.backbone.base_channels = 2;
    c.backbone.depth = 3;
    c.backbone.num_classes = 3;
    c.with_text = with_text;
    c.text_mode = mode;
    return c;
}

}  // namespace

TEST(Model, DefaultsResolveToBottleneckWidth) {
    ModelConfig c = small().resolved();
    EXPECT_EQ(c.attn_dim, 8);
    EXPECT_EQ(c.text_dim, 8);
}

TEST(Model, ForwardShapesAndFreshInjectionIsIdentity) {
    torch::manual_seed(1);
    TextSemiSeg m(small());
    torch::Tensor x = torch::randn({2, 1, 8, 8, 8});
    ModelOutput with = m->forward(x, true, true);
    ModelOutput without = m->forward(x, false, false);
    EXPECT_EQ(with.pred.first.sizes(), (std::vector<int64_t>{2, 3, 8, 8, 8}));
    EXPECT_EQ(with.text.sizes(), (std::vector<int64_t>{3, 8}));
    EXPECT_FALSE(without.text.defined());
    EXPECT_TRUE(torch::equal(with.injected, with.features.bottleneck));
    EXPECT_TRUE(torch::equal(with.pred.first, without.pred.first));
}

TEST(Model, RepeatModeMatchesMultiplanarShape) {
    TextSemiSeg a(small(true, TextMode::Multiplanar));
    TextSemiSeg b(small(true, TextMode::Repeat));
    torch::Tensor x = torch::randn({1, 1, 8, 8, 8});
    EXPECT_EQ(a->forward(x, true, true).injected.sizes(), b->forward(x, true, true).injected.sizes());
    EXPECT_TRUE(a->tmr);
    EXPECT_FALSE(a->repeat);
    EXPECT_TRUE(b->repeat);
    EXPECT_FALSE(b->tmr);
}

TEST(Model, BackboneInitIndependentOfTextPathway) {
    torch::manual_seed(5);
    TextSemiSeg a(small(true));
    torch::manual_seed(5);
    TextSemiSeg b(small(false));
    auto sa = named_state(*a->backbone), sb = named_state(*b->backbone);
    ASSERT_EQ(sa.size(), sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_TRUE(torch::equal(sa[i].second, sb[i].second)) << sa[i].first;
}

TEST(Model, PlainNetworkRejectsTextRequests) {
    TextSemiSeg m(small(false));
    EXPECT_FALSE(m->prompts);
    EXPECT_THROW(m->forward(torch::randn({1, 1, 8, 8, 8}), true, false), ValidationError);
}

TEST(Model, PredictAveragesDecoders) {
    TextSemiSeg m(small());
    torch::Tensor x = torch::randn({1, 1, 8, 8, 8});
    ModelOutput o = m->forward(x, true, false);
    EXPECT_TRUE(torch::allclose(m->predict(x), 0.5 * (o.pred.first + o.pred.second)));
}

TEST(Model, ForwardCountIncrements) {
    TextSemiSeg m(small());
    const long before = m->forward_count();
    m->forward(torch::randn({1, 1, 8, 8, 8}), false, false);
    EXPECT_EQ(m->forward_count(), before + 1);
}

TEST(Checkpoint, DottedNamesCoverBackboneAndText) {
    TextSemiSeg m(small());
    std::set<std::string> names;
    for (const auto& [n, t] : named_state(*m)) names.insert(n);
    for (const char* expected : {"backbone.encoder.stage.0.conv.0.weight", "backbone.encoder.down.0.weight", "backbone.decoder1.up.0.weight",
                                 "backbone.decoder2.head.weight", "prompts.context", "prompts.class_emb", "prompts.mixer.weight",
                                 "tmr.plane_weights", "tmr.coronal_text.query.weight", "projection.conv.weight"})
        EXPECT_EQ(names.count(expected), 1u) << expected;
}

TEST(Checkpoint, SaveLoadRoundTripIsExact) {
    torch::manual_seed(2);
    TextSemiSeg m(small());
    {
        torch::NoGradGuard ng;
        m->tmr->plane_weights.copy_(torch::tensor({0.1f, 0.2f, 0.3f}));
    }
    const auto dir = oracle::temp_dir("ckpt");
    save_model(dir / "m.ckpt", m);
    TextSemiSeg back = load_model(dir / "m.ckpt");
    auto a = named_state(*m), b = named_state(*back);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].first, b[i].first);
        EXPECT_TRUE(torch::equal(a[i].second, b[i].second)) << a[i].first;
    }
    torch::Tensor x = torch::randn({1, 1, 8, 8, 8});
    EXPECT_TRUE(torch::equal(m->predict(x), back->predict(x)));
}

TEST(Checkpoint, RepeatModeAndFrozenEmbeddingsSurvive) {
    TextSemiSeg m(small(true, TextMode::Repeat));
    m->prompts->freeze_class_embeddings();
    const auto dir = oracle::temp_dir("ckpt");
    save_model(dir / "r.ckpt", m);
    TextSemiSeg back = load_model(dir / "r.ckpt");
    EXPECT_EQ(back->config().text_mode, TextMode::Repeat);
    EXPECT_TRUE(back->prompts->class_embeddings_frozen());
}

TEST(Checkpoint, ArchiveBytesAreStable) {
    const auto dir = oracle::temp_dir("ckpt");
    Archive a;
    a.meta = "k = v\n";
    a.tensors.push_back({"w", torch::tensor({1.0f, 2.0f}).view({1, 2})});
    write_archive(dir / "a.ckpt", a);
    std::string expected("TSSCKPT1", 8);
    auto u32 = [&](std::uint32_t v) { expected.append(reinterpret_cast<const char*>(&v), 4); };
    u32(6);
    expected += "k = v\n";
    u32(1);
    u32(1);
    expected += "w";
    u32(2);
    u32(1);
    u32(2);
    const float vals[2] = {1.0f, 2.0f};
    expected.append(reinterpret_cast<const char*>(vals), 8);
    EXPECT_EQ(oracle::read_file(dir / "a.ckpt"), expected);
    Archive back = read_archive(dir / "a.ckpt");
    EXPECT_EQ(back.meta, a.meta);
    ASSERT_NE(back.find("w"), nullptr);
    EXPECT_TRUE(torch::equal(*back.find("w"), a.tensors[0].second));
}

TEST(Checkpoint, MissingTensorIsFormatError) {
    TextSemiSeg m(small());
    Archive a = model_archive(m);
    a.tensors.pop_back();
    EXPECT_THROW(model_from_archive(a), FormatError);
}

TEST(Checkpoint, CorruptFileIsFormatError) {
    const auto dir = oracle::temp_dir("ckpt");
    std::ofstream(dir / "bad.ckpt", std::ios::binary) << "TSSCKPT1\x05";
    EXPECT_THROW(read_archive(dir / "bad.ckpt"), FormatError);
}
