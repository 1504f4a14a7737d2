#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "oracles.hpp"
#include "tss/dataio.hpp"
#include "tss/metrics.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result tss_cli(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const fs::path err_file = oracle::temp_dir("cli_err") / ("stderr_" + std::to_string(counter++) + ".txt");
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + TSS_CLI_PATH + "\" " + args + " 2>\"" + err_file.string() + "\"";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = oracle::read_file(err_file);
    return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

bool single_error_line(const std::string& err) {
    return err.rfind("error: E_", 0) == 0 && err.find('\n') == err.size() - 1;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

struct Workspace {
    fs::path dir;
    fs::path manifest;
    fs::path config;
};

const Workspace& workspace() {
    static const Workspace w = [] {
        Workspace out;
        out.dir = oracle::temp_dir("cli");
        Result g = tss_cli("gen-data --seed 3 --out " + q(out.dir / "data") + " --labeled 2 --unlabeled 2 --test 2 --size 16,16,16");
        EXPECT_EQ(g.code, 0) << g.err;
        out.manifest = out.dir / "data" / "manifest.txt";
        out.config = out.dir / "run.cfg";
        std::ofstream(out.config) << "manifest = " << out.manifest.string() << "\npatch_size = 16,16,16\nbase_channels = 2\niterations = 3\n"
                                  << "checkpoint_dir = " << (out.dir / "ckpt").string() << "\ndeterministic = on\n";
        return out;
    }();
    return w;
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
    Result r = tss_cli("");
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(single_error_line(r.err)) << r.err;
}

TEST(Cli, HelpSucceeds) {
    Result r = tss_cli("--help");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("gen-data"), std::string::npos);
}

TEST(Cli, UnknownFlagRejected) {
    Result r = tss_cli("gen-data --bogus 1 --out " + q(oracle::temp_dir("cli_bad")));
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(single_error_line(r.err)) << r.err;
    EXPECT_EQ(r.err.rfind("error: E_USAGE:", 0), 0u);
}

TEST(Cli, GenDataDefaultsMaterializeDataset) {
    const auto dir = oracle::temp_dir("cli_gen");
    Result r = tss_cli("gen-data --out " + q(dir / "d"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, (dir / "d" / "manifest.txt").string() + "\n");
    tss::DatasetManifest m = tss::load_manifest(dir / "d" / "manifest.txt");
    EXPECT_EQ(m.labeled.size(), 6u);
    EXPECT_EQ(m.unlabeled.size(), 24u);
    EXPECT_EQ(m.test.size(), 10u);
    EXPECT_EQ(tss::load_volume(m.resolve(m.labeled[0].volume)).shape, (tss::Shape3{32, 32, 32}));
}

TEST(Cli, GenDataZeroLabeledIsValidationError) {
    Result r = tss_cli("gen-data --labeled 0 --out " + q(oracle::temp_dir("cli_gen") / "d"));
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(single_error_line(r.err)) << r.err;
    EXPECT_EQ(r.err.rfind("error: E_VALIDATION:", 0), 0u) << r.err;
}

TEST(Cli, GenDataSameSeedSameBytes) {
    const auto dir = oracle::temp_dir("cli_gen");
    const std::string flags = " --seed 11 --labeled 1 --unlabeled 1 --test 1 --size 8,8,8 --classes 3";
    ASSERT_EQ(tss_cli("gen-data --out " + q(dir / "a") + flags).code, 0);
    ASSERT_EQ(tss_cli("gen-data --out " + q(dir / "b") + flags).code, 0);
    int files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file()) continue;
        EXPECT_EQ(oracle::read_file(e.path()), oracle::read_file(dir / "b" / fs::relative(e.path(), dir / "a"))) << e.path();
        ++files;
    }
    EXPECT_GE(files, 6);
}

TEST(Cli, TrainMissingConfigFails) {
    Result r = tss_cli("train --config " + q(oracle::temp_dir("cli_train") / "absent.cfg"));
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(single_error_line(r.err)) << r.err;
    EXPECT_NE(tss_cli("train").code, 0);
}

TEST(Cli, TrainUnknownSetKeyFails) {
    const auto& w = workspace();
    Result r = tss_cli("train --config " + q(w.config) + " --set colour=blue");
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(single_error_line(r.err)) << r.err;
    EXPECT_EQ(r.err.rfind("error: E_VALIDATION:", 0), 0u);
}

TEST(Cli, TrainTwoIterationsTraceRows) {
    const auto& w = workspace();
    const auto out = oracle::temp_dir("cli_train");
    Result r = tss_cli("train --config " + q(w.config) + " --set iterations=2 --set checkpoint_dir=" + q(out));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("checkpoint " + (out / "final.ckpt").string()), std::string::npos);
    auto rows = read_csv(out / "trace.csv");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][0], "0");
    EXPECT_EQ(rows[2][0], "1");
}

TEST(Cli, TrainDcaOffHasZeroMixColumn) {
    const auto& w = workspace();
    const auto out = oracle::temp_dir("cli_train");
    Result r = tss_cli("train --config " + q(w.config) + " --set dca=off --set checkpoint_dir=" + q(out));
    ASSERT_EQ(r.code, 0) << r.err;
    auto rows = read_csv(out / "trace.csv");
    ASSERT_EQ(rows.size(), 4u);
    ASSERT_EQ(rows[0][5], "l_mix");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_EQ(std::stod(rows[i][5]), 0.0);
        EXPECT_EQ(rows[i][8], "0");
    }
}

TEST(Cli, DeterministicEnvGivesIdenticalTraces) {
    const auto& w = workspace();
    const auto a = oracle::temp_dir("cli_det"), b = oracle::temp_dir("cli_det");
    const std::string base = "train --config " + q(w.config) + " --set deterministic=off --set checkpoint_dir=";
    ASSERT_EQ(tss_cli(base + q(a), "TSS_DETERMINISTIC=1").code, 0);
    ASSERT_EQ(tss_cli(base + q(b), "TSS_DETERMINISTIC=1").code, 0);
    EXPECT_EQ(oracle::read_file(a / "trace.csv"), oracle::read_file(b / "trace.csv"));
    for (const auto& row : read_csv(a / "trace.csv"))
        if (row[0] != "iteration") EXPECT_EQ(row[9], "0");
}

TEST(Cli, EvalWritesPerCaseAndAggregateRows) {
    const auto& w = workspace();
    const auto out = oracle::temp_dir("cli_eval");
    ASSERT_EQ(tss_cli("train --config " + q(w.config) + " --set checkpoint_dir=" + q(out)).code, 0);
    Result r = tss_cli("eval --checkpoint " + q(out / "final.ckpt") + " --manifest " + q(w.manifest) + " --out " + q(out / "m.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("cases 2 mean_dice ", 0), 0u);
    auto rows = read_csv(out / "m.csv");
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows[0].size(), 7u);
    bool mean = false, std_row = false;
    for (const auto& row : rows) mean |= row[0] == "mean", std_row |= row[0] == "std";
    EXPECT_TRUE(mean);
    EXPECT_TRUE(std_row);
    ASSERT_EQ(tss_cli("eval --checkpoint " + q(out / "final.ckpt") + " --manifest " + q(w.manifest) + " --out " + q(out / "m2.csv")).code, 0);
    EXPECT_EQ(oracle::read_file(out / "m.csv"), oracle::read_file(out / "m2.csv"));
}

TEST(Cli, EvalMissingCheckpointIsIoError) {
    const auto& w = workspace();
    const auto out = oracle::temp_dir("cli_eval");
    Result r = tss_cli("eval --checkpoint " + q(out / "none.ckpt") + " --manifest " + q(w.manifest) + " --out " + q(out / "m.csv"));
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(single_error_line(r.err)) << r.err;
    EXPECT_EQ(r.err.rfind("error: E_IO:", 0), 0u) << r.err;
}

TEST(Cli, InferShapeDeterminismAndOracleBound) {
    const auto& w = workspace();
    const auto out = oracle::temp_dir("cli_infer");
    ASSERT_EQ(tss_cli("train --config " + q(w.config) + " --set checkpoint_dir=" + q(out)).code, 0);
    tss::DatasetManifest m = tss::load_manifest(w.manifest);
    const fs::path vol = m.resolve(m.test[0].volume);
    const std::string args = "infer --checkpoint " + q(out / "final.ckpt") + " --volume " + q(vol) + " --out ";
    ASSERT_EQ(tss_cli(args + q(out / "a.lbl")).code, 0);
    ASSERT_EQ(tss_cli(args + q(out / "b.lbl")).code, 0);
    EXPECT_EQ(oracle::read_file(out / "a.lbl"), oracle::read_file(out / "b.lbl"));
    const tss::LabelMap pred = tss::load_labels(out / "a.lbl");
    const tss::LabelMap gt = tss::load_labels(m.resolve(m.test[0].labels));
    EXPECT_EQ(pred.shape, tss::load_volume(vol).shape);
    std::vector<std::uint8_t> p(pred.labels.size()), g(gt.labels.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = pred.labels[i] != 0, g[i] = gt.labels[i] != 0;
    EXPECT_EQ(tss::dice_jaccard(g, g).dice, 1.0);
    EXPECT_GE(tss::dice_jaccard(g, g).dice, tss::dice_jaccard(p, g).dice);
}

TEST(Cli, ExportCurvesWritesSvgAndRejectsBadTrace) {
    const auto& w = workspace();
    const auto out = oracle::temp_dir("cli_curves");
    ASSERT_EQ(tss_cli("train --config " + q(w.config) + " --set iterations=2 --set checkpoint_dir=" + q(out)).code, 0);
    Result r = tss_cli("export-curves --trace " + q(out / "trace.csv") + " --out " + q(out / "c.svg"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(oracle::read_file(out / "c.svg").find("</svg>"), std::string::npos);
    std::ofstream(out / "bad.csv") << "iteration,l_total\n0,1\n";
    Result bad = tss_cli("export-curves --trace " + q(out / "bad.csv") + " --out " + q(out / "bad.svg"));
    EXPECT_NE(bad.code, 0);
    EXPECT_TRUE(single_error_line(bad.err)) << bad.err;
    EXPECT_EQ(bad.err.rfind("error: E_SCHEMA:", 0), 0u) << bad.err;
}
