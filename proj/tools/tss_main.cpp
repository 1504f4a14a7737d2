// tss: dataset generation, training, evaluation, inference and curve export.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tss/config.hpp"
#include "tss/curves.hpp"
#include "tss/dataio.hpp"
#include "tss/errors.hpp"
#include "tss/model.hpp"
#include "tss/trainer.hpp"

namespace fs = std::filesystem;

namespace {

int fail(const std::string& code, const std::string& message) {
    std::string one_line = message;
    for (char& c : one_line)
        if (c == '\n' || c == '\r') c = ' ';
    std::cerr << "error: " << code << ": " << one_line << std::endl;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-driven multiplanar semi-supervised volumetric segmentation"};
    app.require_subcommand(1);

    tss::PhantomSpec phantom;
    std::string out_dir = "data";
    std::string size_text = "32,32,32";
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic ellipsoid phantom dataset");
    gen->add_option("--seed", phantom.seed, "RNG seed");
    gen->add_option("--out", out_dir, "Output directory");
    gen->add_option("--labeled", phantom.n_labeled, "Labeled training volumes");
    gen->add_option("--unlabeled", phantom.n_unlabeled, "Unlabeled training volumes");
    gen->add_option("--test", phantom.n_test, "Test volumes");
    gen->add_option("--val", phantom.n_val, "Validation volumes (best-checkpoint selection)");
    gen->add_option("--size", size_text, "Volume size H,W,D");
    gen->add_option("--classes", phantom.num_classes, "Number of classes K including background");

    std::string config_path;
    std::vector<std::string> overrides;
    auto* train = app.add_subcommand("train", "Train a model from a config file");
    train->add_option("--config", config_path, "key = value config file")->required();
    train->add_option("--set", overrides, "Override a config key (key=value); repeatable");

    std::string checkpoint, manifest, out_path;
    auto* eval = app.add_subcommand("eval", "Score a checkpoint on the manifest's test split");
    eval->add_option("--checkpoint", checkpoint)->required();
    eval->add_option("--manifest", manifest)->required();
    eval->add_option("--out", out_path, "Metrics CSV")->required();

    std::string volume_path;
    auto* infer = app.add_subcommand("infer", "Predict a label map for one volume");
    infer->add_option("--checkpoint", checkpoint)->required();
    infer->add_option("--volume", volume_path)->required();
    infer->add_option("--out", out_path, "Output label file")->required();

    std::string trace_path;
    auto* curves = app.add_subcommand("export-curves", "Render loss and lambda_u curves from a trace CSV to SVG");
    curves->add_option("--trace", trace_path)->required();
    curves->add_option("--out", out_path, "Output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("E_USAGE", e.what());
    }

    try {
        if (*gen) {
            phantom.size = tss::parse_shape(size_text);
            tss::generate_phantom_dataset(phantom, out_dir);
            std::cout << (fs::path(out_dir) / "manifest.txt").string() << std::endl;
        } else if (*train) {
            if (!fs::exists(config_path)) return fail("E_IO", "config not found: " + config_path);
            tss::TrainConfig cfg = tss::TrainConfig::from_file(config_path);
            for (const auto& o : overrides) cfg.apply_override(o);
            tss::Trainer trainer(cfg);
            const tss::TrainResult r = trainer.run(&std::cerr);
            std::cout << "checkpoint " << r.final_checkpoint.string() << "\n";
            std::cout << "trace " << r.trace_path.string() << "\n";
            if (!r.best_checkpoint.empty()) std::cout << "best " << r.best_checkpoint.string() << "\n";
        } else if (*eval) {
            const auto cases = tss::evaluate_checkpoint(checkpoint, manifest, out_path);
            std::cout << "cases " << cases.size() << " mean_dice " << tss::mean_foreground_dice(cases) << "\n";
        } else if (*infer) {
            tss::TextSemiSeg model = tss::load_model(checkpoint);
            model->eval();
            const tss::Volume v = tss::load_volume(volume_path);
            tss::save_labels(tss::predict_labels(model, v), out_path);
            std::cout << out_path << std::endl;
        } else if (*curves) {
            tss::export_curves(trace_path, out_path);
            std::cout << out_path << std::endl;
        }
    } catch (const tss::Error& e) {
        return fail(e.code(), e.what());
    } catch (const c10::Error& e) {
        return fail("E_TORCH", e.what_without_backtrace());
    } catch (const std::exception& e) {
        return fail("E_INTERNAL", e.what());
    }
    return 0;
}
