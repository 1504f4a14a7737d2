#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tss/dataio.hpp"
#include "tss/model.hpp"

namespace tss {

enum class RunMode { TextSemiSeg, Baseline };

/// Declarative description of one training run. Every field is
/// addressable as `key = value` in a config file and via `--set key=value`.
struct TrainConfig {
    std::filesystem::path manifest;
    Shape3 patch_size{32, 32, 32};
    int batch_size = 4;
    int labeled_per_batch = 2;
    int iterations = 30000;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double beta = 0.1;
    int context_length = 4;
    int base_channels = 4;
    int depth = 3;
    int convs_per_stage = 1;
    int text_dim = 0;
    int attn_dim = 0;
    double dropout = 0.0;
    std::uint64_t seed = 1;
    int eval_every = 0;  // 0: final checkpoint only
    std::filesystem::path checkpoint_dir = "checkpoints";
    std::filesystem::path trace;  // empty: <checkpoint_dir>/trace.csv
    std::filesystem::path class_embeddings;  // optional TSSEMB1 file

    RunMode mode = RunMode::TextSemiSeg;
    TextMode text_mode = TextMode::Multiplanar;
    bool tmr = true;
    bool csa = true;
    bool dca = true;
    bool unsup = true;
    bool sup = true;
    bool deterministic = false;

    void set(const std::string& key, const std::string& value);
    /// `key=value` form used by --set.
    void apply_override(const std::string& assignment);
    void validate() const;
    std::string to_text() const;
    ModelConfig model_config(int num_classes) const;
    std::filesystem::path trace_path() const;

    static TrainConfig from_file(const std::filesystem::path& path);
    static std::vector<std::string> keys();
};

/// True when TSS_DETERMINISTIC=1 is set in the environment.
bool deterministic_from_env();

}  // namespace tss
