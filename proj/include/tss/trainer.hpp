#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "tss/config.hpp"
#include "tss/dataio.hpp"
#include "tss/losses.hpp"
#include "tss/metrics.hpp"
#include "tss/model.hpp"

namespace tss {

struct IterationTrace {
    int iteration = 0;
    LossReport losses;
    int pseudo_labeler = 0;  // 0 when DCA did not run
    double wall_ms = 0.0;    // 0 in deterministic mode
};

inline constexpr const char* kTraceHeader = "iteration,l_sup_1,l_sup_2,l_unsup,l_cog,l_mix,lambda_u,l_total,pseudo_labeler,wall_ms";

std::string trace_row(const IterationTrace& t);
void write_trace_csv(const std::filesystem::path& path, const std::vector<IterationTrace>& rows);

/// Module toggles in effect for a run.
struct AblationSwitches {
    bool text_pathway = true;  // prompt bank / injector / projection head built
    bool tmr = true;
    bool csa = true;
    bool dca = true;
    bool unsup = true;
    bool sup = true;
    TextMode text_mode = TextMode::Multiplanar;

    bool all_modules_off() const { return !tmr && !csa && !dca; }
};

AblationSwitches ablation_switches(const TrainConfig& cfg);

/// One iteration's inputs: labeled patches with labels and unlabeled patches.
struct StepBatch {
    torch::Tensor x_l;  // n_l x 1 x H x W x D
    torch::Tensor y_l;  // n_l x H x W x D (int64)
    torch::Tensor x_u;  // n_u x 1 x H x W x D, may have n_u = 0
};

struct StepLosses {
    LossTerms terms;
    int pseudo_labeler = 0;  // 0 when DCA did not run
};

/// Forward pass(es) and every loss term of one iteration, without stepping.
StepLosses compute_step_losses(TextSemiSeg& model, const StepBatch& batch, const AblationSwitches& sw, double lambda_u);

struct TrainResult {
    std::filesystem::path final_checkpoint;
    std::filesystem::path trace_path;
    std::filesystem::path best_checkpoint;  // empty without a val split
    std::vector<IterationTrace> trace;
};

torch::optim::SGD make_optimizer(const TrainConfig& cfg, torch::nn::Module& model);

/// Semi-supervised training loop over one manifest.
class Trainer {
public:
    explicit Trainer(TrainConfig cfg);
    Trainer(TrainConfig cfg, DatasetManifest manifest);

    StepBatch sample_batch();
    /// Forward, losses, optional mixed second pass, one optimizer step.
    IterationTrace train_step(const StepBatch& batch, int iteration);
    IterationTrace step(int iteration) { return train_step(sample_batch(), iteration); }

    /// Runs every iteration, writing the trace CSV and checkpoints.
    TrainResult run(std::ostream* log = nullptr);

    void save_checkpoint(const std::filesystem::path& path);

    TextSemiSeg& model() { return model_; }
    torch::optim::SGD& optimizer() { return *optimizer_; }
    const TrainConfig& config() const { return cfg_; }
    const AblationSwitches& switches() const { return switches_; }
    const DatasetManifest& manifest() const { return manifest_; }
    bool deterministic() const { return deterministic_; }

private:
    void dump_batch(const StepBatch& batch, int iteration, const LossReport& report);

    TrainConfig cfg_;
    DatasetManifest manifest_;
    AblationSwitches switches_;
    bool deterministic_ = false;
    std::vector<Volume> labeled_volumes_;
    std::vector<LabelMap> labeled_maps_;
    std::vector<Volume> unlabeled_volumes_;
    Rng data_rng_;
    TextSemiSeg model_{nullptr};
    std::unique_ptr<torch::optim::SGD> optimizer_;
};

/// Restores momentum buffers saved by Trainer::save_checkpoint.
void load_optimizer_state(const Archive& archive, TextSemiSeg& model, torch::optim::SGD& optimizer);

/// Whole-volume inference: K x H x W x D averaged decoder probabilities.
torch::Tensor predict_volume(TextSemiSeg& model, const Volume& volume);
LabelMap predict_labels(TextSemiSeg& model, const Volume& volume);

/// Scores every (volume, label) pair of a split.
std::vector<CaseMetrics> evaluate_split(TextSemiSeg& model, const DatasetManifest& manifest, const std::vector<LabeledPair>& split);
double mean_foreground_dice(const std::vector<CaseMetrics>& cases);

/// Loads a checkpoint, scores the manifest's test split and writes the CSV.
std::vector<CaseMetrics> evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                                             const std::filesystem::path& out_csv);

/// Applies TSS_DETERMINISTIC / config determinism to the torch runtime.
void configure_determinism(bool deterministic);

}  // namespace tss
