#include "tss/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "tss/csa.hpp"
#include "tss/dca.hpp"
#include "tss/errors.hpp"

namespace fs = std::filesystem;

namespace tss {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

torch::Tensor stack_volumes(const std::vector<Volume>& vols) {
    std::vector<torch::Tensor> parts;
    for (const auto& v : vols) parts.push_back(volume_tensor(v.voxels, v.shape.h, v.shape.w, v.shape.d));
    return torch::cat(parts, 0);
}

torch::Tensor label_tensor(const LabelMap& y) {
    torch::Tensor t = torch::from_blob(const_cast<std::uint8_t*>(y.labels.data()), {1, y.shape.h, y.shape.w, y.shape.d}, torch::kUInt8);
    return t.to(torch::kLong);
}

Volume volume_from(const torch::Tensor& t, Spacing spacing) {
    torch::Tensor c = t.detach().to(torch::kFloat32).contiguous();
    Volume v(Shape3{static_cast<std::uint32_t>(c.size(-3)), static_cast<std::uint32_t>(c.size(-2)), static_cast<std::uint32_t>(c.size(-1))},
             0.0f, spacing);
    std::copy(c.data_ptr<float>(), c.data_ptr<float>() + c.numel(), v.voxels.begin());
    return v;
}

LabelMap labels_from(const torch::Tensor& t, Spacing spacing) {
    torch::Tensor c = t.detach().to(torch::kUInt8).contiguous();
    LabelMap y(Shape3{static_cast<std::uint32_t>(c.size(-3)), static_cast<std::uint32_t>(c.size(-2)), static_cast<std::uint32_t>(c.size(-1))},
               0, spacing);
    std::copy(c.data_ptr<std::uint8_t>(), c.data_ptr<std::uint8_t>() + c.numel(), y.labels.begin());
    return y;
}

bool finite(const LossReport& r) {
    return std::isfinite(r.l_sup_1) && std::isfinite(r.l_sup_2) && std::isfinite(r.l_unsup) && std::isfinite(r.l_cog) &&
           std::isfinite(r.l_mix) && std::isfinite(r.l_total);
}

const char* kMomentumPrefix = "optimizer.momentum.";

}  // namespace

std::string trace_row(const IterationTrace& t) {
    const LossReport& r = t.losses;
    return std::to_string(t.iteration) + "," + num(r.l_sup_1) + "," + num(r.l_sup_2) + "," + num(r.l_unsup) + "," + num(r.l_cog) + "," +
           num(r.l_mix) + "," + num(r.lambda_u) + "," + num(r.l_total) + "," + std::to_string(t.pseudo_labeler) + "," + num(t.wall_ms);
}

void write_trace_csv(const fs::path& path, const std::vector<IterationTrace>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open trace for writing: " + path.string());
    out << kTraceHeader << "\n";
    for (const auto& r : rows) out << trace_row(r) << "\n";
}

AblationSwitches ablation_switches(const TrainConfig& cfg) {
    AblationSwitches s;
    s.text_pathway = cfg.mode == RunMode::TextSemiSeg;
    s.tmr = s.text_pathway && cfg.tmr;
    s.csa = s.text_pathway && cfg.csa;
    s.dca = cfg.dca;
    s.unsup = cfg.unsup;
    s.sup = cfg.sup;
    s.text_mode = cfg.text_mode;
    return s;
}

torch::optim::SGD make_optimizer(const TrainConfig& cfg, torch::nn::Module& model) {
    std::vector<torch::Tensor> params;
    for (auto& p : model.parameters())
        if (p.requires_grad()) params.push_back(p);
    return torch::optim::SGD(params, torch::optim::SGDOptions(cfg.lr).momentum(cfg.momentum).weight_decay(cfg.weight_decay));
}

void configure_determinism(bool deterministic) {
    if (!deterministic) return;
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, /*warn_only=*/false);
}

Trainer::Trainer(TrainConfig cfg) : Trainer(cfg, load_manifest(cfg.manifest)) {}

Trainer::Trainer(TrainConfig cfg, DatasetManifest manifest) : cfg_(std::move(cfg)), manifest_(std::move(manifest)) {
    cfg_.validate();
    manifest_.validate();
    switches_ = ablation_switches(cfg_);
    deterministic_ = cfg_.deterministic || deterministic_from_env();
    configure_determinism(deterministic_);

    for (const auto& pair : manifest_.labeled) {
        labeled_volumes_.push_back(load_volume(manifest_.resolve(pair.volume)));
        labeled_maps_.push_back(load_labels(manifest_.resolve(pair.labels)));
        if (labeled_maps_.back().shape != labeled_volumes_.back().shape)
            throw ValidationError("label map dims differ from volume: " + pair.labels.string());
        if (labeled_maps_.back().max_label() >= manifest_.num_classes)
            throw ValidationError("label value exceeds num_classes in " + pair.labels.string());
    }
    if (labeled_volumes_.empty()) throw ValidationError("manifest has no labeled cases");
    for (const auto& p : manifest_.unlabeled) unlabeled_volumes_.push_back(load_volume(manifest_.resolve(p)));

    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32), 0x5eedu};
    data_rng_.seed(seq);
    torch::manual_seed(cfg_.seed);
    model_ = TextSemiSeg(cfg_.model_config(manifest_.num_classes));
    if (!cfg_.class_embeddings.empty()) {
        if (!model_->prompts) throw ValidationError("class_embeddings given but the text pathway is disabled");
        model_->prompts->load_class_embeddings(cfg_.class_embeddings);
    }
    model_->train();
    optimizer_ = std::make_unique<torch::optim::SGD>(make_optimizer(cfg_, *model_));
}

StepBatch Trainer::sample_batch() {
    const int n_l = cfg_.labeled_per_batch;
    const int n_u = unlabeled_volumes_.empty() ? 0 : cfg_.batch_size - n_l;
    std::vector<Volume> xl, xu;
    std::vector<torch::Tensor> yl;
    std::uniform_int_distribution<std::size_t> pick_l(0, labeled_volumes_.size() - 1);
    for (int i = 0; i < n_l; ++i) {
        const std::size_t c = pick_l(data_rng_);
        Patch p = sample_patch(labeled_volumes_[c], &labeled_maps_[c], cfg_.patch_size, data_rng_);
        xl.push_back(std::move(p.volume));
        yl.push_back(label_tensor(*p.labels));
    }
    if (n_u > 0) {
        std::uniform_int_distribution<std::size_t> pick_u(0, unlabeled_volumes_.size() - 1);
        for (int i = 0; i < n_u; ++i) {
            const std::size_t c = pick_u(data_rng_);
            xu.push_back(sample_patch(unlabeled_volumes_[c], nullptr, cfg_.patch_size, data_rng_).volume);
        }
    }
    StepBatch b;
    b.x_l = stack_volumes(xl);
    b.y_l = torch::cat(yl, 0);
    const auto& ps = cfg_.patch_size;
    b.x_u = xu.empty() ? torch::empty({0, 1, ps.h, ps.w, ps.d}) : stack_volumes(xu);
    return b;
}

StepLosses compute_step_losses(TextSemiSeg& model, const StepBatch& batch, const AblationSwitches& sw, double lambda_u) {
    const int64_t n_l = batch.x_l.size(0);
    const int64_t n_u = batch.x_u.size(0);

    torch::Tensor x = n_u > 0 ? torch::cat({batch.x_l, batch.x_u}, 0) : batch.x_l;
    ModelOutput out = model->forward(x, sw.tmr, sw.csa);
    const torch::Tensor& p1 = out.pred.first;
    const torch::Tensor& p2 = out.pred.second;

    StepLosses result;
    LossTerms& terms = result.terms;
    SupLosses sup = sup_losses(p1.narrow(0, 0, n_l), p2.narrow(0, 0, n_l), batch.y_l);
    if (sw.sup) {
        terms.sup1 = sup.first;
        terms.sup2 = sup.second;
    }
    if (sw.unsup && n_u > 0) {
        terms.unsup = unsup_loss(p1.narrow(0, n_l, n_u), p2.narrow(0, n_l, n_u));
        terms.lambda_u = lambda_u;
    }
    if (sw.csa) {
        torch::Tensor fvp = model->projection->forward(out.features.bottleneck);
        const auto spatial = fvp.sizes().slice(2);
        terms.cog = cognitive_loss(out.text, fvp, downsample_probs(p1, spatial), downsample_probs(p2, spatial));
    }

    const bool sup_finite = std::isfinite(sup.first.item<double>()) && std::isfinite(sup.second.item<double>());
    if (sw.dca && n_u > 0 && sup_finite) {
        const DecoderChoice choice = select_pseudo_labeler(sup.first.item<double>(), sup.second.item<double>());
        result.pseudo_labeler = choice.pseudo_labeler;
        const int64_t pairs = std::min(n_l, n_u);
        MixedBatch mixed = build_mixed_batch(batch.x_l.narrow(0, 0, pairs), batch.y_l.narrow(0, 0, pairs), batch.x_u.narrow(0, 0, pairs),
                                             p1.narrow(0, n_l, pairs), p2.narrow(0, n_l, pairs), choice);
        ModelOutput mix_out = model->forward(torch::cat({mixed.x_mix_l, mixed.x_mix_u}, 0), sw.tmr, false);
        DualPrediction mix_l{mix_out.pred.first.narrow(0, 0, pairs), mix_out.pred.second.narrow(0, 0, pairs)};
        DualPrediction mix_u{mix_out.pred.first.narrow(0, pairs, pairs), mix_out.pred.second.narrow(0, pairs, pairs)};
        terms.mix = mix_loss(mix_l, mix_u, mixed.y_mix_l, mixed.y_mix_u, choice.target);
    }
    return result;
}

IterationTrace Trainer::train_step(const StepBatch& batch, int iteration) {
    const auto start = std::chrono::steady_clock::now();
    StepLosses step = compute_step_losses(model_, batch, switches_, warmup(iteration, cfg_.iterations - 1, cfg_.beta));
    const LossTerms& terms = step.terms;
    const int labeler = step.pseudo_labeler;

    IterationTrace trace;
    trace.iteration = iteration;
    trace.losses = terms.report();
    trace.pseudo_labeler = labeler;
    if (!finite(trace.losses)) {
        dump_batch(batch, iteration, trace.losses);
        throw NumericError("non-finite loss at iteration " + std::to_string(iteration) + " (batch dumped under " +
                           (cfg_.checkpoint_dir / "nan_dump").string() + ")");
    }

    torch::Tensor total = terms.total();
    optimizer_->zero_grad();
    if (total.defined() && total.requires_grad()) {
        total.backward();
        optimizer_->step();
    }
    if (!deterministic_)
        trace.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return trace;
}

void Trainer::dump_batch(const StepBatch& batch, int iteration, const LossReport& report) {
    const fs::path dir = cfg_.checkpoint_dir / "nan_dump";
    fs::create_directories(dir);
    for (int64_t i = 0; i < batch.x_l.size(0); ++i) {
        save_volume(volume_from(batch.x_l[i][0], {1, 1, 1}), dir / ("labeled_" + std::to_string(i) + ".vol"));
        save_labels(labels_from(batch.y_l[i], {1, 1, 1}), dir / ("labeled_" + std::to_string(i) + ".lbl"));
    }
    for (int64_t i = 0; i < batch.x_u.size(0); ++i)
        save_volume(volume_from(batch.x_u[i][0], {1, 1, 1}), dir / ("unlabeled_" + std::to_string(i) + ".vol"));
    std::ofstream info(dir / "losses.csv");
    info << kTraceHeader << "\n" << trace_row(IterationTrace{iteration, report, 0, 0.0}) << "\n";
}

void Trainer::save_checkpoint(const fs::path& path) {
    Archive a = model_archive(model_, {{"iterations", std::to_string(cfg_.iterations)}, {"seed", std::to_string(cfg_.seed)}});
    for (const auto& item : model_->named_parameters()) {
        auto it = optimizer_->state().find(item.value().unsafeGetTensorImpl());
        if (it == optimizer_->state().end()) continue;
        auto& st = static_cast<torch::optim::SGDParamState&>(*it->second);
        if (st.momentum_buffer().defined()) a.tensors.emplace_back(kMomentumPrefix + item.key(), st.momentum_buffer());
    }
    write_archive(path, a);
}

void load_optimizer_state(const Archive& archive, TextSemiSeg& model, torch::optim::SGD& optimizer) {
    for (const auto& item : model->named_parameters()) {
        const torch::Tensor* buf = archive.find(kMomentumPrefix + item.key());
        if (!buf) continue;
        if (buf->sizes() != item.value().sizes()) throw FormatError("momentum buffer shape mismatch for " + item.key());
        auto st = std::make_unique<torch::optim::SGDParamState>();
        st->momentum_buffer(buf->to(item.value().dtype()).clone());
        optimizer.state()[item.value().unsafeGetTensorImpl()] = std::move(st);
    }
}

TrainResult Trainer::run(std::ostream* log) {
    fs::create_directories(cfg_.checkpoint_dir);
    TrainResult result;
    result.trace_path = cfg_.trace_path();
    if (result.trace_path.has_parent_path()) fs::create_directories(result.trace_path.parent_path());
    std::ofstream trace_out(result.trace_path);
    if (!trace_out) throw IoError("cannot open trace for writing: " + result.trace_path.string());
    trace_out << kTraceHeader << "\n";

    double best_dice = -1.0;
    for (int t = 0; t < cfg_.iterations; ++t) {
        IterationTrace row = step(t);
        trace_out << trace_row(row) << "\n";
        trace_out.flush();
        result.trace.push_back(row);
        if (log && (t % 50 == 0 || t + 1 == cfg_.iterations))
            *log << "iter " << t << " total " << row.losses.l_total << " sup " << row.losses.l_sup_1 << "/" << row.losses.l_sup_2 << "\n";
        if (cfg_.eval_every > 0 && (t + 1) % cfg_.eval_every == 0 && t + 1 < cfg_.iterations) {
            save_checkpoint(cfg_.checkpoint_dir / ("iter_" + std::to_string(t + 1) + ".ckpt"));
            if (!manifest_.val.empty()) {
                model_->eval();
                const double dice = mean_foreground_dice(evaluate_split(model_, manifest_, manifest_.val));
                model_->train();
                if (log) *log << "iter " << t + 1 << " val dice " << dice << "\n";
                if (dice > best_dice) {
                    best_dice = dice;
                    result.best_checkpoint = cfg_.checkpoint_dir / "best.ckpt";
                    save_checkpoint(result.best_checkpoint);
                }
            }
        }
    }
    result.final_checkpoint = cfg_.checkpoint_dir / "final.ckpt";
    save_checkpoint(result.final_checkpoint);
    if (!manifest_.val.empty()) {
        model_->eval();
        const double dice = mean_foreground_dice(evaluate_split(model_, manifest_, manifest_.val));
        model_->train();
        if (dice > best_dice) {
            result.best_checkpoint = cfg_.checkpoint_dir / "best.ckpt";
            save_checkpoint(result.best_checkpoint);
        }
    }
    return result;
}

torch::Tensor predict_volume(TextSemiSeg& model, const Volume& volume) {
    model->config().backbone.check_spatial({volume.shape.h, volume.shape.w, volume.shape.d});
    torch::NoGradGuard no_grad;
    torch::Tensor x = volume_tensor(volume.voxels, volume.shape.h, volume.shape.w, volume.shape.d);
    return model->predict(x).squeeze(0);
}

LabelMap predict_labels(TextSemiSeg& model, const Volume& volume) {
    torch::Tensor probs = predict_volume(model, volume);
    return labels_from(binarize(probs.unsqueeze(0)).squeeze(0), volume.spacing);
}

std::vector<CaseMetrics> evaluate_split(TextSemiSeg& model, const DatasetManifest& manifest, const std::vector<LabeledPair>& split) {
    std::vector<CaseMetrics> out;
    for (const auto& pair : split) {
        const Volume v = load_volume(manifest.resolve(pair.volume));
        LabelMap y = load_labels(manifest.resolve(pair.labels));
        if (y.shape != v.shape) throw ValidationError("label map dims differ from volume: " + pair.labels.string());
        y.spacing = v.spacing;
        out.push_back({pair.volume.stem().string(), evaluate_case(predict_volume(model, v), y)});
    }
    return out;
}

double mean_foreground_dice(const std::vector<CaseMetrics>& cases) {
    std::vector<double> d;
    for (const auto& c : cases) d.push_back(c.report.foreground.dice);
    return aggregate(d).mean;
}

std::vector<CaseMetrics> evaluate_checkpoint(const fs::path& checkpoint, const fs::path& manifest_path, const fs::path& out_csv) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    TextSemiSeg model = load_model(checkpoint);
    if (model->config().backbone.num_classes != manifest.num_classes)
        throw ValidationError("checkpoint predicts " + std::to_string(model->config().backbone.num_classes) + " classes, manifest has " +
                              std::to_string(manifest.num_classes));
    model->eval();
    auto cases = evaluate_split(model, manifest, manifest.test);
    std::ofstream out(out_csv);
    if (!out) throw IoError("cannot open for writing: " + out_csv.string());
    write_metrics_csv(out, cases, manifest.class_names);
    return cases;
}

}  // namespace tss
