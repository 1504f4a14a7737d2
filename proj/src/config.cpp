#include "tss/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tss/errors.hpp"

namespace tss {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_switch(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ValidationError("config: '" + key + "' expects on/off, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        T out;
        if constexpr (std::is_same_v<T, int>)
            out = std::stoi(v, &used);
        else if constexpr (std::is_same_v<T, std::uint64_t>)
            out = std::stoull(v, &used);
        else
            out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ValidationError("config: '" + key + "' has invalid value '" + v + "'");
    }
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto integer = [](int TrainConfig::*f) { return [f](TrainConfig& c, const std::string& k, const std::string& v) { c.*f = parse_number<int>(k, v); }; };
        auto real = [](double TrainConfig::*f) { return [f](TrainConfig& c, const std::string& k, const std::string& v) { c.*f = parse_number<double>(k, v); }; };
        auto toggle = [](bool TrainConfig::*f) { return [f](TrainConfig& c, const std::string& k, const std::string& v) { c.*f = parse_switch(k, v); }; };
        auto path = [](std::filesystem::path TrainConfig::*f) { return [f](TrainConfig& c, const std::string&, const std::string& v) { c.*f = v; }; };
        t["manifest"] = path(&TrainConfig::manifest);
        t["patch_size"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.patch_size = parse_shape(v); };
        t["batch_size"] = integer(&TrainConfig::batch_size);
        t["labeled_per_batch"] = integer(&TrainConfig::labeled_per_batch);
        t["iterations"] = integer(&TrainConfig::iterations);
        t["lr"] = real(&TrainConfig::lr);
        t["momentum"] = real(&TrainConfig::momentum);
        t["weight_decay"] = real(&TrainConfig::weight_decay);
        t["beta"] = real(&TrainConfig::beta);
        t["context_length"] = integer(&TrainConfig::context_length);
        t["base_channels"] = integer(&TrainConfig::base_channels);
        t["depth"] = integer(&TrainConfig::depth);
        t["convs_per_stage"] = integer(&TrainConfig::convs_per_stage);
        t["text_dim"] = integer(&TrainConfig::text_dim);
        t["attn_dim"] = integer(&TrainConfig::attn_dim);
        t["dropout"] = real(&TrainConfig::dropout);
        t["seed"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); };
        t["eval_every"] = integer(&TrainConfig::eval_every);
        t["checkpoint_dir"] = path(&TrainConfig::checkpoint_dir);
        t["trace"] = path(&TrainConfig::trace);
        t["class_embeddings"] = path(&TrainConfig::class_embeddings);
        t["mode"] = [](TrainConfig& c, const std::string& k, const std::string& v) {
            if (v == "textsemiseg")
                c.mode = RunMode::TextSemiSeg;
            else if (v == "baseline") {
                c.mode = RunMode::Baseline;
                c.tmr = c.csa = c.dca = false;
            }
            else
                throw ValidationError("config: '" + k + "' must be textsemiseg or baseline");
        };
        t["text_mode"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.text_mode = parse_text_mode(v); };
        t["tmr"] = toggle(&TrainConfig::tmr);
        t["csa"] = toggle(&TrainConfig::csa);
        t["dca"] = toggle(&TrainConfig::dca);
        t["unsup"] = toggle(&TrainConfig::unsup);
        t["sup"] = toggle(&TrainConfig::sup);
        t["deterministic"] = toggle(&TrainConfig::deterministic);
        return t;
    }();
    return table;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ValidationError("config: unknown key '" + key + "'");
    it->second(*this, key, value);
}

void TrainConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::vector<std::string> TrainConfig::keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
}

void TrainConfig::validate() const {
    if (manifest.empty()) throw ValidationError("config: manifest is required");
    if (batch_size < 2) throw ValidationError("config: batch_size must be >= 2");
    if (labeled_per_batch < 1 || labeled_per_batch > batch_size - 1)
        throw ValidationError("config: labeled_per_batch must be in [1, batch_size-1]");
    if (iterations < 1) throw ValidationError("config: iterations must be >= 1");
    if (!(lr > 0.0)) throw ValidationError("config: lr must be > 0");
    if (momentum < 0.0 || weight_decay < 0.0 || beta < 0.0) throw ValidationError("config: momentum, weight_decay, beta must be >= 0");
    if (eval_every < 0) throw ValidationError("config: eval_every must be >= 0");
    if (mode == RunMode::Baseline && (tmr || csa))
        throw ValidationError("config: baseline mode has no text pathway; tmr and csa must be off");
    ModelConfig probe = model_config(2);
    probe.validate();
    probe.backbone.check_spatial({patch_size.h, patch_size.w, patch_size.d});
}

ModelConfig TrainConfig::model_config(int num_classes) const {
    ModelConfig m;
    m.backbone.base_channels = base_channels;
    m.backbone.depth = depth;
    m.backbone.num_classes = num_classes;
    m.backbone.convs_per_stage = convs_per_stage;
    m.backbone.dropout = dropout;
    m.with_text = mode == RunMode::TextSemiSeg;
    m.text_mode = text_mode;
    m.context_length = context_length;
    m.text_dim = text_dim;
    m.attn_dim = attn_dim;
    m.inject_text = m.with_text && tmr;
    return m;
}

std::filesystem::path TrainConfig::trace_path() const { return trace.empty() ? checkpoint_dir / "trace.csv" : trace; }

std::string TrainConfig::to_text() const {
    auto onoff = [](bool b) { return b ? "on" : "off"; };
    std::ostringstream os;
    os << "manifest = " << manifest.string() << "\n"
       << "patch_size = " << patch_size.h << "," << patch_size.w << "," << patch_size.d << "\n"
       << "batch_size = " << batch_size << "\n"
       << "labeled_per_batch = " << labeled_per_batch << "\n"
       << "iterations = " << iterations << "\n"
       << "lr = " << lr << "\n"
       << "momentum = " << momentum << "\n"
       << "weight_decay = " << weight_decay << "\n"
       << "beta = " << beta << "\n"
       << "context_length = " << context_length << "\n"
       << "base_channels = " << base_channels << "\n"
       << "depth = " << depth << "\n"
       << "convs_per_stage = " << convs_per_stage << "\n"
       << "text_dim = " << text_dim << "\n"
       << "attn_dim = " << attn_dim << "\n"
       << "dropout = " << dropout << "\n"
       << "seed = " << seed << "\n"
       << "eval_every = " << eval_every << "\n"
       << "checkpoint_dir = " << checkpoint_dir.string() << "\n";
    if (!trace.empty()) os << "trace = " << trace.string() << "\n";
    if (!class_embeddings.empty()) os << "class_embeddings = " << class_embeddings.string() << "\n";
    os << "mode = " << (mode == RunMode::Baseline ? "baseline" : "textsemiseg") << "\n"
       << "text_mode = " << to_string(text_mode) << "\n"
       << "tmr = " << onoff(tmr) << "\n"
       << "csa = " << onoff(csa) << "\n"
       << "dca = " << onoff(dca) << "\n"
       << "unsup = " << onoff(unsup) << "\n"
       << "sup = " << onoff(sup) << "\n"
       << "deterministic = " << onoff(deterministic) << "\n";
    return os.str();
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    TrainConfig c;
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

bool deterministic_from_env() {
    const char* v = std::getenv("TSS_DETERMINISTIC");
    return v != nullptr && std::string(v) == "1";
}

}  // namespace tss
