#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "groklab/config_io.hpp"
#include "groklab/metrics.hpp"
#include "groklab/svg.hpp"
#include "groklab/trainer.hpp"

namespace groklab {

// ---------------------------------------------------------------------------
// Epoch budgets
// ---------------------------------------------------------------------------
// Full-batch training needs far more epochs than mini-batch training to reach
// the same number of optimizer steps, so every budget below was calibrated
// against actual full-batch runs: large enough for the phenomenon the preset
// studies, small enough to keep the suite runnable on a laptop.

namespace budgets {

inline constexpr int kDefault = 16000;  // baseline config groks by ~12000
inline constexpr int kAlpha3 = 20000;
inline constexpr int kAlpha5 = 22000;
inline constexpr int kAlpha7 = 24000;    // alpha 7 groks by ~18300
inline constexpr int kDecayLow = 4000;   // weight decay 0.3: sparsity dip only
inline constexpr int kDecayHigh = 8000;  // weight decay 3.0 groks by ~5000
inline constexpr int kRelu = 32000;      // relu-after-embedding groks by ~20600
inline constexpr int kShiftEmbedding = 20000;
inline constexpr int kShiftWeights = 24000;
inline constexpr int kUniformSlow = 32000;  // [0.4, 0.8] memorizes near 10000, groks by ~23800
inline constexpr int kUniformFast = 16000;
inline constexpr int kConstant = 4000;
inline constexpr int kFrozen = kDefault;  // suppression must hold over the full default window
inline constexpr int kSmoke = 200;

} // namespace budgets

// ---------------------------------------------------------------------------
// Checkpoint anchors
// ---------------------------------------------------------------------------
// Interesting epochs shift with the training regime (batch size sets the
// steps-per-epoch ratio), so metric plans address checkpoints relative to
// each run's own grokking times instead of absolute epochs.

struct Anchor {
    enum class Kind { Epoch, Init, PreRise, MidRise, PostGrok, Final, All };

    Kind kind = Kind::Final;
    int epoch = 0; // only for Kind::Epoch

    static Anchor at(int e) { return {Kind::Epoch, e}; }
    static Anchor init() { return {Kind::Init, 0}; }
    static Anchor pre_rise() { return {Kind::PreRise, 0}; }
    static Anchor mid_rise() { return {Kind::MidRise, 0}; }
    static Anchor post_grok() { return {Kind::PostGrok, 0}; }
    static Anchor final() { return {Kind::Final, 0}; }
    static Anchor all() { return {Kind::All, 0}; }
};

namespace detail {

inline std::string epoch_label(int epoch) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "epoch_%06d", epoch);
    return buf;
}

// First checkpoint at or after the target, else the last checkpoint.
inline int checkpoint_at_or_after(std::span<const int> ckpts, int target) {
    for (int e : ckpts) {
        if (e >= target) {
            return e;
        }
    }
    return ckpts.back();
}

} // namespace detail

// Maps an anchor to (label, checkpoint epoch) pairs against a finished run.
inline std::vector<std::pair<std::string, int>> resolve_anchor(const Anchor& a,
                                                               std::span<const EpochRecord> log,
                                                               std::span<const int> ckpts) {
    if (ckpts.empty()) {
        fail(ErrorCode::EmptyInput, "resolve_anchor: run has no checkpoints");
    }
    const int last = ckpts.back();
    const GrokkingTimes times = grokking_times(log);
    switch (a.kind) {
    case Anchor::Kind::Epoch:
        return {{detail::epoch_label(a.epoch),
                 detail::checkpoint_at_or_after(ckpts, std::clamp(a.epoch, 0, last))}};
    case Anchor::Kind::Init:
        return {{"init", ckpts.front()}};
    case Anchor::Kind::PreRise:
        return {{"pre_rise",
                 detail::checkpoint_at_or_after(ckpts, times.t_train.value_or(last / 4))}};
    case Anchor::Kind::MidRise: {
        const int lo = times.t_train.value_or(last / 2);
        const int hi = times.t_test.value_or(last);
        return {{"mid_rise", detail::checkpoint_at_or_after(ckpts, (lo + hi) / 2)}};
    }
    case Anchor::Kind::PostGrok:
        return {{"post_grok", detail::checkpoint_at_or_after(ckpts, times.t_test.value_or(last))}};
    case Anchor::Kind::Final:
        return {{"final", last}};
    case Anchor::Kind::All: {
        std::vector<std::pair<std::string, int>> out;
        out.reserve(ckpts.size());
        for (int e : ckpts) {
            out.emplace_back(detail::epoch_label(e), e);
        }
        return out;
    }
    }
    fail(ErrorCode::InvalidSpec, "resolve_anchor: unknown anchor kind");
}

// ---------------------------------------------------------------------------
// Metric plans
// ---------------------------------------------------------------------------

enum class MetricKind { McDropout, Drc, Cosine, Hist, Sparsity };
enum class ParamGroup { Embedding, W1, W2 };

struct MetricPlanItem {
    MetricKind kind = MetricKind::Cosine;
    std::vector<Anchor> anchors;
    ParamGroup group = ParamGroup::Embedding; // histograms only
};

inline std::string metric_name(MetricKind kind, ParamGroup group) {
    switch (kind) {
    case MetricKind::McDropout:
        return "mc_dropout";
    case MetricKind::Drc:
        return "drc";
    case MetricKind::Cosine:
        return "cosine";
    case MetricKind::Sparsity:
        return "sparsity";
    case MetricKind::Hist:
        switch (group) {
        case ParamGroup::Embedding:
            return "hist_embedding";
        case ParamGroup::W1:
            return "hist_w1";
        case ParamGroup::W2:
            return "hist_w2";
        }
    }
    fail(ErrorCode::InvalidSpec, "metric_name: unknown metric kind");
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

struct PresetCell {
    std::string label;
    double value = 0.0; // position on the sweep axis, if any
    TrainConfig config;
};

struct ExperimentPreset {
    std::string name;
    std::string description;
    std::string sweep_axis; // empty when the preset is not a sweep
    std::vector<PresetCell> cells;
    std::vector<MetricPlanItem> plan;
    int seed_count = 3; // seeds are master_seed, master_seed+1, ...
};

// Checkpoints every 25 epochs through the early phase, where the sparsity
// minimum and the figure anchors live, then the regular grid takes over.
inline std::vector<int> dense_early_checkpoints() {
    std::vector<int> out;
    for (int e = 0; e <= 1200; e += 25) {
        out.push_back(e);
    }
    for (int e : {1500, 1650, 2000, 2500}) {
        out.push_back(e);
    }
    return out;
}

// The one baseline configuration shared by every figure of the default run.
inline TrainConfig default_run_config() {
    TrainConfig cfg;
    cfg.epochs = budgets::kDefault;
    cfg.checkpoint_epochs = dense_early_checkpoints();
    cfg.checkpoint_every = 250;
    return cfg;
}

namespace detail {

inline TrainConfig with_alpha(double alpha, int epochs) {
    TrainConfig cfg = default_run_config();
    cfg.init.embedding = GroupInit::xavier(alpha);
    cfg.init.layer1 = GroupInit::xavier(alpha);
    cfg.init.layer2 = GroupInit::xavier(alpha);
    cfg.epochs = epochs;
    return cfg;
}

inline TrainConfig with_decay(double weight_decay, int epochs) {
    TrainConfig cfg = default_run_config();
    cfg.opt.weight_decay = weight_decay;
    cfg.epochs = epochs;
    return cfg;
}

inline TrainConfig with_uniform(double lo, double hi, int epochs) {
    TrainConfig cfg = default_run_config();
    cfg.init.embedding = GroupInit::uniform(lo, hi);
    cfg.init.layer1 = GroupInit::uniform(lo, hi);
    cfg.init.layer2 = GroupInit::uniform(lo, hi);
    cfg.epochs = epochs;
    return cfg;
}

inline TrainConfig with_shift(bool shift_embedding, bool shift_weights, int epochs) {
    TrainConfig cfg = default_run_config();
    const GroupInit shifted = GroupInit::normal(0.2, 0.1);
    if (shift_embedding) {
        cfg.init.embedding = shifted;
    }
    if (shift_weights) {
        cfg.init.layer1 = shifted;
        cfg.init.layer2 = shifted;
    }
    cfg.epochs = epochs;
    return cfg;
}

} // namespace detail

inline std::vector<ExperimentPreset> preset_table() {
    std::vector<ExperimentPreset> presets;

    {
        ExperimentPreset p;
        p.name = "smoke";
        p.description = "tiny end-to-end run for plumbing and reproducibility checks";
        TrainConfig cfg;
        cfg.dims = {13, 8, 16};
        cfg.epochs = budgets::kSmoke;
        cfg.checkpoint_epochs = {0};
        cfg.checkpoint_every = 50;
        p.cells.push_back({"tiny", 0.0, cfg});
        p.seed_count = 1;
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig1";
        p.description = "accuracy curves with MC-dropout accuracy variance at every checkpoint";
        p.cells.push_back({"default", 0.0, default_run_config()});
        p.plan.push_back({MetricKind::McDropout, {Anchor::all()}});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig2";
        p.description = "dropout robustness curves before, during, and after the test-accuracy rise";
        p.cells.push_back({"default", 0.0, default_run_config()});
        p.plan.push_back({MetricKind::Drc,
                          {Anchor::init(), Anchor::pre_rise(), Anchor::mid_rise(),
                           Anchor::post_grok(), Anchor::final()}});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig3";
        p.description = "embedding cosine-similarity heatmaps as codiagonal structure emerges";
        p.cells.push_back({"default", 0.0, default_run_config()});
        p.plan.push_back({MetricKind::Cosine,
                          {Anchor::init(), Anchor::pre_rise(), Anchor::mid_rise(),
                           Anchor::post_grok()}});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig4";
        p.description = "embedding value histograms around the generalization transition";
        p.cells.push_back({"default", 0.0, default_run_config()});
        p.plan.push_back({MetricKind::Hist,
                          {Anchor::pre_rise(), Anchor::post_grok(), Anchor::final()}});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig5";
        p.description = "grokking delay versus initialization scale factor";
        p.sweep_axis = "alpha";
        p.cells.push_back({"alpha_1", 1.0, default_run_config()});
        p.cells.push_back({"alpha_3", 3.0, detail::with_alpha(3.0, budgets::kAlpha3)});
        p.cells.push_back({"alpha_5", 5.0, detail::with_alpha(5.0, budgets::kAlpha5)});
        p.cells.push_back({"alpha_7", 7.0, detail::with_alpha(7.0, budgets::kAlpha7)});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig6";
        p.description = "parameter distribution statistics across training";
        p.cells.push_back({"default", 0.0, default_run_config()});
        p.plan.push_back({MetricKind::Hist,
                          {Anchor::init(), Anchor::pre_rise(), Anchor::mid_rise(),
                           Anchor::post_grok(), Anchor::final()}});
        p.plan.push_back({MetricKind::Hist, {Anchor::final()}, ParamGroup::W1});
        p.plan.push_back({MetricKind::Hist, {Anchor::final()}, ParamGroup::W2});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig7";
        p.description = "embedding distribution evolution for a shifted uniform [0.4, 0.8] start";
        p.cells.push_back(
            {"uniform_04_08", 0.0, detail::with_uniform(0.4, 0.8, budgets::kUniformSlow)});
        p.plan.push_back({MetricKind::Hist,
                          {Anchor::init(), Anchor::at(150), Anchor::pre_rise(),
                           Anchor::mid_rise(), Anchor::post_grok()}});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig9";
        p.description = "shifted positive uniform initialization intervals";
        p.sweep_axis = "interval";
        p.cells.push_back(
            {"case0_m02_02", 0.0, detail::with_uniform(-0.2, 0.2, budgets::kUniformFast)});
        p.cells.push_back(
            {"case1_04_08", 1.0, detail::with_uniform(0.4, 0.8, budgets::kUniformSlow)});
        p.cells.push_back(
            {"case2_12_16", 2.0, detail::with_uniform(1.2, 1.6, budgets::kUniformFast)});
        p.cells.push_back(
            {"case3_16_20", 3.0, detail::with_uniform(1.6, 2.0, budgets::kUniformFast)});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig10";
        p.description = "shifted normal (0.2, 0.1) applied per parameter group";
        p.sweep_axis = "layer_shift";
        p.cells.push_back({"shift_none", 0.0, default_run_config()});
        p.cells.push_back(
            {"shift_embedding", 1.0, detail::with_shift(true, false, budgets::kShiftEmbedding)});
        p.cells.push_back(
            {"shift_weights", 2.0, detail::with_shift(false, true, budgets::kShiftWeights)});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "fig11";
        p.description = "inactive-neuron trajectory under different weight decay strengths";
        p.sweep_axis = "weight_decay";
        p.cells.push_back({"wd_0.3", 0.3, detail::with_decay(0.3, budgets::kDecayLow)});
        p.cells.push_back({"wd_1.0", 1.0, default_run_config()});
        p.cells.push_back({"wd_3.0", 3.0, detail::with_decay(3.0, budgets::kDecayHigh)});
        p.plan.push_back({MetricKind::Sparsity, {Anchor::all()}});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "frozen-embedding";
        p.description = "embeddings frozen at initialization; grokking should be suppressed";
        TrainConfig cfg = default_run_config();
        cfg.variant.freeze_embedding = true;
        cfg.epochs = budgets::kFrozen;
        p.cells.push_back({"frozen", 0.0, cfg});
        p.plan.push_back({MetricKind::Cosine, {Anchor::final()}});
        p.plan.push_back({MetricKind::Hist, {Anchor::final()}});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "relu-embedding";
        p.description = "ReLU applied to embeddings before the first layer, against the baseline";
        p.cells.push_back({"baseline", 0.0, default_run_config()});
        TrainConfig cfg = default_run_config();
        cfg.variant.relu_after_embedding = true;
        cfg.epochs = budgets::kRelu;
        p.cells.push_back({"relu", 1.0, cfg});
        p.plan.push_back({MetricKind::Hist, {Anchor::post_grok(), Anchor::final()}});
        presets.push_back(std::move(p));
    }
    {
        ExperimentPreset p;
        p.name = "constant-init";
        p.description = "constant embeddings still learn; constant non-embedding weights do not";
        TrainConfig emb = default_run_config();
        emb.init.embedding = GroupInit::constant(0.1);
        emb.epochs = budgets::kConstant;
        p.cells.push_back({"constant_embedding", 0.0, emb});
        TrainConfig wts = default_run_config();
        wts.init.layer1 = GroupInit::constant(0.1);
        wts.init.layer2 = GroupInit::constant(0.1);
        wts.epochs = budgets::kConstant;
        p.cells.push_back({"constant_weights", 1.0, wts});
        presets.push_back(std::move(p));
    }

    return presets;
}

inline ExperimentPreset find_preset(std::string_view name) {
    const std::vector<ExperimentPreset> presets = preset_table();
    for (const ExperimentPreset& p : presets) {
        if (p.name == name) {
            return p;
        }
    }
    std::string names;
    for (const ExperimentPreset& p : presets) {
        if (!names.empty()) {
            names += ", ";
        }
        names += p.name;
    }
    fail(ErrorCode::UnknownPreset,
         "unknown preset '" + std::string(name) + "'; available: " + names);
}

// ---------------------------------------------------------------------------
// Run store
// ---------------------------------------------------------------------------
// Runs are keyed by config hash (the seed is part of the config), so presets
// that share a cell train it exactly once when pointed at a common store.

struct LoadedRun {
    TrainConfig config;
    std::vector<EpochRecord> log;
    std::vector<int> checkpoints;
    std::filesystem::path dir;
};

inline LoadedRun load_run(const std::filesystem::path& dir) {
    const std::filesystem::path config_path = dir / "config.json";
    if (!std::filesystem::exists(config_path)) {
        fail(ErrorCode::Io, "load_run: missing " + config_path.string());
    }
    LoadedRun run;
    run.dir = dir;
    run.config = load_config(config_path);
    const std::filesystem::path log_path = dir / "log.csv";
    if (!std::filesystem::exists(log_path)) {
        fail(ErrorCode::Io, "load_run: missing " + log_path.string());
    }
    run.log = epoch_log_from_csv(read_text_file(log_path));
    run.checkpoints = run.config.resolved_checkpoints();
    for (int e : run.checkpoints) {
        const std::filesystem::path ckpt = checkpoint_path(dir, e);
        if (!std::filesystem::exists(ckpt)) {
            fail(ErrorCode::Io, "load_run: missing " + ckpt.string());
        }
    }
    return run;
}

// True when the directory already holds a complete run of exactly this config.
inline bool run_is_complete(const std::filesystem::path& dir, const TrainConfig& cfg) {
    try {
        const LoadedRun run = load_run(dir);
        return to_json(run.config) == to_json(cfg) &&
               run.log.size() == static_cast<std::size_t>(cfg.epochs) + 1;
    } catch (const Error&) {
        return false;
    }
}

// Trains into <store>/<config-hash> unless a complete identical run already
// sits there and reuse is allowed.
inline std::filesystem::path ensure_run(const TrainConfig& cfg,
                                        const std::filesystem::path& store, bool reuse,
                                        std::FILE* progress = nullptr) {
    const std::filesystem::path dir = store / config_hash(cfg);
    if (reuse && run_is_complete(dir, cfg)) {
        if (progress) {
            std::fprintf(progress, "reuse  %s (seed %llu, %d epochs)\n", dir.string().c_str(),
                         static_cast<unsigned long long>(cfg.master_seed), cfg.epochs);
        }
        return dir;
    }
    std::filesystem::remove_all(dir);
    if (progress) {
        std::fprintf(progress, "train  %s (seed %llu, %d epochs)\n", dir.string().c_str(),
                     static_cast<unsigned long long>(cfg.master_seed), cfg.epochs);
        std::fflush(progress);
    }
    train(cfg, dir);
    return dir;
}

// ---------------------------------------------------------------------------
// Metric record computation
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::uint32_t> all_indices(const ModTask& task) {
    std::vector<std::uint32_t> idx(task.pairs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = static_cast<std::uint32_t>(i);
    }
    return idx;
}

inline std::span<const double> group_values(const ModelParams& params, ParamGroup group) {
    const Matrix* m = nullptr;
    switch (group) {
    case ParamGroup::Embedding:
        m = &params.embedding;
        break;
    case ParamGroup::W1:
        m = &params.w1;
        break;
    case ParamGroup::W2:
        m = &params.w2;
        break;
    }
    return {m->data(), m->rows() * m->cols()};
}

} // namespace detail

// Computes one plan item at one resolved checkpoint; pure over the checkpoint.
inline nlohmann::json metric_payload(const MetricPlanItem& item, const ModelParams& params,
                                     const TrainConfig& cfg, const ModTask& task,
                                     std::span<const std::uint32_t> test_idx,
                                     std::span<const std::uint32_t> all_idx, int epoch) {
    switch (item.kind) {
    case MetricKind::McDropout: {
        MCDropoutConfig mc;
        mc.seed = cfg.master_seed;
        const MCDropoutStats stats = mc_dropout_stats(params, cfg.variant, task, test_idx, mc);
        return to_json(stats);
    }
    case MetricKind::Drc: {
        const std::vector<double> rates = default_drc_rates();
        DRCCurve curve = dropout_robustness_curve(params, cfg.variant, task, test_idx, rates,
                                                  100, cfg.master_seed);
        curve.checkpoint_epoch = epoch;
        return to_json(curve);
    }
    case MetricKind::Cosine: {
        const Matrix cos = cosine_similarity_matrix(params.embedding);
        const CodiagonalEnergy energy = codiagonal_energy(cos);
        return {{"matrix", to_json(cos)}, {"energy", to_json(energy)}};
    }
    case MetricKind::Hist: {
        const DistStats stats = distribution_stats(detail::group_values(params, item.group));
        return to_json(stats);
    }
    case MetricKind::Sparsity: {
        const SparsityReport report = sparsity(params, cfg.variant, task, all_idx);
        return to_json(report);
    }
    }
    fail(ErrorCode::InvalidSpec, "metric_payload: unknown metric kind");
}

// Computes and persists every (plan item, anchor) record for one finished run.
inline void compute_metric_records(const LoadedRun& run, std::span<const MetricPlanItem> plan,
                                   bool reuse_existing = false, std::FILE* progress = nullptr) {
    if (plan.empty()) {
        return;
    }
    const TrainConfig& cfg = run.config;
    const ModTask task = generate(cfg.dims.vocab);
    RngStream split_rng(cfg.master_seed, "split");
    const Split split = make_split(task, cfg.split_fraction, split_rng);
    const std::vector<std::uint32_t> all_idx = detail::all_indices(task);
    const std::string hash = config_hash(cfg);

    std::filesystem::create_directories(run.dir / "metrics");
    for (const MetricPlanItem& item : plan) {
        const std::string name = metric_name(item.kind, item.group);
        for (const Anchor& anchor : item.anchors) {
            for (const auto& [label, epoch] : resolve_anchor(anchor, run.log, run.checkpoints)) {
                const std::filesystem::path out =
                    run.dir / "metrics" / (name + "_" + label + ".json");
                if (reuse_existing && std::filesystem::exists(out)) {
                    continue; // records are deterministic, so reuse is exact
                }
                if (progress) {
                    std::fprintf(progress, "metric %s\n", out.string().c_str());
                    std::fflush(progress);
                }
                const ModelParams params = load_checkpoint(checkpoint_path(run.dir, epoch));
                const nlohmann::json payload = metric_payload(item, params, cfg, task,
                                                              split.test, all_idx, epoch);
                const nlohmann::json record =
                    metric_record(name, hash, epoch, cfg.master_seed, payload);
                write_text_file(out, record.dump(2) + "\n");
            }
        }
    }
}

// Loads a persisted metric record; the error names the absent file.
inline nlohmann::json read_metric_record(const std::filesystem::path& run_dir,
                                         std::string_view metric, std::string_view label) {
    const std::filesystem::path path =
        run_dir / "metrics" / (std::string(metric) + "_" + std::string(label) + ".json");
    if (!std::filesystem::exists(path)) {
        fail(ErrorCode::Io, "missing metric record " + path.string());
    }
    return nlohmann::json::parse(read_text_file(path));
}

// Post-grok clauses describe the settled network, and peak dropout instability
// is expected near t_test itself, so they read the latest stored record past
// the crossing: "final" when the plan records one, else the crossing-adjacent
// "post_grok" record.
inline nlohmann::json read_post_grok_record(const std::filesystem::path& run_dir,
                                            std::string_view metric) {
    const std::filesystem::path final_path =
        run_dir / "metrics" / (std::string(metric) + "_final.json");
    if (std::filesystem::exists(final_path)) {
        return nlohmann::json::parse(read_text_file(final_path));
    }
    return read_metric_record(run_dir, metric, "post_grok");
}

// All persisted records of one metric, ordered by checkpoint epoch.
inline std::vector<nlohmann::json> read_metric_series(const std::filesystem::path& run_dir,
                                                      std::string_view metric) {
    std::vector<std::filesystem::path> files;
    const std::filesystem::path dir = run_dir / "metrics";
    if (std::filesystem::exists(dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            const std::string stem = entry.path().filename().string();
            if (stem.rfind(std::string(metric) + "_epoch_", 0) == 0) {
                files.push_back(entry.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<nlohmann::json> records;
    records.reserve(files.size());
    for (const auto& f : files) {
        records.push_back(nlohmann::json::parse(read_text_file(f)));
    }
    return records;
}

// Every persisted record of one metric regardless of label, ordered by label.
inline std::vector<std::pair<std::string, nlohmann::json>> read_metric_records(
    const std::filesystem::path& run_dir, std::string_view metric) {
    const std::filesystem::path dir = run_dir / "metrics";
    const std::string prefix = std::string(metric) + "_";
    const std::string suffix = ".json";
    std::vector<std::pair<std::string, std::filesystem::path>> files;
    if (std::filesystem::exists(dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size() + suffix.size() &&
                name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
                files.emplace_back(
                    name.substr(prefix.size(), name.size() - prefix.size() - suffix.size()),
                    entry.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, nlohmann::json>> records;
    records.reserve(files.size());
    for (const auto& [label, path] : files) {
        records.emplace_back(label, nlohmann::json::parse(read_text_file(path)));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Medians and sweep tables
// ---------------------------------------------------------------------------

namespace detail {

// Median over seeds; absent values rank as +infinity, and an absent median
// reports "no grok within budget". Even counts take the lower middle so the
// result is always an observed epoch.
inline std::optional<int> median_epoch(std::vector<std::optional<int>> values) {
    std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) {
        if (a && b) {
            return *a < *b;
        }
        return a.has_value() && !b.has_value();
    });
    const std::optional<int> mid = values[(values.size() - 1) / 2];
    return mid;
}

inline double median_value(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) {
        return values[n / 2];
    }
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace detail

struct SweepRow {
    std::string label;
    double value = 0.0;
    std::optional<int> t_train;
    std::optional<int> t_test;
    std::optional<int> delay;
    double final_test_acc = 0.0;
};

struct SweepTable {
    std::string axis;
    std::vector<SweepRow> rows;
};

inline std::string sweep_table_to_csv(const SweepTable& table) {
    std::string out = "axis,label,value,t_train,t_test,delay,final_test_acc\n";
    const auto cell = [](const std::optional<int>& v) {
        return v ? std::to_string(*v) : std::string("no-grok");
    };
    for (const SweepRow& r : table.rows) {
        out += table.axis + "," + r.label + "," + csv::format_double(r.value) + "," +
               cell(r.t_train) + "," + cell(r.t_test) + "," + cell(r.delay) + "," +
               csv::format_double(r.final_test_acc) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Preset manifest
// ---------------------------------------------------------------------------

struct PresetManifest {
    std::string name;
    std::string axis;
    struct Cell {
        std::string label;
        double value = 0.0;
        struct Run {
            std::uint64_t seed = 0;
            std::string dir; // relative to the manifest unless absolute
        };
        std::vector<Run> runs;
    };
    std::vector<Cell> cells;
};

inline nlohmann::json to_json(const PresetManifest& m) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : m.cells) {
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& r : c.runs) {
            runs.push_back({{"seed", r.seed}, {"dir", r.dir}});
        }
        cells.push_back({{"label", c.label}, {"value", c.value}, {"runs", std::move(runs)}});
    }
    return {{"preset", m.name}, {"axis", m.axis}, {"cells", std::move(cells)}};
}

inline PresetManifest manifest_from_json(const nlohmann::json& j) {
    PresetManifest m;
    m.name = j.at("preset").get<std::string>();
    m.axis = j.value("axis", std::string());
    for (const auto& c : j.at("cells")) {
        PresetManifest::Cell cell;
        cell.label = c.at("label").get<std::string>();
        cell.value = c.at("value").get<double>();
        for (const auto& r : c.at("runs")) {
            cell.runs.push_back({r.at("seed").get<std::uint64_t>(),
                                 r.at("dir").get<std::string>()});
        }
        m.cells.push_back(std::move(cell));
    }
    return m;
}

inline PresetManifest load_manifest(const std::filesystem::path& out_dir) {
    const std::filesystem::path path = out_dir / "preset.json";
    if (!std::filesystem::exists(path)) {
        fail(ErrorCode::Io, "render: missing " + path.string());
    }
    return manifest_from_json(nlohmann::json::parse(read_text_file(path)));
}

inline std::filesystem::path manifest_run_dir(const std::filesystem::path& out_dir,
                                              const PresetManifest::Cell::Run& run) {
    const std::filesystem::path p(run.dir);
    return p.is_absolute() ? p : out_dir / p;
}

// ---------------------------------------------------------------------------
// Derived run statistics
// ---------------------------------------------------------------------------

// Mean of the banding energy over fresh, untrained embeddings: what a
// structureless similarity matrix scores. Trained energies are judged
// against this floor.
inline double null_energy_baseline(const ModelDims& dims, int seed_count = 100) {
    const InitSpec init;
    double sum = 0.0;
    for (int s = 1; s <= seed_count; ++s) {
        const ModelParams params = init_params(dims, init, static_cast<std::uint64_t>(s));
        sum += codiagonal_energy(cosine_similarity_matrix(params.embedding)).max_energy();
    }
    return sum / static_cast<double>(seed_count);
}

// Inactive-fraction trajectory over the run's checkpoints; prefers persisted
// sparsity records and falls back to recomputing from the checkpoints.
inline std::vector<std::pair<int, SparsityReport>> sparsity_trajectory(const LoadedRun& run) {
    std::vector<std::pair<int, SparsityReport>> out;
    for (const nlohmann::json& rec : read_metric_series(run.dir, "sparsity")) {
        SparsityReport rep;
        rep.dead_fraction = rec.at("payload").at("dead_fraction").get<double>();
        rep.mean_inactive_fraction = rec.at("payload").at("mean_inactive_fraction").get<double>();
        out.emplace_back(rec.at("epoch").get<int>(), rep);
    }
    if (!out.empty()) {
        return out;
    }
    const ModTask task = generate(run.config.dims.vocab);
    const std::vector<std::uint32_t> all_idx = detail::all_indices(task);
    for (int e : run.checkpoints) {
        const ModelParams params = load_checkpoint(checkpoint_path(run.dir, e));
        out.emplace_back(e, sparsity(params, run.config.variant, task, all_idx));
    }
    return out;
}

// Epoch of the lowest mean inactive fraction (first one on ties).
inline int sparsity_min_epoch(std::span<const std::pair<int, SparsityReport>> traj) {
    int best_epoch = traj.front().first;
    double best = traj.front().second.mean_inactive_fraction;
    for (const auto& [epoch, rep] : traj) {
        if (rep.mean_inactive_fraction < best) {
            best = rep.mean_inactive_fraction;
            best_epoch = epoch;
        }
    }
    return best_epoch;
}

namespace detail {

inline std::vector<LoadedRun> cell_runs(const std::filesystem::path& out_dir,
                                        const PresetManifest& manifest,
                                        std::string_view label) {
    for (const auto& cell : manifest.cells) {
        if (cell.label == label) {
            std::vector<LoadedRun> runs;
            for (const auto& r : cell.runs) {
                runs.push_back(load_run(manifest_run_dir(out_dir, r)));
            }
            return runs;
        }
    }
    fail(ErrorCode::InvalidSpec,
         "preset '" + manifest.name + "' has no cell '" + std::string(label) + "'");
}

inline bool majority(int passed, int total) { return 2 * passed > total; }

inline double max_test_acc(std::span<const EpochRecord> log) {
    double best = 0.0;
    for (const EpochRecord& r : log) {
        best = std::max(best, r.test_acc);
    }
    return best;
}

inline double max_train_acc(std::span<const EpochRecord> log) {
    double best = 0.0;
    for (const EpochRecord& r : log) {
        best = std::max(best, r.train_acc);
    }
    return best;
}

inline Histogram record_histogram(const nlohmann::json& record) {
    return histogram_from_json(record.at("payload").at("histogram"));
}

// Left edge of the lowest occupied bin: the histogram's support minimum.
inline double support_lo(const Histogram& h) {
    for (int i = 0; i < h.bins(); ++i) {
        if (h.counts[static_cast<std::size_t>(i)] > 0) {
            return h.lo + static_cast<double>(i) * h.bin_width();
        }
    }
    return h.hi;
}

inline double drc_accuracy_at(const nlohmann::json& record, double rate) {
    for (const auto& p : record.at("payload").at("points")) {
        if (std::fabs(p.at("rate").get<double>() - rate) < 1e-9) {
            return p.at("mean_accuracy").get<double>();
        }
    }
    fail(ErrorCode::InvalidSpec,
         "drc record lacks rate " + std::to_string(rate));
}

} // namespace detail

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Median grokking statistics for every cell of a sweep preset.
inline SweepTable sweep_table_from(const std::filesystem::path& out_dir,
                                   const PresetManifest& manifest) {
    SweepTable table;
    table.axis = manifest.axis.empty() ? "cell" : manifest.axis;
    for (const auto& cell : manifest.cells) {
        std::vector<std::optional<int>> t_trains, t_tests, delays;
        std::vector<double> finals;
        for (const auto& r : cell.runs) {
            const LoadedRun run = load_run(manifest_run_dir(out_dir, r));
            const GrokkingTimes times = grokking_times(run.log);
            t_trains.push_back(times.t_train);
            t_tests.push_back(times.t_test);
            delays.push_back(times.delay());
            finals.push_back(run.log.back().test_acc);
        }
        SweepRow row;
        row.label = cell.label;
        row.value = cell.value;
        row.t_train = detail::median_epoch(std::move(t_trains));
        row.t_test = detail::median_epoch(std::move(t_tests));
        row.delay = detail::median_epoch(std::move(delays));
        row.final_test_acc = detail::median_value(std::move(finals));
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Preset checks
// ---------------------------------------------------------------------------
// Each check restates one claim the preset's figure makes, evaluated over the
// persisted artifacts only. Boolean claims pass by seed majority; ordering
// claims compare per-cell medians.

namespace checks {

inline CheckResult runs_complete(const std::filesystem::path& out_dir,
                                 const PresetManifest& manifest) {
    int total = 0;
    for (const auto& cell : manifest.cells) {
        for (const auto& r : cell.runs) {
            const LoadedRun run = load_run(manifest_run_dir(out_dir, r));
            if (run.log.size() != static_cast<std::size_t>(run.config.epochs) + 1) {
                return {"runs-complete", false,
                        "incomplete log in " + run.dir.string()};
            }
            ++total;
        }
    }
    return {"runs-complete", true, std::to_string(total) + " runs complete"};
}

inline CheckResult variance_spike(const std::filesystem::path& out_dir,
                                  const PresetManifest& manifest, std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const GrokkingTimes times = grokking_times(run.log);
        const std::vector<nlohmann::json> series = read_metric_series(run.dir, "mc_dropout");
        if (!times.t_train || !times.t_test || series.empty()) {
            detail += " seed" + std::to_string(run.config.master_seed) + ":no-grok";
            continue;
        }
        int peak_epoch = -1;
        double peak = -1.0, final_var = 0.0;
        for (const nlohmann::json& rec : series) {
            const double var = rec.at("payload").at("variance").get<double>();
            if (var > peak) {
                peak = var;
                peak_epoch = rec.at("epoch").get<int>();
            }
            final_var = var; // series is epoch-ordered
        }
        const double hi = static_cast<double>(*times.t_test) * 1.1;
        const bool ok = peak_epoch > *times.t_train && static_cast<double>(peak_epoch) < hi &&
                        final_var < 0.1 * peak;
        passed += ok ? 1 : 0;
        char buf[160];
        std::snprintf(buf, sizeof(buf), " seed%llu:peak@%d in (%d,%.0f) final %.2e vs peak %.2e",
                      static_cast<unsigned long long>(run.config.master_seed), peak_epoch,
                      *times.t_train, hi, final_var, peak);
        detail += buf;
    }
    return {"variance-spike", detail::majority(passed, total), detail};
}

inline CheckResult drc_ordering(const std::filesystem::path& out_dir,
                                const PresetManifest& manifest, std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const nlohmann::json pre = read_metric_record(run.dir, "drc", "pre_rise");
        const nlohmann::json post = read_post_grok_record(run.dir, "drc");
        double pre_max = 0.0;
        for (const auto& p : pre.at("payload").at("points")) {
            pre_max = std::max(pre_max, p.at("mean_accuracy").get<double>());
        }
        const double a0 = detail::drc_accuracy_at(post, 0.0);
        const double a2 = detail::drc_accuracy_at(post, 0.2);
        const double a7 = detail::drc_accuracy_at(post, 0.7);
        const bool ok = pre_max <= 0.1 && a2 >= 0.9 * a0 && a7 <= 0.7 * a0;
        passed += ok ? 1 : 0;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      " seed%llu:pre_max %.3f post@%d a0 %.3f a0.2 %.3f a0.7 %.3f",
                      static_cast<unsigned long long>(run.config.master_seed), pre_max,
                      post.at("epoch").get<int>(), a0, a2, a7);
        detail += buf;
    }
    return {"drc-ordering", detail::majority(passed, total), detail};
}

inline CheckResult cosine_structure(const std::filesystem::path& out_dir,
                                    const PresetManifest& manifest, std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    double null_energy = 0.0;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        if (total == 0) {
            null_energy = null_energy_baseline(run.config.dims);
        }
        ++total;
        const auto energy_of = [](const nlohmann::json& rec) {
            return rec.at("payload").at("energy").at("max_energy").get<double>();
        };
        const double e_init = energy_of(read_metric_record(run.dir, "cosine", "init"));
        const double e_rise = energy_of(read_metric_record(run.dir, "cosine", "pre_rise"));
        const double e_post = energy_of(read_post_grok_record(run.dir, "cosine"));
        const bool ok = e_init < 0.05 && e_rise > e_init && e_post > e_rise &&
                        e_post >= 5.0 * null_energy;
        passed += ok ? 1 : 0;
        char buf[160];
        std::snprintf(buf, sizeof(buf), " seed%llu:init %.4f rise %.4f post %.4f null %.4f",
                      static_cast<unsigned long long>(run.config.master_seed), e_init, e_rise,
                      e_post, null_energy);
        detail += buf;
    }
    return {"cosine-structure", detail::majority(passed, total), detail};
}

inline CheckResult bimodal_embeddings(const std::filesystem::path& out_dir,
                                      const PresetManifest& manifest, std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const nlohmann::json rec = read_post_grok_record(run.dir, "hist_embedding");
        const Histogram hist = detail::record_histogram(rec);
        const std::optional<PeakPair> peaks = detect_bimodality(hist);
        const int epoch = rec.at("epoch").get<int>();
        bool ok = false;
        char buf[160];
        if (peaks) {
            ok = std::fabs(-0.4 - peaks->lower) <= 0.15 && std::fabs(0.4 - peaks->upper) <= 0.15 &&
                 std::fabs(peaks->lower + peaks->upper) <= 0.1;
            std::snprintf(buf, sizeof(buf), " seed%llu:peaks %.3f/%.3f @%d",
                          static_cast<unsigned long long>(run.config.master_seed), peaks->lower,
                          peaks->upper, epoch);
        } else {
            std::snprintf(buf, sizeof(buf), " seed%llu:unimodal @%d",
                          static_cast<unsigned long long>(run.config.master_seed), epoch);
        }
        passed += ok ? 1 : 0;
        detail += buf;
    }
    return {"bimodal-embeddings", detail::majority(passed, total), detail};
}

inline CheckResult sparsity_shape(const std::filesystem::path& out_dir,
                                  const PresetManifest& manifest, std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const auto traj = sparsity_trajectory(run);
        const GrokkingTimes times = grokking_times(run.log);
        const double v0 = traj.front().second.mean_inactive_fraction;
        const double v_final = traj.back().second.mean_inactive_fraction;
        const int min_epoch = sparsity_min_epoch(traj);
        double v_min = v0, v_at_train = v_final;
        for (const auto& [epoch, rep] : traj) {
            v_min = std::min(v_min, rep.mean_inactive_fraction);
        }
        if (times.t_train) {
            for (const auto& [epoch, rep] : traj) {
                if (epoch >= *times.t_train) {
                    v_at_train = rep.mean_inactive_fraction;
                    break;
                }
            }
        }
        const bool ok = times.t_train && times.t_test && v_min < v0 &&
                        min_epoch < *times.t_test && v_final > v_at_train;
        passed += ok ? 1 : 0;
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      " seed%llu:init %.4f min %.4f@%d final %.4f at-t_train %.4f",
                      static_cast<unsigned long long>(run.config.master_seed), v0, v_min,
                      min_epoch, v_final, v_at_train);
        detail += buf;
    }
    return {"sparsity-shape", detail::majority(passed, total), detail};
}

inline CheckResult sparsity_decay_order(const std::filesystem::path& out_dir,
                                        const PresetManifest& manifest) {
    std::vector<std::pair<double, int>> medians; // (decay value, median min epoch)
    std::string detail;
    for (const auto& cell : manifest.cells) {
        std::vector<std::optional<int>> mins;
        for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, cell.label)) {
            mins.push_back(sparsity_min_epoch(sparsity_trajectory(run)));
        }
        const std::optional<int> median = detail::median_epoch(std::move(mins));
        medians.emplace_back(cell.value, median.value_or(-1));
        detail += " " + cell.label + ":min@" + std::to_string(median.value_or(-1));
    }
    std::sort(medians.begin(), medians.end());
    bool ok = true;
    for (std::size_t i = 1; i < medians.size(); ++i) {
        ok = ok && medians[i].second < medians[i - 1].second;
    }
    return {"sparsity-decay-order", ok, detail};
}

inline CheckResult alpha_delay_order(const std::filesystem::path& out_dir,
                                     const PresetManifest& manifest) {
    const SweepTable table = sweep_table_from(out_dir, manifest);
    bool ok = true;
    std::optional<int> prev;
    std::string detail;
    for (const SweepRow& row : table.rows) {
        detail += " " + row.label + ":delay " +
                  (row.delay ? std::to_string(*row.delay) : std::string("no-grok"));
        if (!row.delay || (prev && *row.delay <= *prev)) {
            ok = false;
        }
        prev = row.delay;
    }
    return {"alpha-delay-order", ok, detail};
}

inline CheckResult distribution_widening(const std::filesystem::path& out_dir,
                                         const PresetManifest& manifest,
                                         std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const double before = run.log.front().emb_std;
        const double after = run.log.back().emb_std;
        passed += after > before ? 1 : 0;
        char buf[120];
        std::snprintf(buf, sizeof(buf), " seed%llu:std %.4f->%.4f",
                      static_cast<unsigned long long>(run.config.master_seed), before, after);
        detail += buf;
    }
    return {"distribution-widens", detail::majority(passed, total), detail};
}

// Shifted-positive starts must drift to near-zero mean before the training
// accuracy takes off, and still grok within budget.
inline CheckResult mean_shift_before_rise(const std::filesystem::path& out_dir,
                                          const PresetManifest& manifest,
                                          std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const GrokkingTimes times = grokking_times(run.log);
        std::optional<int> t_half;
        for (const EpochRecord& r : run.log) {
            if (r.train_acc > 0.5) {
                t_half = r.epoch;
                break;
            }
        }
        double min_abs_mean = 1e300;
        if (t_half) {
            for (const EpochRecord& r : run.log) {
                if (r.epoch > *t_half) {
                    break;
                }
                min_abs_mean = std::min(min_abs_mean, std::fabs(r.emb_mean));
            }
        }
        const bool ok = times.t_test && t_half && min_abs_mean < 0.05;
        passed += ok ? 1 : 0;
        char buf[160];
        std::snprintf(buf, sizeof(buf), " seed%llu:|mean|min %.4f t_half %d t_test %d",
                      static_cast<unsigned long long>(run.config.master_seed), min_abs_mean,
                      t_half.value_or(-1), times.t_test.value_or(-1));
        detail += buf;
    }
    return {"mean-shift-before-rise", detail::majority(passed, total), detail};
}

inline CheckResult no_grok_within_budget(const std::filesystem::path& out_dir,
                                         const PresetManifest& manifest,
                                         std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const GrokkingTimes times = grokking_times(run.log);
        passed += times.t_test ? 0 : 1;
        detail += " seed" + std::to_string(run.config.master_seed) +
                  (times.t_test ? ":grokked@" + std::to_string(*times.t_test) : ":no-grok");
    }
    return {"no-grok-within-budget", detail::majority(passed, total), detail};
}

inline CheckResult shift_delay_order(const std::filesystem::path& out_dir,
                                     const PresetManifest& manifest) {
    const SweepTable table = sweep_table_from(out_dir, manifest);
    std::string detail;
    std::vector<std::optional<int>> t_tests;
    for (const SweepRow& row : table.rows) {
        t_tests.push_back(row.t_test);
        detail += " " + row.label + ":t_test " +
                  (row.t_test ? std::to_string(*row.t_test) : std::string("no-grok"));
    }
    bool ok = t_tests.size() == 3;
    for (const auto& t : t_tests) {
        ok = ok && t.has_value();
    }
    if (ok) {
        ok = *t_tests[0] < *t_tests[1] && *t_tests[1] < *t_tests[2];
    }
    return {"shift-delay-order", ok, detail};
}

inline CheckResult frozen_suppression(const std::filesystem::path& out_dir,
                                      const PresetManifest& manifest, std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    double null_energy = 0.0;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        if (total == 0) {
            null_energy = null_energy_baseline(run.config.dims);
        }
        ++total;
        const double acc = detail::max_test_acc(run.log);
        const double energy = read_metric_record(run.dir, "cosine", "final")
                                  .at("payload")
                                  .at("energy")
                                  .at("max_energy")
                                  .get<double>();
        const Histogram hist =
            detail::record_histogram(read_metric_record(run.dir, "hist_embedding", "final"));
        const bool unimodal = !top_two_peaks(hist).has_value();
        const bool ok = acc < 0.5 && energy < 2.0 * null_energy && unimodal;
        passed += ok ? 1 : 0;
        char buf[160];
        std::snprintf(buf, sizeof(buf), " seed%llu:max_test %.3f energy %.4f (null %.4f) %s",
                      static_cast<unsigned long long>(run.config.master_seed), acc, energy,
                      null_energy, unimodal ? "unimodal" : "bimodal");
        detail += buf;
    }
    return {"frozen-suppression", detail::majority(passed, total), detail};
}

// The three ReLU-after-embedding claims: support pushed non-negative, peak
// separation preserved against the baseline, grokking delayed past it.
inline std::vector<CheckResult> relu_embedding(const std::filesystem::path& out_dir,
                                               const PresetManifest& manifest) {
    std::vector<double> base_seps, relu_seps;
    std::vector<std::optional<int>> base_t, relu_t;
    int support_pass = 0, support_total = 0;
    std::string support_detail, sep_detail, delay_detail;

    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, "baseline")) {
        const Histogram hist =
            detail::record_histogram(read_metric_record(run.dir, "hist_embedding", "final"));
        if (const auto peaks = top_two_peaks(hist)) {
            base_seps.push_back(peaks->separation());
        }
        base_t.push_back(grokking_times(run.log).t_test);
    }
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, "relu")) {
        const Histogram hist =
            detail::record_histogram(read_metric_record(run.dir, "hist_embedding", "final"));
        ++support_total;
        const double lo = detail::support_lo(hist);
        const bool support_ok = lo >= -0.02;
        support_pass += support_ok ? 1 : 0;
        char buf[120];
        std::snprintf(buf, sizeof(buf), " seed%llu:support_lo %.4f",
                      static_cast<unsigned long long>(run.config.master_seed), lo);
        support_detail += buf;
        if (const auto peaks = top_two_peaks(hist)) {
            relu_seps.push_back(peaks->separation());
        }
        relu_t.push_back(grokking_times(run.log).t_test);
    }

    std::vector<CheckResult> results;
    results.push_back(
        {"relu-support-nonnegative", detail::majority(support_pass, support_total),
         support_detail});

    bool sep_ok = false;
    if (!base_seps.empty() && relu_seps.size() == static_cast<std::size_t>(support_total)) {
        const double base = detail::median_value(base_seps);
        const double relu = detail::median_value(relu_seps);
        sep_ok = std::fabs(relu - base) <= 0.2 * base;
        char buf[120];
        std::snprintf(buf, sizeof(buf), "separation %.4f vs baseline %.4f", relu, base);
        sep_detail = buf;
    } else {
        sep_detail = "peaks missing in baseline or relu histograms";
    }
    results.push_back({"relu-separation-preserved", sep_ok, sep_detail});

    const std::optional<int> base_med = detail::median_epoch(std::move(base_t));
    const std::optional<int> relu_med = detail::median_epoch(std::move(relu_t));
    const bool delayed = base_med && relu_med && *relu_med > *base_med;
    delay_detail = "t_test baseline " +
                   (base_med ? std::to_string(*base_med) : std::string("no-grok")) + " relu " +
                   (relu_med ? std::to_string(*relu_med) : std::string("no-grok"));
    results.push_back({"relu-grokking-delayed", delayed, delay_detail});
    return results;
}

inline CheckResult constant_embedding_learns(const std::filesystem::path& out_dir,
                                             const PresetManifest& manifest,
                                             std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const GrokkingTimes times = grokking_times(run.log);
        passed += times.t_train ? 1 : 0;
        detail += " seed" + std::to_string(run.config.master_seed) + ":t_train " +
                  (times.t_train ? std::to_string(*times.t_train) : std::string("never"));
    }
    return {"constant-embedding-learns", detail::majority(passed, total), detail};
}

inline CheckResult constant_weights_blocked(const std::filesystem::path& out_dir,
                                            const PresetManifest& manifest,
                                            std::string_view label) {
    int passed = 0, total = 0;
    std::string detail;
    for (const LoadedRun& run : detail::cell_runs(out_dir, manifest, label)) {
        ++total;
        const double acc = detail::max_train_acc(run.log);
        passed += acc <= 0.2 ? 1 : 0;
        char buf[80];
        std::snprintf(buf, sizeof(buf), " seed%llu:max_train %.3f",
                      static_cast<unsigned long long>(run.config.master_seed), acc);
        detail += buf;
    }
    return {"constant-weights-blocked", detail::majority(passed, total), detail};
}

} // namespace checks

// Evaluates every claim attached to the named preset from persisted artifacts.
inline std::vector<CheckResult> eval_preset_checks(const std::filesystem::path& out_dir) {
    const PresetManifest manifest = load_manifest(out_dir);
    std::vector<CheckResult> results;
    if (manifest.name == "smoke") {
        results.push_back(checks::runs_complete(out_dir, manifest));
    } else if (manifest.name == "fig1") {
        results.push_back(checks::variance_spike(out_dir, manifest, "default"));
    } else if (manifest.name == "fig2") {
        results.push_back(checks::drc_ordering(out_dir, manifest, "default"));
    } else if (manifest.name == "fig3") {
        results.push_back(checks::cosine_structure(out_dir, manifest, "default"));
    } else if (manifest.name == "fig4") {
        results.push_back(checks::bimodal_embeddings(out_dir, manifest, "default"));
    } else if (manifest.name == "fig5") {
        results.push_back(checks::alpha_delay_order(out_dir, manifest));
    } else if (manifest.name == "fig6") {
        results.push_back(checks::distribution_widening(out_dir, manifest, "default"));
    } else if (manifest.name == "fig7") {
        results.push_back(checks::mean_shift_before_rise(out_dir, manifest, "uniform_04_08"));
    } else if (manifest.name == "fig9") {
        results.push_back(checks::mean_shift_before_rise(out_dir, manifest, "case1_04_08"));
        results.push_back(checks::no_grok_within_budget(out_dir, manifest, "case3_16_20"));
    } else if (manifest.name == "fig10") {
        results.push_back(checks::shift_delay_order(out_dir, manifest));
    } else if (manifest.name == "fig11") {
        results.push_back(checks::sparsity_shape(out_dir, manifest, "wd_1.0"));
        results.push_back(checks::sparsity_decay_order(out_dir, manifest));
    } else if (manifest.name == "frozen-embedding") {
        results.push_back(checks::frozen_suppression(out_dir, manifest, "frozen"));
    } else if (manifest.name == "relu-embedding") {
        for (CheckResult& r : checks::relu_embedding(out_dir, manifest)) {
            results.push_back(std::move(r));
        }
    } else if (manifest.name == "constant-init") {
        results.push_back(checks::constant_embedding_learns(out_dir, manifest,
                                                            "constant_embedding"));
        results.push_back(
            checks::constant_weights_blocked(out_dir, manifest, "constant_weights"));
    }
    return results;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace detail {

inline svg::Series epoch_series(std::string label, std::span<const EpochRecord> log,
                           double EpochRecord::*field) {
    svg::Series s;
    s.label = std::move(label);
    s.xs.reserve(log.size());
    s.ys.reserve(log.size());
    for (const EpochRecord& r : log) {
        s.xs.push_back(static_cast<double>(r.epoch));
        s.ys.push_back(r.*field);
    }
    return s;
}

} // namespace detail

// Renders every report artifact for a preset directory from its persisted
// runs and metric records. Pure over the files on disk, so rendering twice
// yields byte-identical output. Plots are emitted only when the preset
// produced metric records or sweeps an axis; otherwise the report holds the
// tables alone.
inline void render(const std::filesystem::path& out_dir) {
    const PresetManifest manifest = load_manifest(out_dir);
    const std::filesystem::path report = out_dir / "report";
    std::filesystem::remove_all(report);
    std::filesystem::create_directories(report);

    struct RunRef {
        std::string tag;
        LoadedRun loaded;
    };
    std::vector<RunRef> runs;
    for (const auto& cell : manifest.cells) {
        for (const auto& r : cell.runs) {
            runs.push_back({cell.label + "_s" + std::to_string(r.seed),
                            load_run(manifest_run_dir(out_dir, r))});
        }
    }

    const auto fmt_epoch = [](std::optional<int> e) {
        return e ? std::to_string(*e) : std::string("no-grok");
    };
    std::string times = "cell,seed,t_train,t_test,delay,final_test_acc\n";
    {
        std::size_t i = 0;
        for (const auto& cell : manifest.cells) {
            for (const auto& r : cell.runs) {
                const GrokkingTimes t = grokking_times(runs[i].loaded.log);
                times += cell.label + "," + std::to_string(r.seed) + "," +
                         fmt_epoch(t.t_train) + "," + fmt_epoch(t.t_test) + "," +
                         fmt_epoch(t.delay()) + "," +
                         csv::format_double(runs[i].loaded.log.back().test_acc) + "\n";
                ++i;
            }
        }
    }
    write_text_file(report / "times.csv", times);

    const bool is_sweep = !manifest.axis.empty();
    if (is_sweep) {
        write_text_file(report / "sweep.csv",
                        sweep_table_to_csv(sweep_table_from(out_dir, manifest)));
    }

    bool have_metrics = false;
    for (const RunRef& ref : runs) {
        const std::filesystem::path mdir = ref.loaded.dir / "metrics";
        have_metrics = have_metrics ||
                       (std::filesystem::exists(mdir) && !std::filesystem::is_empty(mdir));
    }

    if (have_metrics || is_sweep) {
        for (const RunRef& ref : runs) {
            const std::vector<EpochRecord>& log = ref.loaded.log;
            {
                svg::LineChartSpec spec;
                spec.title = manifest.name + " accuracy " + ref.tag;
                spec.x_label = "epoch";
                spec.y_label = "accuracy";
                spec.series = {detail::epoch_series("train", log, &EpochRecord::train_acc),
                               detail::epoch_series("test", log, &EpochRecord::test_acc)};
                write_text_file(report / ("accuracy_" + ref.tag + ".svg"), svg::line_chart(spec));
            }
            {
                svg::LineChartSpec spec;
                spec.title = manifest.name + " weight stats " + ref.tag;
                spec.x_label = "epoch";
                spec.y_label = "value";
                spec.series = {detail::epoch_series("emb_mean", log, &EpochRecord::emb_mean),
                               detail::epoch_series("emb_std", log, &EpochRecord::emb_std),
                               detail::epoch_series("w1_mean", log, &EpochRecord::w1_mean),
                               detail::epoch_series("w1_std", log, &EpochRecord::w1_std),
                               detail::epoch_series("w2_mean", log, &EpochRecord::w2_mean),
                               detail::epoch_series("w2_std", log, &EpochRecord::w2_std)};
                write_text_file(report / ("stats_" + ref.tag + ".svg"), svg::line_chart(spec));
            }

            const std::vector<nlohmann::json> mc = read_metric_series(ref.loaded.dir,
                                                                      "mc_dropout");
            if (!mc.empty()) {
                svg::Series var;
                var.label = "variance";
                for (const nlohmann::json& rec : mc) {
                    var.xs.push_back(rec.at("epoch").get<double>());
                    var.ys.push_back(rec.at("payload").at("variance").get<double>());
                }
                svg::LineChartSpec spec;
                spec.title = manifest.name + " mc-dropout variance " + ref.tag;
                spec.x_label = "epoch";
                spec.y_label = "accuracy variance";
                spec.series = {std::move(var)};
                write_text_file(report / ("mc_variance_" + ref.tag + ".svg"), svg::line_chart(spec));
            }

            const auto drc = read_metric_records(ref.loaded.dir, "drc");
            if (!drc.empty()) {
                svg::LineChartSpec spec;
                spec.title = manifest.name + " dropout robustness " + ref.tag;
                spec.x_label = "dropout rate";
                spec.y_label = "test accuracy";
                for (const auto& [label, rec] : drc) {
                    svg::Series s;
                    s.label = label + " (epoch " +
                              std::to_string(rec.at("epoch").get<int>()) + ")";
                    for (const auto& p : rec.at("payload").at("points")) {
                        s.xs.push_back(p.at("rate").get<double>());
                        s.ys.push_back(p.at("mean_accuracy").get<double>());
                    }
                    spec.series.push_back(std::move(s));
                }
                write_text_file(report / ("drc_" + ref.tag + ".svg"), svg::line_chart(spec));
            }

            for (const auto& [label, rec] : read_metric_records(ref.loaded.dir, "cosine")) {
                const Matrix m = matrix_from_json(rec.at("payload").at("matrix"));
                write_text_file(report / ("cosine_" + ref.tag + "_" + label + ".svg"),
                                svg::heatmap(m, manifest.name + " cosine " + ref.tag + " " + label));
            }

            for (const std::string metric : {"hist_embedding", "hist_w1", "hist_w2"}) {
                for (const auto& [label, rec] : read_metric_records(ref.loaded.dir, metric)) {
                    const Histogram h =
                        histogram_from_json(rec.at("payload").at("histogram"));
                    write_text_file(
                        report / (metric + "_" + ref.tag + "_" + label + ".svg"),
                        svg::histogram_chart(h, manifest.name + " " + metric + " " + ref.tag + " " +
                                               label));
                }
            }

            const std::vector<nlohmann::json> sp = read_metric_series(ref.loaded.dir,
                                                                      "sparsity");
            if (!sp.empty()) {
                svg::Series dead, inactive;
                dead.label = "dead";
                inactive.label = "mean_inactive";
                for (const nlohmann::json& rec : sp) {
                    const double epoch = rec.at("epoch").get<double>();
                    dead.xs.push_back(epoch);
                    dead.ys.push_back(rec.at("payload").at("dead_fraction").get<double>());
                    inactive.xs.push_back(epoch);
                    inactive.ys.push_back(
                        rec.at("payload").at("mean_inactive_fraction").get<double>());
                }
                svg::LineChartSpec spec;
                spec.title = manifest.name + " sparsity " + ref.tag;
                spec.x_label = "epoch";
                spec.y_label = "fraction";
                spec.series = {std::move(dead), std::move(inactive)};
                write_text_file(report / ("sparsity_" + ref.tag + ".svg"), svg::line_chart(spec));
            }
        }

        if (is_sweep) {
            const SweepTable table = sweep_table_from(out_dir, manifest);
            svg::Series delay, t_test;
            delay.label = "delay";
            t_test.label = "t_test";
            for (const SweepRow& row : table.rows) {
                if (row.delay) {
                    delay.xs.push_back(row.value);
                    delay.ys.push_back(static_cast<double>(*row.delay));
                }
                if (row.t_test) {
                    t_test.xs.push_back(row.value);
                    t_test.ys.push_back(static_cast<double>(*row.t_test));
                }
            }
            if (!delay.xs.empty()) {
                svg::LineChartSpec spec;
                spec.title = manifest.name + " grokking delay vs " + table.axis;
                spec.x_label = table.axis;
                spec.y_label = "epochs";
                spec.series = {std::move(delay)};
                write_text_file(report / "sweep_delay.svg", svg::line_chart(spec));
            }
            if (!t_test.xs.empty()) {
                svg::LineChartSpec spec;
                spec.title = manifest.name + " t_test vs " + table.axis;
                spec.x_label = table.axis;
                spec.y_label = "epochs";
                spec.series = {std::move(t_test)};
                write_text_file(report / "sweep_t_test.svg", svg::line_chart(spec));
            }
        }
    }

    std::string summary;
    const std::vector<CheckResult> results = eval_preset_checks(out_dir);
    if (results.empty()) {
        summary = "no checks defined\n";
    } else {
        for (const CheckResult& r : results) {
            summary += std::string(r.pass ? "PASS " : "FAIL ") + r.name + ":" + r.detail + "\n";
        }
    }
    write_text_file(report / "summary.txt", summary);
}

// ---------------------------------------------------------------------------
// Preset execution
// ---------------------------------------------------------------------------

struct RunPresetOptions {
    std::filesystem::path runs_root;  // empty: runs live under <out_dir>/runs
    bool reuse_existing = true;
    bool check = false;
    std::uint64_t base_seed = 1;
    std::FILE* progress = nullptr;
};

struct PresetOutcome {
    PresetManifest manifest;
    std::vector<CheckResult> checks;
    bool checks_passed = true;
};

// Trains (or reuses) every cell/seed of the preset, computes its metric plan,
// writes the manifest, and renders the report. Re-running over an existing
// directory reproduces the same artifacts.
inline PresetOutcome run_preset(const ExperimentPreset& preset,
                                const std::filesystem::path& out_dir,
                                const RunPresetOptions& opts = {}) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path store = opts.runs_root.empty() ? out_dir / "runs"
                                                               : opts.runs_root;
    const bool store_inside = opts.runs_root.empty();

    PresetManifest manifest;
    manifest.name = preset.name;
    manifest.axis = preset.sweep_axis;
    for (const PresetCell& cell : preset.cells) {
        PresetManifest::Cell mcell;
        mcell.label = cell.label;
        mcell.value = cell.value;
        for (int s = 0; s < preset.seed_count; ++s) {
            TrainConfig cfg = cell.config;
            cfg.master_seed = opts.base_seed + static_cast<std::uint64_t>(s);
            if (opts.progress) {
                std::fprintf(opts.progress, "cell %s seed %llu\n", cell.label.c_str(),
                             static_cast<unsigned long long>(cfg.master_seed));
                std::fflush(opts.progress);
            }
            const std::filesystem::path dir =
                ensure_run(cfg, store, opts.reuse_existing, opts.progress);
            const LoadedRun run = load_run(dir);
            compute_metric_records(run, preset.plan, opts.reuse_existing, opts.progress);
            PresetManifest::Cell::Run entry;
            entry.seed = cfg.master_seed;
            entry.dir = store_inside
                            ? (std::filesystem::path("runs") / dir.filename()).generic_string()
                            : std::filesystem::absolute(dir).lexically_normal().generic_string();
            mcell.runs.push_back(std::move(entry));
        }
        manifest.cells.push_back(std::move(mcell));
    }
    write_text_file(out_dir / "preset.json", to_json(manifest).dump(2) + "\n");
    render(out_dir);

    PresetOutcome outcome;
    outcome.manifest = std::move(manifest);
    if (opts.check) {
        outcome.checks = eval_preset_checks(out_dir);
        for (const CheckResult& r : outcome.checks) {
            outcome.checks_passed = outcome.checks_passed && r.pass;
        }
    }
    return outcome;
}

} // namespace groklab
