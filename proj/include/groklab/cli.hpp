#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "groklab/presets.hpp"

namespace groklab {

// Exit codes: 0 success, 1 usage or I/O failure, 2 numerical failure during
// training or evaluation, 3 a preset ran fine but its --check claims failed.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitCheckFailed = 3;

namespace cli_detail {

inline DropoutSpec::Placement parse_placement(const std::string& name) {
    if (name == "hidden") {
        return DropoutSpec::Placement::Hidden;
    }
    if (name == "hidden-embedding") {
        return DropoutSpec::Placement::HiddenAndEmbedding;
    }
    fail(ErrorCode::InvalidArgument,
         "unknown placement '" + name + "'; expected hidden or hidden-embedding");
}

struct TrainArgs {
    std::string config_file;
    std::string out = "run";
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> split_fraction;
    std::optional<double> lr;
    std::optional<double> weight_decay;
    std::optional<double> beta1;
    std::optional<double> beta2;
    std::optional<double> eps;
    std::optional<double> alpha;
    std::optional<int> vocab;
    std::optional<int> embed_dim;
    std::optional<int> hidden;
    std::optional<int> checkpoint_every;
    bool freeze_embedding = false;
    bool freeze_non_embedding = false;
    bool relu_after_embedding = false;
    std::optional<double> train_dropout;
    std::string dropout_placement = "hidden";
};

inline TrainConfig build_train_config(const TrainArgs& args) {
    TrainConfig cfg = args.config_file.empty()
                          ? TrainConfig{}
                          : load_config(std::filesystem::path(args.config_file));
    if (args.seed) cfg.master_seed = *args.seed;
    if (args.epochs) cfg.epochs = *args.epochs;
    if (args.batch_size) cfg.batch_size = *args.batch_size;
    if (args.split_fraction) cfg.split_fraction = *args.split_fraction;
    if (args.lr) cfg.opt.lr = *args.lr;
    if (args.weight_decay) cfg.opt.weight_decay = *args.weight_decay;
    if (args.beta1) cfg.opt.beta1 = *args.beta1;
    if (args.beta2) cfg.opt.beta2 = *args.beta2;
    if (args.eps) cfg.opt.eps = *args.eps;
    if (args.alpha) {
        cfg.init.embedding = GroupInit::xavier(*args.alpha);
        cfg.init.layer1 = GroupInit::xavier(*args.alpha);
        cfg.init.layer2 = GroupInit::xavier(*args.alpha);
    }
    if (args.vocab) cfg.dims.vocab = *args.vocab;
    if (args.embed_dim) cfg.dims.embed_dim = *args.embed_dim;
    if (args.hidden) cfg.dims.hidden = *args.hidden;
    if (args.checkpoint_every) cfg.checkpoint_every = *args.checkpoint_every;
    if (args.freeze_embedding) cfg.variant.freeze_embedding = true;
    if (args.freeze_non_embedding) cfg.variant.freeze_non_embedding = true;
    if (args.relu_after_embedding) cfg.variant.relu_after_embedding = true;
    if (args.train_dropout) {
        DropoutSpec spec;
        spec.rate = *args.train_dropout;
        spec.placement = parse_placement(args.dropout_placement);
        cfg.train_dropout = spec;
    }
    return cfg;
}

inline int cmd_train(const TrainArgs& args) {
    const TrainConfig cfg = build_train_config(args);
    const std::filesystem::path out(args.out);
    std::fprintf(stderr, "train  %s (seed %llu, %d epochs)\n", out.string().c_str(),
                 static_cast<unsigned long long>(cfg.master_seed), cfg.epochs);
    const RunArtifacts run = train(cfg, out);
    const GrokkingTimes times = grokking_times(run.log);
    const EpochRecord& last = run.log.back();
    std::printf("wrote %s\n", out.string().c_str());
    std::printf("final train_acc %.4f test_acc %.4f\n", last.train_acc, last.test_acc);
    std::printf("t_train %s t_test %s delay %s\n",
                times.t_train ? std::to_string(*times.t_train).c_str() : "no-grok",
                times.t_test ? std::to_string(*times.t_test).c_str() : "no-grok",
                times.delay() ? std::to_string(*times.delay()).c_str() : "no-grok");
    return kExitOk;
}

struct MetricArgs {
    std::string run_dir;
    int epoch = -1; // -1 selects the last checkpoint
    std::string out;
    double rate = 0.3;
    int passes = 100;
    std::uint64_t mc_seed = 0;
    std::string placement = "hidden";
    std::string group = "embedding";
    int bins = 101;
};

inline int cmd_metric(const std::string& which, const MetricArgs& args) {
    const std::filesystem::path dir(args.run_dir);
    const TrainConfig cfg = load_config(dir / "config.json");
    const std::vector<int> checkpoints = cfg.resolved_checkpoints();
    const int epoch = args.epoch < 0 ? checkpoints.back() : args.epoch;
    const ModelParams params = load_checkpoint(checkpoint_path(dir, epoch));

    const ModTask task = generate(cfg.dims.vocab);
    RngStream split_rng(cfg.master_seed, "split");
    const Split split = make_split(task, cfg.split_fraction, split_rng);
    const std::vector<std::uint32_t> all_idx = detail::all_indices(task);

    nlohmann::json payload;
    std::string name = which;
    if (which == "mc-dropout") {
        name = "mc_dropout";
        MCDropoutConfig mc;
        mc.rate = args.rate;
        mc.passes = args.passes;
        mc.seed = args.mc_seed;
        mc.placement = parse_placement(args.placement);
        payload = to_json(mc_dropout_stats(params, cfg.variant, task, split.test, mc));
    } else if (which == "drc") {
        const std::vector<double> rates = default_drc_rates();
        DRCCurve curve = dropout_robustness_curve(params, cfg.variant, task, split.test, rates,
                                                  args.passes, args.mc_seed,
                                                  parse_placement(args.placement));
        curve.checkpoint_epoch = epoch;
        payload = to_json(curve);
    } else if (which == "cosine") {
        const Matrix sim = cosine_similarity_matrix(params.embedding);
        payload = nlohmann::json{{"matrix", to_json(sim)},
                                 {"energy", to_json(codiagonal_energy(sim))}};
    } else if (which == "hist") {
        ParamGroup group = ParamGroup::Embedding;
        if (args.group == "w1") {
            group = ParamGroup::W1;
        } else if (args.group == "w2") {
            group = ParamGroup::W2;
        } else if (args.group != "embedding") {
            fail(ErrorCode::InvalidArgument,
                 "unknown group '" + args.group + "'; expected embedding, w1 or w2");
        }
        name = metric_name(MetricKind::Hist, group);
        payload = to_json(distribution_stats(detail::group_values(params, group), args.bins));
    } else if (which == "sparsity") {
        payload = to_json(sparsity(params, cfg.variant, task, all_idx));
    }

    const nlohmann::json record =
        metric_record(name, config_hash(cfg), epoch, cfg.master_seed, payload);
    const std::string text = record.dump(2) + "\n";
    if (args.out.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        write_text_file(std::filesystem::path(args.out), text);
        std::printf("wrote %s\n", args.out.c_str());
    }
    return kExitOk;
}

struct SweepArgs {
    std::string axis;
    std::vector<std::string> values;
    std::string out;
    int seeds = 3;
    std::uint64_t base_seed = 1;
    std::optional<int> epochs;
    bool fresh = false;
    bool quiet = false;
};

// Canonical sweep points reuse the preset budgets so their runs are shared
// with the matching figure presets; other values fall back to the default
// budget unless --epochs overrides.
inline int sweep_epochs(const SweepArgs& args, const std::string& axis, double value) {
    if (args.epochs) {
        return *args.epochs;
    }
    if (axis == "alpha") {
        if (value == 3.0) return budgets::kAlpha3;
        if (value == 5.0) return budgets::kAlpha5;
        if (value == 7.0) return budgets::kAlpha7;
    }
    if (axis == "weight_decay") {
        if (value == 0.3) return budgets::kDecayLow;
        if (value == 3.0) return budgets::kDecayHigh;
    }
    return budgets::kDefault;
}

inline ExperimentPreset build_sweep_preset(const SweepArgs& args) {
    if (args.values.size() < 2) {
        fail(ErrorCode::InvalidArgument, "sweep needs at least 2 values");
    }
    ExperimentPreset preset;
    preset.seed_count = args.seeds;
    if (args.axis == "alpha") {
        preset.name = "sweep_alpha";
        preset.sweep_axis = "alpha";
        for (const std::string& v : args.values) {
            const double a = std::stod(v);
            const int epochs = sweep_epochs(args, "alpha", a);
            preset.cells.push_back({"alpha_" + v, a,
                                    a == 1.0 ? default_run_config()
                                             : detail::with_alpha(a, epochs)});
            preset.cells.back().config.epochs = epochs;
        }
    } else if (args.axis == "weight-decay") {
        preset.name = "sweep_weight_decay";
        preset.sweep_axis = "weight_decay";
        for (const std::string& v : args.values) {
            const double wd = std::stod(v);
            const int epochs = sweep_epochs(args, "weight_decay", wd);
            preset.cells.push_back({"wd_" + v, wd,
                                    wd == 1.0 ? default_run_config()
                                              : detail::with_decay(wd, epochs)});
            preset.cells.back().config.epochs = epochs;
        }
    } else if (args.axis == "interval") {
        preset.name = "sweep_interval";
        preset.sweep_axis = "interval";
        for (const std::string& v : args.values) {
            const std::size_t colon = v.find(':');
            if (colon == std::string::npos) {
                fail(ErrorCode::InvalidArgument,
                     "interval value '" + v + "' must look like lo:hi");
            }
            const double lo = std::stod(v.substr(0, colon));
            const double hi = std::stod(v.substr(colon + 1));
            const int epochs = args.epochs ? *args.epochs : budgets::kUniformFast;
            preset.cells.push_back({"u_" + v, lo, detail::with_uniform(lo, hi, epochs)});
        }
    } else if (args.axis == "layer-shift") {
        preset.name = "sweep_layer_shift";
        preset.sweep_axis = "layer_shift";
        double index = 0.0;
        for (const std::string& v : args.values) {
            if (v == "none") {
                preset.cells.push_back({"shift_none", index, default_run_config()});
            } else if (v == "embedding") {
                preset.cells.push_back(
                    {"shift_embedding", index,
                     detail::with_shift(true, false,
                                        args.epochs ? *args.epochs
                                                    : budgets::kShiftEmbedding)});
            } else if (v == "weights") {
                preset.cells.push_back(
                    {"shift_weights", index,
                     detail::with_shift(false, true,
                                        args.epochs ? *args.epochs
                                                    : budgets::kShiftWeights)});
            } else {
                fail(ErrorCode::InvalidArgument,
                     "unknown layer-shift value '" + v +
                         "'; expected none, embedding or weights");
            }
            if (args.epochs) {
                preset.cells.back().config.epochs = *args.epochs;
            }
            index += 1.0;
        }
    } else {
        fail(ErrorCode::InvalidArgument,
             "unknown sweep axis '" + args.axis +
                 "'; expected alpha, weight-decay, interval or layer-shift");
    }
    return preset;
}

inline int cmd_sweep(const SweepArgs& args) {
    const ExperimentPreset preset = build_sweep_preset(args);
    RunPresetOptions opts;
    opts.reuse_existing = !args.fresh;
    opts.base_seed = args.base_seed;
    opts.progress = args.quiet ? nullptr : stderr;
    run_preset(preset, std::filesystem::path(args.out), opts);
    const std::string table = read_text_file(std::filesystem::path(args.out) / "report" /
                                             "sweep.csv");
    std::fputs(table.c_str(), stdout);
    return kExitOk;
}

struct PresetArgs {
    std::string name;
    std::string out;
    std::string runs_root;
    bool check = false;
    bool fresh = false;
    bool quiet = false;
    std::optional<int> seeds;
    std::uint64_t base_seed = 1;
};

inline int cmd_preset(const PresetArgs& args) {
    ExperimentPreset preset = find_preset(args.name);
    if (args.seeds) {
        preset.seed_count = *args.seeds;
    }
    RunPresetOptions opts;
    if (!args.runs_root.empty()) {
        opts.runs_root = args.runs_root;
    }
    opts.reuse_existing = !args.fresh;
    opts.check = args.check;
    opts.base_seed = args.base_seed;
    opts.progress = args.quiet ? nullptr : stderr;
    const std::filesystem::path out = args.out.empty() ? std::filesystem::path(args.name)
                                                       : std::filesystem::path(args.out);
    const PresetOutcome outcome = run_preset(preset, out, opts);
    std::printf("wrote %s\n", out.string().c_str());
    if (args.check) {
        for (const CheckResult& r : outcome.checks) {
            std::printf("%s %s:%s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                        r.detail.c_str());
        }
        if (!outcome.checks_passed) {
            return kExitCheckFailed;
        }
    }
    return kExitOk;
}

} // namespace cli_detail

inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"grokking laboratory for modular addition"};
    app.require_subcommand(1);

    cli_detail::TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train one run and persist artifacts");
    train_cmd->add_option("--config", train_args.config_file, "JSON config file")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_args.out, "output directory");
    train_cmd->add_option("--seed", train_args.seed, "master seed");
    train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
    train_cmd->add_option("--batch-size", train_args.batch_size, "0 = full batch");
    train_cmd->add_option("--split-fraction", train_args.split_fraction, "train fraction");
    train_cmd->add_option("--lr", train_args.lr, "learning rate");
    train_cmd->add_option("--weight-decay", train_args.weight_decay, "decoupled decay");
    train_cmd->add_option("--beta1", train_args.beta1, "Adam beta1");
    train_cmd->add_option("--beta2", train_args.beta2, "Adam beta2");
    train_cmd->add_option("--eps", train_args.eps, "Adam epsilon");
    train_cmd->add_option("--alpha", train_args.alpha, "Xavier scale factor for all groups");
    train_cmd->add_option("--vocab", train_args.vocab, "modulus P");
    train_cmd->add_option("--embed-dim", train_args.embed_dim, "embedding width d");
    train_cmd->add_option("--hidden", train_args.hidden, "hidden width H");
    train_cmd->add_option("--checkpoint-every", train_args.checkpoint_every,
                          "periodic checkpoint stride (0 disables)");
    train_cmd->add_flag("--freeze-embedding", train_args.freeze_embedding,
                        "freeze the embedding at init");
    train_cmd->add_flag("--freeze-non-embedding", train_args.freeze_non_embedding,
                        "freeze everything but the embedding");
    train_cmd->add_flag("--relu-after-embedding", train_args.relu_after_embedding,
                        "apply ReLU to embeddings");
    train_cmd->add_option("--train-dropout", train_args.train_dropout,
                          "dropout rate during training");
    train_cmd->add_option("--dropout-placement", train_args.dropout_placement,
                          "hidden or hidden-embedding");

    cli_detail::MetricArgs metric_args;
    CLI::App* metric_cmd =
        app.add_subcommand("metric", "compute one metric record from a persisted run");
    metric_cmd->require_subcommand(1);
    std::vector<CLI::App*> metric_subs;
    for (const std::string name : {"mc-dropout", "drc", "cosine", "hist", "sparsity"}) {
        CLI::App* sub = metric_cmd->add_subcommand(name, name + " record");
        sub->add_option("--run", metric_args.run_dir, "run directory")->required();
        sub->add_option("--epoch", metric_args.epoch, "checkpoint epoch (-1 = last)");
        sub->add_option("--out", metric_args.out, "output file (default stdout)");
        if (name == "mc-dropout" || name == "drc") {
            sub->add_option("--passes", metric_args.passes, "stochastic passes");
            sub->add_option("--mc-seed,--seed", metric_args.mc_seed, "mask stream seed");
            sub->add_option("--placement", metric_args.placement,
                            "hidden or hidden-embedding");
        }
        if (name == "mc-dropout") {
            sub->add_option("--rate", metric_args.rate, "dropout rate");
        }
        if (name == "hist") {
            sub->add_option("--group", metric_args.group, "embedding, w1 or w2");
            sub->add_option("--bins", metric_args.bins, "histogram bins");
        }
        metric_subs.push_back(sub);
    }

    cli_detail::SweepArgs sweep_args;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a named sweep and print its table");
    sweep_cmd->add_option("--axis", sweep_args.axis,
                          "alpha, weight-decay, interval or layer-shift")
        ->required();
    sweep_cmd->add_option("--values", sweep_args.values, "comma-separated sweep values")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--out", sweep_args.out, "output directory")->required();
    sweep_cmd->add_option("--seeds", sweep_args.seeds, "seeds per cell");
    sweep_cmd->add_option("--seed", sweep_args.base_seed, "base master seed");
    sweep_cmd->add_option("--epochs", sweep_args.epochs, "override the per-cell budget");
    sweep_cmd->add_flag("--fresh", sweep_args.fresh, "retrain even if runs exist");
    sweep_cmd->add_flag("--quiet", sweep_args.quiet, "suppress progress output");

    cli_detail::PresetArgs preset_args;
    CLI::App* preset_cmd = app.add_subcommand("preset", "run a named experiment preset");
    preset_cmd->add_option("name", preset_args.name, "preset name")->required();
    preset_cmd->add_option("--out", preset_args.out, "output directory (default: ./<name>)");
    preset_cmd->add_option("--runs-root", preset_args.runs_root,
                           "shared run store (default: <out>/runs)");
    preset_cmd->add_flag("--check", preset_args.check, "evaluate the preset's claims");
    preset_cmd->add_flag("--fresh", preset_args.fresh, "retrain even if runs exist");
    preset_cmd->add_flag("--quiet", preset_args.quiet, "suppress progress output");
    preset_cmd->add_option("--seeds", preset_args.seeds, "override seeds per cell");
    preset_cmd->add_option("--seed", preset_args.base_seed, "base master seed");

    std::string render_dir = ".";
    CLI::App* render_cmd =
        app.add_subcommand("render", "regenerate the report of a preset directory");
    render_cmd->add_option("--out", render_dir, "preset directory holding preset.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) {
            return cli_detail::cmd_train(train_args);
        }
        if (metric_cmd->parsed()) {
            for (CLI::App* sub : metric_subs) {
                if (sub->parsed()) {
                    return cli_detail::cmd_metric(sub->get_name(), metric_args);
                }
            }
        }
        if (sweep_cmd->parsed()) {
            return cli_detail::cmd_sweep(sweep_args);
        }
        if (preset_cmd->parsed()) {
            return cli_detail::cmd_preset(preset_args);
        }
        if (render_cmd->parsed()) {
            render(std::filesystem::path(render_dir));
            std::printf("wrote %s\n",
                        (std::filesystem::path(render_dir) / "report").string().c_str());
            return kExitOk;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code() == ErrorCode::NonFinite ? kExitNumerical : kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace groklab
