#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "groklab/cli.hpp"
#include "groklab/presets.hpp"

using namespace groklab;

namespace {

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("groklab_presets_" + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

// Synthetic log with train crossing 0.99 at t_train and test crossing 0.95
// at t_test; accuracies ramp linearly before each crossing.
std::vector<EpochRecord> synthetic_log(int epochs, int t_train, int t_test) {
    std::vector<EpochRecord> log;
    for (int e = 0; e <= epochs; ++e) {
        EpochRecord r;
        r.epoch = e;
        r.train_acc = e >= t_train ? 1.0 : 0.9 * e / t_train;
        r.test_acc = t_test >= 0 && e >= t_test ? 1.0 : 0.02;
        log.push_back(r);
    }
    return log;
}

TrainConfig tiny_config(int epochs, std::uint64_t seed = 1) {
    TrainConfig cfg;
    cfg.dims = ModelDims{13, 8, 16};
    cfg.epochs = epochs;
    cfg.master_seed = seed;
    cfg.checkpoint_epochs = {0};
    cfg.checkpoint_every = 40;
    return cfg;
}

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            files[std::filesystem::relative(entry.path(), dir).generic_string()] =
                read_text_file(entry.path());
        }
    }
    return files;
}

int run_cli(std::initializer_list<const char*> args) {
    std::vector<const char*> argv = {"groklab"};
    argv.insert(argv.end(), args.begin(), args.end());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("preset table is well formed", "[presets]") {
    const std::vector<ExperimentPreset> table = preset_table();
    REQUIRE(table.size() == 14);

    std::set<std::string> names;
    for (const ExperimentPreset& p : table) {
        CAPTURE(p.name);
        REQUIRE(names.insert(p.name).second); // unique names
        REQUIRE(!p.cells.empty());
        REQUIRE(p.seed_count >= 1);
        std::set<std::string> labels;
        std::set<double> values;
        for (const PresetCell& cell : p.cells) {
            REQUIRE(labels.insert(cell.label).second);
            REQUIRE(cell.config.epochs > 0);
            REQUIRE(std::isfinite(cell.value));
            if (!p.sweep_axis.empty()) {
                REQUIRE(values.insert(cell.value).second); // distinct sweep values
            }
        }
        if (!p.sweep_axis.empty()) {
            REQUIRE(p.cells.size() >= 2);
        }
        // every preset must resolve through the lookup
        REQUIRE(find_preset(p.name).name == p.name);
    }

    REQUIRE_THROWS_AS(find_preset("figure-zero"), Error);
    try {
        find_preset("figure-zero");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::UnknownPreset);
        REQUIRE(std::string(e.what()).find("available:") != std::string::npos);
        REQUIRE(std::string(e.what()).find("fig5") != std::string::npos);
    }
}

TEST_CASE("figure presets pin the calibrated configurations", "[presets]") {
    const ExperimentPreset fig5 = find_preset("fig5");
    REQUIRE(fig5.sweep_axis == "alpha");
    REQUIRE(fig5.cells.size() == 4);
    REQUIRE(fig5.cells[0].config.init.layer1.alpha == 1.0);
    REQUIRE(fig5.cells[3].config.init.layer1.alpha == 7.0);
    // the alpha=1 cell is the shared default run
    REQUIRE(config_hash(fig5.cells[0].config) == config_hash(default_run_config()));

    const ExperimentPreset fig11 = find_preset("fig11");
    REQUIRE(fig11.cells.size() == 3);
    REQUIRE(fig11.cells[0].config.opt.weight_decay == 0.3);
    REQUIRE(config_hash(fig11.cells[1].config) == config_hash(default_run_config()));
    REQUIRE(fig11.cells[2].config.opt.weight_decay == 3.0);

    // fig7's single cell is fig9's case1, so the run is trained once
    const ExperimentPreset fig7 = find_preset("fig7");
    const ExperimentPreset fig9 = find_preset("fig9");
    REQUIRE(config_hash(fig7.cells[0].config) == config_hash(fig9.cells[1].config));

    const ExperimentPreset frozen = find_preset("frozen-embedding");
    REQUIRE(frozen.cells[0].config.variant.freeze_embedding);
    REQUIRE(frozen.cells[0].config.epochs == default_run_config().epochs);

    const ExperimentPreset relu = find_preset("relu-embedding");
    REQUIRE(config_hash(relu.cells[0].config) == config_hash(default_run_config()));
    REQUIRE(relu.cells[1].config.variant.relu_after_embedding);
}

TEST_CASE("anchors resolve against the run's own grokking times", "[presets]") {
    const std::vector<int> ckpts = {0, 250, 500, 750, 1000, 1250, 1500, 1750, 2000};
    const auto log = synthetic_log(2000, 300, 1500);

    auto one = [&](const Anchor& a) { return resolve_anchor(a, log, ckpts).at(0); };

    REQUIRE(one(Anchor::init()) == std::pair<std::string, int>{"init", 0});
    REQUIRE(one(Anchor::final()) == std::pair<std::string, int>{"final", 2000});
    // t_train = 300 -> first checkpoint at or after it
    REQUIRE(one(Anchor::pre_rise()) == std::pair<std::string, int>{"pre_rise", 500});
    // midpoint of (300, 1500) = 900 -> 1000
    REQUIRE(one(Anchor::mid_rise()) == std::pair<std::string, int>{"mid_rise", 1000});
    REQUIRE(one(Anchor::post_grok()) == std::pair<std::string, int>{"post_grok", 1500});
    REQUIRE(one(Anchor::at(600)) == std::pair<std::string, int>{"epoch_000600", 750});
    // beyond the last checkpoint clamps to it
    REQUIRE(one(Anchor::at(99999)).second == 2000);

    const auto all = resolve_anchor(Anchor::all(), log, ckpts);
    REQUIRE(all.size() == ckpts.size());
    REQUIRE(all.front().first == "epoch_000000");
    REQUIRE(all.back() == std::pair<std::string, int>{"epoch_002000", 2000});

    // no grokking: pre_rise falls back to a quarter of the run
    const auto flat = synthetic_log(2000, 4000, -1);
    REQUIRE(resolve_anchor(Anchor::pre_rise(), flat, ckpts).at(0).second == 500);
    REQUIRE(resolve_anchor(Anchor::post_grok(), flat, ckpts).at(0).second == 2000);
}

TEST_CASE("smoke preset produces tables only and reruns identically", "[presets]") {
    const TempDir tmp("smoke");
    const ExperimentPreset smoke = find_preset("smoke");
    RunPresetOptions opts;
    opts.check = true;

    const PresetOutcome first = run_preset(smoke, tmp.path, opts);
    REQUIRE(first.checks.size() == 1);
    REQUIRE(first.checks[0].name == "runs-complete");
    REQUIRE(first.checks[0].pass);
    REQUIRE(first.checks_passed);

    REQUIRE(std::filesystem::exists(tmp.path / "preset.json"));
    REQUIRE(std::filesystem::exists(tmp.path / "report" / "times.csv"));
    REQUIRE(std::filesystem::exists(tmp.path / "report" / "summary.txt"));

    // empty metric plan and no sweep axis: no plots at all
    for (const auto& entry : std::filesystem::directory_iterator(tmp.path / "report")) {
        REQUIRE(entry.path().extension() != ".svg");
    }
    const std::string times = read_text_file(tmp.path / "report" / "times.csv");
    REQUIRE(times.rfind("cell,seed,t_train,t_test,delay,final_test_acc\n", 0) == 0);
    REQUIRE(read_text_file(tmp.path / "report" / "summary.txt").rfind("PASS", 0) == 0);

    const auto before = snapshot(tmp.path);
    run_preset(smoke, tmp.path, opts); // reuses the trained run
    REQUIRE(snapshot(tmp.path) == before);

    RunPresetOptions fresh = opts;
    fresh.reuse_existing = false;
    run_preset(smoke, tmp.path, fresh); // retrains from scratch
    REQUIRE(snapshot(tmp.path) == before);
}

TEST_CASE("a sweep preset with a metric plan renders records and plots", "[presets]") {
    const TempDir tmp("sweeptiny");
    ExperimentPreset p;
    p.name = "tiny-sweep";
    p.sweep_axis = "alpha";
    p.seed_count = 1;
    TrainConfig a1 = tiny_config(120);
    TrainConfig a3 = tiny_config(120);
    a3.init.embedding = GroupInit::xavier(3.0);
    a3.init.layer1 = GroupInit::xavier(3.0);
    a3.init.layer2 = GroupInit::xavier(3.0);
    p.cells.push_back({"alpha_1", 1.0, a1});
    p.cells.push_back({"alpha_3", 3.0, a3});
    p.plan.push_back({MetricKind::McDropout, {Anchor::all()}});
    p.plan.push_back({MetricKind::Drc, {Anchor::final()}});
    p.plan.push_back({MetricKind::Cosine, {Anchor::init(), Anchor::final()}});
    p.plan.push_back({MetricKind::Hist, {Anchor::final()}, ParamGroup::W1});
    p.plan.push_back({MetricKind::Sparsity, {Anchor::all()}});

    run_preset(p, tmp.path);

    const PresetManifest manifest = load_manifest(tmp.path);
    REQUIRE(manifest.name == "tiny-sweep");
    REQUIRE(manifest.cells.size() == 2);
    const std::filesystem::path run0 =
        manifest_run_dir(tmp.path, manifest.cells[0].runs[0]);

    // records: 4 mc_dropout checkpoints (0, 40, 80, 120), 1 drc, 2 cosine,
    // 1 w1 histogram, 4 sparsity
    REQUIRE(read_metric_series(run0, "mc_dropout").size() == 4);
    REQUIRE(read_metric_series(run0, "sparsity").size() == 4);
    REQUIRE(read_metric_records(run0, "cosine").size() == 2);
    REQUIRE(read_metric_records(run0, "hist_w1").size() == 1);
    const nlohmann::json drc = read_metric_record(run0, "drc", "final");
    REQUIRE(drc.at("metric") == "drc");
    REQUIRE(drc.at("epoch") == 120);
    REQUIRE(drc.at("config_hash") == config_hash(a1));
    REQUIRE(drc.at("payload").at("points").size() == 10);

    const std::filesystem::path report = tmp.path / "report";
    REQUIRE(std::filesystem::exists(report / "sweep.csv"));
    REQUIRE(std::filesystem::exists(report / "accuracy_alpha_1_s1.svg"));
    REQUIRE(std::filesystem::exists(report / "stats_alpha_3_s1.svg"));
    REQUIRE(std::filesystem::exists(report / "mc_variance_alpha_1_s1.svg"));
    REQUIRE(std::filesystem::exists(report / "drc_alpha_1_s1.svg"));
    REQUIRE(std::filesystem::exists(report / "cosine_alpha_1_s1_final.svg"));
    REQUIRE(std::filesystem::exists(report / "hist_w1_alpha_1_s1_final.svg"));
    REQUIRE(std::filesystem::exists(report / "sparsity_alpha_1_s1.svg"));

    // 120 epochs cannot grok a 13-token task: the table says so instead of failing
    const std::string sweep = read_text_file(report / "sweep.csv");
    REQUIRE(sweep.rfind("axis,label,value,t_train,t_test,delay,final_test_acc\n", 0) == 0);
    REQUIRE(sweep.find("no-grok") != std::string::npos);
    REQUIRE(!std::filesystem::exists(report / "sweep_delay.svg"));

    // re-render from persisted artifacts only, byte for byte
    const auto before = snapshot(report);
    render(tmp.path);
    REQUIRE(snapshot(report) == before);
}

TEST_CASE("render names whichever input is missing", "[presets]") {
    const TempDir tmp("missing");
    REQUIRE_THROWS_WITH(render(tmp.path),
                        Catch::Matchers::ContainsSubstring("preset.json"));

    ExperimentPreset p;
    p.name = "tiny";
    p.seed_count = 1;
    p.cells.push_back({"only", 0.0, tiny_config(40)});
    run_preset(p, tmp.path);

    const PresetManifest manifest = load_manifest(tmp.path);
    const std::filesystem::path run0 =
        manifest_run_dir(tmp.path, manifest.cells[0].runs[0]);
    std::filesystem::remove(run0 / "ckpt_000040.bin");
    REQUIRE_THROWS_WITH(render(tmp.path),
                        Catch::Matchers::ContainsSubstring("ckpt_000040.bin"));

    std::filesystem::remove(run0 / "log.csv");
    REQUIRE_THROWS_WITH(render(tmp.path), Catch::Matchers::ContainsSubstring("log.csv"));
}

TEST_CASE("missing metric records fail with the record path", "[presets]") {
    const TempDir tmp("norecord");
    REQUIRE_THROWS_WITH(read_metric_record(tmp.path, "cosine", "final"),
                        Catch::Matchers::ContainsSubstring("cosine_final.json"));
    REQUIRE(read_metric_series(tmp.path, "mc_dropout").empty());
    REQUIRE(read_metric_records(tmp.path, "hist_embedding").empty());
}

TEST_CASE("sweep medians tolerate a missing seed", "[presets]") {
    SweepTable table;
    table.axis = "alpha";
    SweepRow row;
    row.label = "alpha_1";
    row.value = 1.0;
    row.t_train = 10;
    row.t_test = std::nullopt;
    row.delay = std::nullopt;
    row.final_test_acc = 0.25;
    table.rows.push_back(row);
    const std::string csv = sweep_table_to_csv(table);
    REQUIRE(csv ==
            "axis,label,value,t_train,t_test,delay,final_test_acc\n"
            "alpha,alpha_1,1,10,no-grok,no-grok,0.25\n");
}

TEST_CASE("cli drives presets, metrics, and renders", "[presets]") {
    const TempDir tmp("cli");
    const std::string out = (tmp.path / "smoke").string();

    REQUIRE(run_cli({"preset", "no-such-preset", "--quiet"}) == kExitUsage);
    REQUIRE(run_cli({"definitely-not-a-command"}) == kExitUsage);
    REQUIRE(run_cli({"sweep", "--axis", "alpha", "--values", "1", "--out", out.c_str()}) ==
            kExitUsage); // needs at least two values

    REQUIRE(run_cli({"preset", "smoke", "--out", out.c_str(), "--check", "--quiet"}) ==
            kExitOk);
    REQUIRE(std::filesystem::exists(tmp.path / "smoke" / "report" / "times.csv"));

    REQUIRE(run_cli({"render", "--out", out.c_str()}) == kExitOk);
    REQUIRE(run_cli({"render", "--out", (tmp.path / "empty").string().c_str()}) ==
            kExitUsage);

    // metric record straight from the persisted smoke run
    const PresetManifest manifest = load_manifest(tmp.path / "smoke");
    const std::string run_dir =
        manifest_run_dir(tmp.path / "smoke", manifest.cells[0].runs[0]).string();
    const std::string record_file = (tmp.path / "cosine.json").string();
    REQUIRE(run_cli({"metric", "cosine", "--run", run_dir.c_str(), "--out",
                     record_file.c_str()}) == kExitOk);
    const nlohmann::json record = nlohmann::json::parse(read_text_file(record_file));
    REQUIRE(record.at("metric") == "cosine");
    REQUIRE(record.at("epoch") == 200);
    REQUIRE(record.at("payload").at("energy").contains("max_energy"));

    const std::string train_out = (tmp.path / "cli_train").string();
    REQUIRE(run_cli({"train", "--vocab", "13", "--embed-dim", "8", "--hidden", "16",
                     "--epochs", "3", "--checkpoint-every", "0", "--out",
                     train_out.c_str()}) == kExitOk);
    const auto log = epoch_log_from_csv(
        read_text_file(std::filesystem::path(train_out) / "log.csv"));
    REQUIRE(log.size() == 4);
}
