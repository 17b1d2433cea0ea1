#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <vector>

#include "groklab/trainer.hpp"

using namespace groklab;
using Catch::Matchers::WithinAbs;

namespace {

TrainConfig tiny_cfg() {
    TrainConfig cfg;
    cfg.dims = ModelDims{7, 8, 16};
    cfg.epochs = 30;
    cfg.checkpoint_epochs = {0, 10};
    cfg.checkpoint_every = 15;
    cfg.opt.lr = 0.01;
    cfg.opt.weight_decay = 0.01;
    cfg.master_seed = 5;
    return cfg;
}

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("groklab_test_" + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("epoch log csv header is pinned", "[trainer]") {
    REQUIRE(kEpochCsvHeader ==
            "epoch,train_loss,train_acc,test_acc,emb_mean,emb_std,w1_mean,w1_std,"
            "w2_mean,w2_std,dead_frac");
}

TEST_CASE("epoch log csv round-trips exactly", "[trainer]") {
    std::vector<EpochRecord> log(3);
    log[0].epoch = 0;
    log[0].train_loss = std::log(53.0);
    log[0].train_acc = 1.0 / 3.0;
    log[0].emb_std = 0.1;
    log[1].epoch = 1;
    log[1].train_loss = 1e-17;
    log[1].w1_mean = -0.007654321;
    log[1].dead_frac = 0.25;
    log[2].epoch = 2;
    log[2].test_acc = 0.9999999999999999;
    log[2].w2_std = 6.25e-2;

    const std::string text = epoch_log_to_csv(log);
    REQUIRE(text.substr(0, kEpochCsvHeader.size()) == kEpochCsvHeader);
    const std::vector<EpochRecord> back = epoch_log_from_csv(text);
    REQUIRE(back.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
        REQUIRE(back[i].epoch == log[i].epoch);
        REQUIRE(back[i].train_loss == log[i].train_loss);
        REQUIRE(back[i].train_acc == log[i].train_acc);
        REQUIRE(back[i].test_acc == log[i].test_acc);
        REQUIRE(back[i].emb_std == log[i].emb_std);
        REQUIRE(back[i].w1_mean == log[i].w1_mean);
        REQUIRE(back[i].w2_std == log[i].w2_std);
        REQUIRE(back[i].dead_frac == log[i].dead_frac);
    }
    // serializing the parsed log reproduces the bytes
    REQUIRE(epoch_log_to_csv(back) == text);
}

TEST_CASE("epoch log csv rejects malformed input", "[trainer]") {
    REQUIRE_THROWS_AS(epoch_log_from_csv("nonsense\n1,2,3\n"), Error);
    const std::string bad_row = std::string(kEpochCsvHeader) + "\n1,2,3\n";
    REQUIRE_THROWS_AS(epoch_log_from_csv(bad_row), Error);
}

TEST_CASE("checkpoint schedule merges explicit list and periodic grid", "[trainer]") {
    TrainConfig cfg = tiny_cfg();
    REQUIRE(cfg.resolved_checkpoints() == std::vector<int>{0, 10, 15, 30});

    cfg.checkpoint_every = 0;
    REQUIRE(cfg.resolved_checkpoints() == std::vector<int>{0, 10, 30});

    cfg.checkpoint_epochs = {500}; // beyond the budget, dropped
    REQUIRE(cfg.resolved_checkpoints() == std::vector<int>{0, 30});

    TrainConfig dflt;
    const std::vector<int> sched = dflt.resolved_checkpoints();
    REQUIRE(sched.front() == 0);
    REQUIRE(sched.back() == dflt.epochs);
    REQUIRE(std::is_sorted(sched.begin(), sched.end()));
    // default run keeps the hand-picked epochs and the every-250 grid
    for (int e : {150, 300, 450, 600, 1000, 1200, 1500, 1650, 2000, 2500, 250, 2750}) {
        REQUIRE(std::find(sched.begin(), sched.end(), e) != sched.end());
    }
}

TEST_CASE("training logs one record per epoch plus the init row", "[trainer]") {
    const TrainConfig cfg = tiny_cfg();
    const RunArtifacts run = train(cfg);

    REQUIRE(run.log.size() == 31);
    for (int e = 0; e <= 30; ++e) {
        REQUIRE(run.log[static_cast<std::size_t>(e)].epoch == e);
    }

    // row 0 describes the freshly initialized model
    const ModelParams init = init_params(cfg.dims, cfg.init, cfg.master_seed);
    const MeanStd emb = mean_std(init.embedding);
    REQUIRE(run.log[0].emb_mean == emb.mean);
    REQUIRE(run.log[0].emb_std == emb.std);
    REQUIRE_THAT(run.log[0].train_loss, WithinAbs(std::log(7.0), 0.5));

    // the last row describes the returned parameters
    const MeanStd emb_end = mean_std(run.final_params.embedding);
    REQUIRE(run.log.back().emb_mean == emb_end.mean);
    REQUIRE(run.log.back().emb_std == emb_end.std);

    REQUIRE(run.final_params.all_finite());
    REQUIRE(run.log.back().train_loss < run.log.front().train_loss - 0.05);
    for (const EpochRecord& r : run.log) {
        REQUIRE(std::isfinite(r.train_loss));
        REQUIRE(r.dead_frac >= 0.0);
        REQUIRE(r.dead_frac <= 1.0);
        REQUIRE(r.train_acc >= 0.0);
        REQUIRE(r.test_acc <= 1.0);
    }
    REQUIRE(run.checkpoint_epochs == std::vector<int>{0, 10, 15, 30});
}

TEST_CASE("full-batch training equals an explicit step-by-step loop", "[trainer]") {
    const TrainConfig cfg = tiny_cfg();
    const RunArtifacts run = train(cfg);

    const ModTask task = generate(cfg.dims.vocab);
    RngStream split_rng(cfg.master_seed, "split");
    const Split split = make_split(task, cfg.split_fraction, split_rng);
    std::vector<Example> batch;
    for (std::uint32_t idx : split.train) {
        batch.push_back(task.pairs[idx]);
    }

    ModelParams params = init_params(cfg.dims, cfg.init, cfg.master_seed);
    AdamWState state = AdamWState::zeros(cfg.dims);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const ForwardTrace trace = forward(params, cfg.variant, batch);
        const Gradients grads = backward(params, cfg.variant, trace, batch);
        adamw_step(params, grads, state, cfg.opt, cfg.variant);
    }

    // bit-identical: the trace-reuse shortcut must not change arithmetic
    REQUIRE(run.final_params.embedding.values() == params.embedding.values());
    REQUIRE(run.final_params.w1.values() == params.w1.values());
    REQUIRE(run.final_params.b1.values() == params.b1.values());
    REQUIRE(run.final_params.w2.values() == params.w2.values());
    REQUIRE(run.final_params.b2.values() == params.b2.values());
}

TEST_CASE("training runs are deterministic per seed", "[trainer]") {
    const TrainConfig cfg = tiny_cfg();
    const RunArtifacts a = train(cfg);
    const RunArtifacts b = train(cfg);
    REQUIRE(epoch_log_to_csv(a.log) == epoch_log_to_csv(b.log));
    REQUIRE(a.final_params.w1.values() == b.final_params.w1.values());

    TrainConfig other = cfg;
    other.master_seed = 6;
    const RunArtifacts c = train(other);
    REQUIRE(a.final_params.w1.values() != c.final_params.w1.values());
}

TEST_CASE("persisted runs write config, log and checkpoints", "[trainer]") {
    const TempDir tmp("persist");
    const TrainConfig cfg = tiny_cfg();
    const RunArtifacts run = train(cfg, tmp.path);

    REQUIRE(std::filesystem::exists(tmp.path / "config.json"));
    REQUIRE(std::filesystem::exists(tmp.path / "log.csv"));
    for (int e : run.checkpoint_epochs) {
        REQUIRE(std::filesystem::exists(checkpoint_path(tmp.path, e)));
    }

    const TrainConfig loaded = load_config(tmp.path / "config.json");
    REQUIRE(config_hash(loaded) == config_hash(cfg));

    const std::string csv_text = read_text_file(tmp.path / "log.csv");
    REQUIRE(csv_text == epoch_log_to_csv(run.log));

    const ModelParams last = load_checkpoint(checkpoint_path(tmp.path, cfg.epochs));
    REQUIRE(last.w1.values() == run.final_params.w1.values());
    REQUIRE(last.embedding.values() == run.final_params.embedding.values());

    const ModelParams first = load_checkpoint(checkpoint_path(tmp.path, 0));
    const ModelParams init = init_params(cfg.dims, cfg.init, cfg.master_seed);
    REQUIRE(first.w1.values() == init.w1.values());
}

TEST_CASE("re-running a config reproduces artifacts byte for byte", "[trainer]") {
    const TempDir tmp_a("bytes_a");
    const TempDir tmp_b("bytes_b");
    const TrainConfig cfg = tiny_cfg();
    train(cfg, tmp_a.path);
    train(cfg, tmp_b.path);

    for (const char* name : {"config.json", "log.csv"}) {
        REQUIRE(read_text_file(tmp_a.path / name) == read_text_file(tmp_b.path / name));
    }
    const auto ckpt = checkpoint_path(tmp_a.path, cfg.epochs).filename();
    REQUIRE(read_text_file(tmp_a.path / ckpt) == read_text_file(tmp_b.path / ckpt));
}

TEST_CASE("mini-batch training follows the batch_size setting", "[trainer]") {
    TrainConfig cfg = tiny_cfg();
    cfg.batch_size = 8;
    const RunArtifacts run = train(cfg);
    REQUIRE(run.log.size() == 31);
    REQUIRE(run.final_params.all_finite());
    REQUIRE(run.log.back().train_loss < run.log.front().train_loss - 0.05);

    const RunArtifacts again = train(cfg);
    REQUIRE(again.final_params.w1.values() == run.final_params.w1.values());

    // differs from the full-batch trajectory
    TrainConfig full = tiny_cfg();
    const RunArtifacts fb = train(full);
    REQUIRE(fb.final_params.w1.values() != run.final_params.w1.values());
}

TEST_CASE("training dropout is applied and reproducible", "[trainer]") {
    TrainConfig cfg = tiny_cfg();
    DropoutSpec drop;
    drop.rate = 0.3;
    cfg.train_dropout = drop;
    const RunArtifacts a = train(cfg);
    const RunArtifacts b = train(cfg);
    REQUIRE(a.final_params.w1.values() == b.final_params.w1.values());

    TrainConfig plain = tiny_cfg();
    const RunArtifacts c = train(plain);
    REQUIRE(a.final_params.w1.values() != c.final_params.w1.values());
}

TEST_CASE("diverging runs abort with the offending epoch", "[trainer]") {
    TrainConfig cfg = tiny_cfg();
    cfg.opt.lr = 1e5;
    cfg.opt.weight_decay = 100.0;
    cfg.epochs = 500;
    try {
        train(cfg);
        FAIL("expected divergence");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NonFinite);
        REQUIRE(std::string(e.what()).find("aborted at epoch") != std::string::npos);
    }
}

TEST_CASE("evaluate matches a direct forward pass", "[trainer]") {
    const ModelDims dims{5, 4, 8};
    const ModelParams params = init_params(dims, InitSpec{}, 2);
    const ModTask task = generate(5);
    const std::vector<std::uint32_t> indices = {0, 7, 12, 24};

    const LossAccuracy via_eval = evaluate(params, Variant{}, task, indices);
    std::vector<Example> batch;
    for (std::uint32_t i : indices) {
        batch.push_back(task.pairs[i]);
    }
    const ForwardTrace trace = forward(params, Variant{}, batch);
    const LossAccuracy direct = loss_and_accuracy(trace.logits, batch);
    REQUIRE(via_eval.loss == direct.loss);
    REQUIRE(via_eval.accuracy == direct.accuracy);

    const std::vector<std::uint32_t> empty;
    REQUIRE_THROWS_AS(evaluate(params, Variant{}, task, empty), Error);
}

TEST_CASE("invalid configs are rejected before any work", "[trainer]") {
    TrainConfig cfg = tiny_cfg();
    cfg.split_fraction = 1.0;
    REQUIRE_THROWS_AS(train(cfg), Error);
    cfg = tiny_cfg();
    cfg.epochs = 0;
    REQUIRE_THROWS_AS(train(cfg), Error);
    cfg = tiny_cfg();
    cfg.batch_size = -1;
    REQUIRE_THROWS_AS(train(cfg), Error);
}

TEST_CASE("a longer run extends a shorter one without changing its prefix", "[trainer]") {
    // epochs only sets the loop length, so the epoch log of a budget-N run is
    // a byte prefix of the budget-M log for M > N; first-crossing statistics
    // evaluated on a truncated long log equal those of a genuine short run
    TrainConfig short_cfg = tiny_cfg();
    short_cfg.epochs = 10;
    TrainConfig long_cfg = tiny_cfg();
    long_cfg.epochs = 25;

    const RunArtifacts short_run = train(short_cfg);
    const RunArtifacts long_run = train(long_cfg);
    const std::string short_csv = epoch_log_to_csv(short_run.log);
    const std::string long_csv = epoch_log_to_csv(long_run.log);
    REQUIRE(long_csv.size() > short_csv.size());
    REQUIRE(long_csv.substr(0, short_csv.size()) == short_csv);
}
