#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "groklab/checkpoint.hpp"
#include "groklab/config_io.hpp"
#include "groklab/trainer.hpp"

using namespace groklab;

namespace {

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("groklab_artifacts_" + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("checkpoints round-trip bit for bit", "[artifacts]") {
    const TempDir tmp("roundtrip");
    const ModelDims dims{7, 3, 5};
    const ModelParams params = init_params(dims, InitSpec{}, 11);
    const auto path = tmp.path / "model.bin";

    save_checkpoint(path, params);
    const ModelParams back = load_checkpoint(path);

    REQUIRE(back.embedding.values() == params.embedding.values());
    REQUIRE(back.w1.values() == params.w1.values());
    REQUIRE(back.b1.values() == params.b1.values());
    REQUIRE(back.w2.values() == params.w2.values());
    REQUIRE(back.b2.values() == params.b2.values());

    // header: 8-byte magic plus three u32 dims, then 5 matrices of f64
    const std::size_t doubles = params.embedding.size() + params.w1.size() +
                                params.b1.size() + params.w2.size() + params.b2.size();
    REQUIRE(std::filesystem::file_size(path) == 8 + 12 + doubles * 8);

    std::ifstream in(path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    REQUIRE(std::string(magic, 8) == "GROKLAB1");
}

TEST_CASE("corrupt checkpoints are rejected", "[artifacts]") {
    const TempDir tmp("corrupt");
    const ModelDims dims{5, 2, 3};
    const ModelParams params = init_params(dims, InitSpec{}, 1);
    const auto path = tmp.path / "model.bin";
    save_checkpoint(path, params);

    SECTION("bad magic") {
        auto bytes = read_text_file(path);
        bytes[0] = 'X';
        write_text_file(path, bytes);
        REQUIRE_THROWS_AS(load_checkpoint(path), Error);
    }
    SECTION("truncated payload") {
        auto bytes = read_text_file(path);
        bytes.resize(bytes.size() - 5);
        write_text_file(path, bytes);
        REQUIRE_THROWS_AS(load_checkpoint(path), Error);
    }
    SECTION("trailing bytes") {
        auto bytes = read_text_file(path);
        bytes += "junk";
        write_text_file(path, bytes);
        REQUIRE_THROWS_AS(load_checkpoint(path), Error);
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_checkpoint(tmp.path / "absent.bin"), Error);
    }
}

TEST_CASE("saving twice produces identical bytes", "[artifacts]") {
    const TempDir tmp("stable");
    const ModelParams params = init_params(ModelDims{5, 2, 3}, InitSpec{}, 123);
    save_checkpoint(tmp.path / "a.bin", params);
    save_checkpoint(tmp.path / "b.bin", params);
    REQUIRE(read_text_file(tmp.path / "a.bin") == read_text_file(tmp.path / "b.bin"));
}

TEST_CASE("train configs round-trip through json", "[artifacts]") {
    TrainConfig cfg;
    cfg.dims = ModelDims{11, 16, 32};
    cfg.init.embedding = GroupInit::uniform(-0.2, 0.2);
    cfg.init.layer1 = GroupInit::xavier(3.0);
    cfg.init.layer2 = GroupInit::normal(0.2, 0.1);
    cfg.variant.relu_after_embedding = true;
    cfg.opt.lr = 1e-3;
    cfg.opt.weight_decay = 0.3;
    cfg.split_fraction = 0.4;
    cfg.epochs = 1234;
    cfg.batch_size = 64;
    cfg.master_seed = 99;
    cfg.checkpoint_epochs = {0, 5, 10};
    cfg.checkpoint_every = 100;
    DropoutSpec drop;
    drop.rate = 0.25;
    drop.placement = DropoutSpec::Placement::HiddenAndEmbedding;
    cfg.train_dropout = drop;

    const TrainConfig back = config_from_json(to_json(cfg));
    REQUIRE(to_json(back) == to_json(cfg));
    REQUIRE(back.dims.vocab == 11);
    REQUIRE(back.init.embedding.kind == GroupInit::Kind::Uniform);
    REQUIRE(back.init.embedding.lo == -0.2);
    REQUIRE(back.init.layer1.alpha == 3.0);
    REQUIRE(back.init.layer2.mean == 0.2);
    REQUIRE(back.variant.relu_after_embedding);
    REQUIRE(back.opt.weight_decay == 0.3);
    REQUIRE(back.train_dropout.has_value());
    REQUIRE(back.train_dropout->rate == 0.25);
    REQUIRE(back.train_dropout->placement == DropoutSpec::Placement::HiddenAndEmbedding);
}

TEST_CASE("missing config fields fall back to defaults", "[artifacts]") {
    const TrainConfig cfg = config_from_json(nlohmann::json::object());
    const TrainConfig dflt;
    REQUIRE(to_json(cfg) == to_json(dflt));
    REQUIRE(cfg.dims.vocab == 53);
    REQUIRE(cfg.dims.embed_dim == 128);
    REQUIRE(cfg.dims.hidden == 256);
    REQUIRE(cfg.opt.lr == 3e-4);
    REQUIRE(cfg.opt.weight_decay == 1.0);
    REQUIRE(cfg.epochs == 3000);
    REQUIRE(cfg.batch_size == 0);
    REQUIRE_FALSE(cfg.train_dropout.has_value());
}

TEST_CASE("invalid configs are rejected at parse time", "[artifacts]") {
    nlohmann::json j;
    j["split_fraction"] = 2.0;
    REQUIRE_THROWS_AS(config_from_json(j), Error);

    nlohmann::json bad_kind;
    bad_kind["init"] = {{"embedding", {{"kind", "laplace"}}}};
    REQUIRE_THROWS_AS(config_from_json(bad_kind), Error);

    nlohmann::json bad_placement;
    bad_placement["train_dropout"] = {{"rate", 0.1}, {"placement", "everywhere"}};
    REQUIRE_THROWS_AS(config_from_json(bad_placement), Error);
}

TEST_CASE("config files persist and reload", "[artifacts]") {
    const TempDir tmp("config");
    TrainConfig cfg;
    cfg.master_seed = 424242;
    cfg.opt.lr = 0.000123;
    const auto path = tmp.path / "config.json";
    save_config(path, cfg);
    const TrainConfig back = load_config(path);
    REQUIRE(to_json(back) == to_json(cfg));
    REQUIRE_THROWS_AS(load_config(tmp.path / "absent.json"), Error);

    write_text_file(tmp.path / "garbage.json", "{not json");
    REQUIRE_THROWS_AS(load_config(tmp.path / "garbage.json"), Error);
}

TEST_CASE("config hashes fingerprint every field", "[artifacts]") {
    const TrainConfig base;
    const std::string h0 = config_hash(base);
    REQUIRE(h0.size() == 16);
    REQUIRE(h0 == config_hash(TrainConfig{})); // stable

    TrainConfig seed = base;
    seed.master_seed = 2;
    REQUIRE(config_hash(seed) != h0);

    TrainConfig alpha = base;
    alpha.init.layer1 = GroupInit::xavier(5.0);
    REQUIRE(config_hash(alpha) != h0);

    TrainConfig decay = base;
    decay.opt.weight_decay = 0.3;
    REQUIRE(config_hash(decay) != h0);
}
