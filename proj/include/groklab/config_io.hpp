#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "groklab/error.hpp"
#include "groklab/rng.hpp"
#include "groklab/train_config.hpp"

namespace groklab {

using json = nlohmann::json;

inline json to_json(const GroupInit& g) {
    switch (g.kind) {
    case GroupInit::Kind::XavierNormal:
        return {{"kind", "xavier_normal"}, {"alpha", g.alpha}};
    case GroupInit::Kind::Normal:
        return {{"kind", "normal"}, {"mean", g.mean}, {"std", g.stddev}};
    case GroupInit::Kind::Uniform:
        return {{"kind", "uniform"}, {"lo", g.lo}, {"hi", g.hi}};
    case GroupInit::Kind::Constant:
        return {{"kind", "constant"}, {"value", g.value}};
    }
    fail(ErrorCode::InvalidSpec, "to_json: unknown init kind");
}

inline GroupInit group_init_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "xavier_normal") {
        return GroupInit::xavier(j.value("alpha", 1.0));
    }
    if (kind == "normal") {
        return GroupInit::normal(j.at("mean").get<double>(), j.at("std").get<double>());
    }
    if (kind == "uniform") {
        return GroupInit::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    }
    if (kind == "constant") {
        return GroupInit::constant(j.at("value").get<double>());
    }
    fail(ErrorCode::InvalidSpec, "config: unknown init kind '" + kind + "'");
}

inline json to_json(const TrainConfig& cfg) {
    json j;
    j["dims"] = {{"P", cfg.dims.vocab}, {"d", cfg.dims.embed_dim}, {"H", cfg.dims.hidden}};
    j["init"] = {{"embedding", to_json(cfg.init.embedding)},
                 {"layer1", to_json(cfg.init.layer1)},
                 {"layer2", to_json(cfg.init.layer2)}};
    j["variant"] = {{"relu_after_embedding", cfg.variant.relu_after_embedding},
                    {"freeze_embedding", cfg.variant.freeze_embedding},
                    {"freeze_non_embedding", cfg.variant.freeze_non_embedding}};
    j["opt"] = {{"lr", cfg.opt.lr},
                {"beta1", cfg.opt.beta1},
                {"beta2", cfg.opt.beta2},
                {"eps", cfg.opt.eps},
                {"weight_decay", cfg.opt.weight_decay}};
    j["split_fraction"] = cfg.split_fraction;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["master_seed"] = cfg.master_seed;
    j["checkpoint_epochs"] = cfg.checkpoint_epochs;
    j["checkpoint_every"] = cfg.checkpoint_every;
    if (cfg.train_dropout) {
        j["train_dropout"] = {
            {"rate", cfg.train_dropout->rate},
            {"placement", cfg.train_dropout->placement == DropoutSpec::Placement::Hidden
                              ? "hidden"
                              : "hidden_embedding"}};
    } else {
        j["train_dropout"] = nullptr;
    }
    return j;
}

inline TrainConfig config_from_json(const json& j) {
    TrainConfig cfg;
    if (j.contains("dims")) {
        const auto& d = j.at("dims");
        cfg.dims.vocab = d.value("P", cfg.dims.vocab);
        cfg.dims.embed_dim = d.value("d", cfg.dims.embed_dim);
        cfg.dims.hidden = d.value("H", cfg.dims.hidden);
    }
    if (j.contains("init")) {
        const auto& i = j.at("init");
        if (i.contains("embedding")) {
            cfg.init.embedding = group_init_from_json(i.at("embedding"));
        }
        if (i.contains("layer1")) {
            cfg.init.layer1 = group_init_from_json(i.at("layer1"));
        }
        if (i.contains("layer2")) {
            cfg.init.layer2 = group_init_from_json(i.at("layer2"));
        }
    }
    if (j.contains("variant")) {
        const auto& v = j.at("variant");
        cfg.variant.relu_after_embedding = v.value("relu_after_embedding", false);
        cfg.variant.freeze_embedding = v.value("freeze_embedding", false);
        cfg.variant.freeze_non_embedding = v.value("freeze_non_embedding", false);
    }
    if (j.contains("opt")) {
        const auto& o = j.at("opt");
        cfg.opt.lr = o.value("lr", cfg.opt.lr);
        cfg.opt.beta1 = o.value("beta1", cfg.opt.beta1);
        cfg.opt.beta2 = o.value("beta2", cfg.opt.beta2);
        cfg.opt.eps = o.value("eps", cfg.opt.eps);
        cfg.opt.weight_decay = o.value("weight_decay", cfg.opt.weight_decay);
    }
    cfg.split_fraction = j.value("split_fraction", cfg.split_fraction);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    if (j.contains("checkpoint_epochs")) {
        cfg.checkpoint_epochs = j.at("checkpoint_epochs").get<std::vector<int>>();
    }
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    if (j.contains("train_dropout") && !j.at("train_dropout").is_null()) {
        const auto& td = j.at("train_dropout");
        DropoutSpec spec;
        spec.rate = td.at("rate").get<double>();
        const std::string placement = td.value("placement", "hidden");
        if (placement == "hidden") {
            spec.placement = DropoutSpec::Placement::Hidden;
        } else if (placement == "hidden_embedding") {
            spec.placement = DropoutSpec::Placement::HiddenAndEmbedding;
        } else {
            fail(ErrorCode::InvalidSpec, "config: unknown dropout placement '" + placement + "'");
        }
        cfg.train_dropout = spec;
    }
    cfg.validate();
    return cfg;
}

// Stable fingerprint of a config; keys are sorted by the json container so
// the dump (and hence the hash) is deterministic.
inline std::string config_hash(const TrainConfig& cfg) {
    const std::string dump = to_json(cfg).dump();
    const std::uint64_t h = detail::fnv1a64(dump);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline void save_config(const std::filesystem::path& path, const TrainConfig& cfg) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        fail(ErrorCode::Io, "save_config: cannot open " + path.string());
    }
    out << to_json(cfg).dump(2) << "\n";
}

inline TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::Io, "load_config: cannot open " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::Io, "load_config: " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

} // namespace groklab
