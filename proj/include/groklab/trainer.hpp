#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "groklab/checkpoint.hpp"
#include "groklab/config_io.hpp"
#include "groklab/dataset.hpp"
#include "groklab/model.hpp"
#include "groklab/optimizer.hpp"
#include "groklab/train_config.hpp"

namespace groklab {

namespace csv {

// Shortest round-trip representation; stable across runs of the same build.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{}) {
        fail(ErrorCode::Io, "csv: cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

} // namespace csv

inline constexpr std::string_view kEpochCsvHeader =
    "epoch,train_loss,train_acc,test_acc,emb_mean,emb_std,w1_mean,w1_std,w2_mean,w2_std,"
    "dead_frac";

inline std::string epoch_log_to_csv(std::span<const EpochRecord> log) {
    std::string out;
    out.reserve(log.size() * 96 + 128);
    out += kEpochCsvHeader;
    out += '\n';
    for (const EpochRecord& r : log) {
        out += std::to_string(r.epoch);
        for (double v : {r.train_loss, r.train_acc, r.test_acc, r.emb_mean, r.emb_std,
                         r.w1_mean, r.w1_std, r.w2_mean, r.w2_std, r.dead_frac}) {
            out += ',';
            out += csv::format_double(v);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<EpochRecord> epoch_log_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kEpochCsvHeader) {
        fail(ErrorCode::Io, "epoch log: missing or unexpected header");
    }
    std::vector<EpochRecord> log;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        while (true) {
            const auto pos = rest.find(',');
            fields.push_back(rest.substr(0, pos));
            if (pos == std::string_view::npos) {
                break;
            }
            rest = rest.substr(pos + 1);
        }
        if (fields.size() != 11) {
            fail(ErrorCode::Io, "epoch log: bad row '" + line + "'");
        }
        EpochRecord r;
        r.epoch = static_cast<int>(csv::parse_double(fields[0]));
        r.train_loss = csv::parse_double(fields[1]);
        r.train_acc = csv::parse_double(fields[2]);
        r.test_acc = csv::parse_double(fields[3]);
        r.emb_mean = csv::parse_double(fields[4]);
        r.emb_std = csv::parse_double(fields[5]);
        r.w1_mean = csv::parse_double(fields[6]);
        r.w1_std = csv::parse_double(fields[7]);
        r.w2_mean = csv::parse_double(fields[8]);
        r.w2_std = csv::parse_double(fields[9]);
        r.dead_frac = csv::parse_double(fields[10]);
        log.push_back(r);
    }
    return log;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        fail(ErrorCode::Io, "write failed for " + path.string());
    }
}

struct RunArtifacts {
    TrainConfig config;
    std::vector<EpochRecord> log;
    std::vector<int> checkpoint_epochs;
    std::filesystem::path dir; // empty when the run was not persisted
    ModelParams final_params;
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch) {
    char name[32];
    std::snprintf(name, sizeof(name), "ckpt_%06d.bin", epoch);
    return dir / name;
}

// Dropout-free forward over an index subset; pure, shares no state with the
// training loop.
inline LossAccuracy evaluate(const ModelParams& params, const Variant& variant,
                             const ModTask& task, std::span<const std::uint32_t> indices) {
    if (indices.empty()) {
        fail(ErrorCode::EmptyInput, "evaluate: empty index set");
    }
    std::vector<Example> batch;
    batch.reserve(indices.size());
    for (std::uint32_t idx : indices) {
        batch.push_back(task.pairs.at(idx));
    }
    const ForwardTrace trace = forward(params, variant, batch);
    return loss_and_accuracy(trace.logits, batch);
}

namespace detail {

inline void gather_examples(const ModTask& task, std::span<const std::uint32_t> indices,
                            std::vector<Example>& out) {
    out.clear();
    out.reserve(indices.size());
    for (std::uint32_t idx : indices) {
        out.push_back(task.pairs[idx]);
    }
}

// Marks neurons that fired at least once in this activation block.
inline void accumulate_active(const Matrix& hidden_act, std::vector<char>& active) {
    const std::size_t h = hidden_act.cols();
    for (std::size_t r = 0; r < hidden_act.rows(); ++r) {
        const double* row = hidden_act.row(r);
        for (std::size_t c = 0; c < h; ++c) {
            if (row[c] > 0.0) {
                active[c] = 1;
            }
        }
    }
}

} // namespace detail

// Runs the full training loop: one AdamW step per batch (full-batch mode is
// one step per epoch), dropout-free evaluation of both splits every epoch,
// checkpoints on the resolved schedule. Epoch record e describes the state
// after e optimizer epochs; record 0 is the freshly initialized model.
inline RunArtifacts train(const TrainConfig& cfg,
                          const std::filesystem::path& out_dir = {}) {
    cfg.validate();
    const bool persist = !out_dir.empty();
    if (persist) {
        std::filesystem::create_directories(out_dir);
        save_config(out_dir / "config.json", cfg);
    }

    const ModTask task = generate(cfg.dims.vocab);
    RngStream split_rng(cfg.master_seed, "split");
    const Split split = make_split(task, cfg.split_fraction, split_rng);

    std::vector<Example> train_examples;
    std::vector<Example> test_examples;
    detail::gather_examples(task, split.train, train_examples);
    detail::gather_examples(task, split.test, test_examples);

    ModelParams params = init_params(cfg.dims, cfg.init, cfg.master_seed);
    AdamWState state = AdamWState::zeros(cfg.dims);

    RngStream dropout_rng(cfg.master_seed, "dropout.train");
    RngStream shuffle_rng(cfg.master_seed, "batch.shuffle");

    const std::vector<int> schedule = cfg.resolved_checkpoints();
    auto next_checkpoint = schedule.begin();

    RunArtifacts artifacts;
    artifacts.config = cfg;
    artifacts.dir = out_dir;
    artifacts.log.reserve(static_cast<std::size_t>(cfg.epochs) + 1);

    const std::size_t hidden = static_cast<std::size_t>(cfg.dims.hidden);
    std::vector<char> active(hidden, 0);

    ForwardTrace eval_train_trace;
    ForwardTrace eval_test_trace;
    ForwardTrace step_trace; // only used when the eval trace cannot be reused
    Gradients grads;
    BackwardScratch scratch;
    std::vector<std::uint32_t> order(split.train.begin(), split.train.end());
    std::vector<Example> batch_scratch;

    const bool full_batch = cfg.batch_size == 0;
    // In full-batch mode without training dropout, the post-epoch eval
    // forward doubles as the next epoch's training forward.
    const bool reuse_eval_trace = full_batch && !cfg.train_dropout;

    const auto record_epoch = [&](int epoch, double wall_ms) {
        forward_into(params, cfg.variant, train_examples, nullptr, nullptr, eval_train_trace);
        const LossAccuracy train_la = loss_and_accuracy(eval_train_trace.logits, train_examples);
        forward_into(params, cfg.variant, test_examples, nullptr, nullptr, eval_test_trace);
        const LossAccuracy test_la = loss_and_accuracy(eval_test_trace.logits, test_examples);

        if (!std::isfinite(train_la.loss)) {
            fail(ErrorCode::NonFinite, "non-finite train loss");
        }

        std::fill(active.begin(), active.end(), 0);
        detail::accumulate_active(eval_train_trace.hidden_act, active);
        detail::accumulate_active(eval_test_trace.hidden_act, active);
        std::size_t dead = 0;
        for (char a : active) {
            dead += a ? 0 : 1;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_la.loss;
        rec.train_acc = train_la.accuracy;
        rec.test_acc = test_la.accuracy;
        const MeanStd emb = mean_std(params.embedding);
        const MeanStd w1 = mean_std(params.w1);
        const MeanStd w2 = mean_std(params.w2);
        rec.emb_mean = emb.mean;
        rec.emb_std = emb.std;
        rec.w1_mean = w1.mean;
        rec.w1_std = w1.std;
        rec.w2_mean = w2.mean;
        rec.w2_std = w2.std;
        rec.dead_frac = static_cast<double>(dead) / static_cast<double>(hidden);
        rec.wall_time_ms = wall_ms;
        artifacts.log.push_back(rec);

        if (next_checkpoint != schedule.end() && *next_checkpoint == epoch) {
            if (persist) {
                save_checkpoint(checkpoint_path(out_dir, epoch), params);
            }
            artifacts.checkpoint_epochs.push_back(epoch);
            ++next_checkpoint;
        }
    };

    const auto guarded_record = [&](int epoch, double wall_ms) {
        try {
            record_epoch(epoch, wall_ms);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NonFinite) {
                fail(ErrorCode::NonFinite,
                     "train: aborted at epoch " + std::to_string(epoch) + ": " + e.what());
            }
            throw;
        }
    };

    guarded_record(0, 0.0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        try {
            if (full_batch) {
                const DropoutSpec* drop =
                    cfg.train_dropout ? &cfg.train_dropout.value() : nullptr;
                if (reuse_eval_trace) {
                    backward_into(params, cfg.variant, eval_train_trace, train_examples, grads,
                                  scratch);
                } else {
                    forward_into(params, cfg.variant, train_examples, drop, &dropout_rng,
                                 step_trace);
                    backward_into(params, cfg.variant, step_trace, train_examples, grads,
                                  scratch);
                }
                adamw_step(params, grads, state, cfg.opt, cfg.variant);
            } else {
                for (std::size_t i = order.size(); i > 1; --i) {
                    const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_below(i));
                    std::swap(order[i - 1], order[j]);
                }
                const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
                for (std::size_t start = 0; start < order.size(); start += bs) {
                    const std::size_t stop = std::min(start + bs, order.size());
                    batch_scratch.clear();
                    for (std::size_t k = start; k < stop; ++k) {
                        batch_scratch.push_back(task.pairs[order[k]]);
                    }
                    const DropoutSpec* drop =
                        cfg.train_dropout ? &cfg.train_dropout.value() : nullptr;
                    forward_into(params, cfg.variant, batch_scratch, drop, &dropout_rng,
                                 step_trace);
                    backward_into(params, cfg.variant, step_trace, batch_scratch, grads,
                                  scratch);
                    adamw_step(params, grads, state, cfg.opt, cfg.variant);
                }
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NonFinite) {
                fail(ErrorCode::NonFinite,
                     "train: aborted at epoch " + std::to_string(epoch) + ": " + e.what());
            }
            throw;
        }
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();
        guarded_record(epoch, wall_ms);
    }

    if (persist) {
        write_text_file(out_dir / "log.csv", epoch_log_to_csv(artifacts.log));
    }
    artifacts.final_params = std::move(params);
    return artifacts;
}

} // namespace groklab
