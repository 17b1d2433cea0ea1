#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "groklab/error.hpp"
#include "groklab/model.hpp"
#include "groklab/optimizer.hpp"

namespace groklab {

// Complete description of one training run. Everything stochastic derives
// from master_seed, so a config plus seed pins the run bit-for-bit.
struct TrainConfig {
    ModelDims dims;
    InitSpec init;
    Variant variant;
    OptHyper opt;
    double split_fraction = 0.5;
    int epochs = 3000;
    int batch_size = 0; // 0 = full batch
    std::uint64_t master_seed = 1;
    std::vector<int> checkpoint_epochs = {0,    150,  300,  450,  600, 1000,
                                          1200, 1500, 1650, 2000, 2500};
    int checkpoint_every = 250; // 0 disables the periodic schedule
    std::optional<DropoutSpec> train_dropout;

    void validate() const {
        dims.validate();
        init.validate();
        opt.validate();
        if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
            fail(ErrorCode::InvalidSpec, "TrainConfig: split_fraction must lie in (0, 1)");
        }
        if (epochs < 1) {
            fail(ErrorCode::InvalidSpec, "TrainConfig: epochs must be >= 1");
        }
        if (batch_size < 0) {
            fail(ErrorCode::InvalidSpec, "TrainConfig: batch_size must be >= 0");
        }
        if (checkpoint_every < 0) {
            fail(ErrorCode::InvalidSpec, "TrainConfig: checkpoint_every must be >= 0");
        }
        for (int e : checkpoint_epochs) {
            if (e < 0) {
                fail(ErrorCode::InvalidSpec, "TrainConfig: checkpoint epochs must be >= 0");
            }
        }
        if (train_dropout) {
            train_dropout->validate();
        }
    }

    // Explicit epochs, the every-k grid, plus init and final state; entries
    // beyond the budget are dropped.
    std::vector<int> resolved_checkpoints() const {
        std::set<int> sched;
        sched.insert(0);
        sched.insert(epochs);
        for (int e : checkpoint_epochs) {
            if (e <= epochs) {
                sched.insert(e);
            }
        }
        if (checkpoint_every > 0) {
            for (int e = 0; e <= epochs; e += checkpoint_every) {
                sched.insert(e);
            }
        }
        return {sched.begin(), sched.end()};
    }
};

// One row of the training log. wall_time_ms is informational only and never
// persisted, keeping run artifacts byte-reproducible.
struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double emb_mean = 0.0;
    double emb_std = 0.0;
    double w1_mean = 0.0;
    double w1_std = 0.0;
    double w2_mean = 0.0;
    double w2_std = 0.0;
    double dead_frac = 0.0;
    double wall_time_ms = 0.0;
};

} // namespace groklab
