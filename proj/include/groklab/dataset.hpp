#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "groklab/error.hpp"
#include "groklab/rng.hpp"

namespace groklab {

struct Example {
    int lhs = 0;
    int rhs = 0;
    int label = 0;
};

// The full modular-addition task: all P*P input pairs (i, j) with label
// (i + j) mod P, in lexicographic order.
struct ModTask {
    int modulus = 0;
    std::vector<Example> pairs;

    std::size_t size() const noexcept { return pairs.size(); }
};

inline ModTask generate(int modulus) {
    if (modulus < 2) {
        fail(ErrorCode::InvalidArgument,
             "generate: modulus must be >= 2, got " + std::to_string(modulus));
    }
    ModTask task;
    task.modulus = modulus;
    task.pairs.reserve(static_cast<std::size_t>(modulus) * modulus);
    for (int i = 0; i < modulus; ++i) {
        for (int j = 0; j < modulus; ++j) {
            task.pairs.push_back({i, j, (i + j) % modulus});
        }
    }
    return task;
}

// Deterministic train/test partition of the task indices.
struct Split {
    std::vector<std::uint32_t> train;
    std::vector<std::uint32_t> test;
    double fraction = 0.5;
    std::uint64_t seed = 0; // master seed of the stream that shuffled it
};

// Fisher-Yates shuffle of all indices, cut at floor(fraction * P^2).
inline Split make_split(const ModTask& task, double fraction, RngStream& rng) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        fail(ErrorCode::InvalidArgument,
             "split: fraction must lie in (0, 1), got " + std::to_string(fraction));
    }
    std::vector<std::uint32_t> order(task.size());
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
    }
    const auto train_size =
        static_cast<std::size_t>(fraction * static_cast<double>(task.size()));
    Split split;
    split.fraction = fraction;
    split.seed = rng.seed();
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_size), order.end());
    return split;
}

} // namespace groklab
