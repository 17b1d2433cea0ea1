#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "groklab/dataset.hpp"
#include "groklab/error.hpp"
#include "groklab/matrix.hpp"
#include "groklab/model.hpp"
#include "groklab/train_config.hpp"

namespace groklab {

// ---------------------------------------------------------------------------
// Monte-Carlo dropout statistics
// ---------------------------------------------------------------------------

struct MCDropoutConfig {
    double rate = 0.3;
    int passes = 100;
    std::uint64_t seed = 0;
    DropoutSpec::Placement placement = DropoutSpec::Placement::Hidden;

    void validate() const {
        if (!(rate >= 0.0 && rate < 1.0)) {
            fail(ErrorCode::InvalidSpec,
                 "mc_dropout: rate must lie in [0, 1), got " + std::to_string(rate));
        }
        if (passes < 2) {
            fail(ErrorCode::InvalidSpec, "mc_dropout: need at least 2 passes");
        }
    }
};

struct MCDropoutStats {
    double mean_accuracy = 0.0;
    double variance = 0.0; // population variance over the pass accuracies
};

// Weights held constant, N stochastic forward passes over a fixed set.
// Pass k draws its masks from an independent stream keyed by (seed, k), so
// the resulting accuracy multiset does not depend on evaluation order.
inline MCDropoutStats mc_dropout_stats(const ModelParams& params, const Variant& variant,
                                       const ModTask& task,
                                       std::span<const std::uint32_t> indices,
                                       const MCDropoutConfig& cfg) {
    cfg.validate();
    if (indices.empty()) {
        fail(ErrorCode::EmptyInput, "mc_dropout: empty evaluation set");
    }
    std::vector<Example> batch;
    batch.reserve(indices.size());
    for (std::uint32_t idx : indices) {
        batch.push_back(task.pairs.at(idx));
    }

    if (cfg.rate == 0.0) {
        const ForwardTrace trace = forward(params, variant, batch);
        const LossAccuracy la = loss_and_accuracy(trace.logits, batch);
        return {la.accuracy, 0.0};
    }

    DropoutSpec spec;
    spec.rate = cfg.rate;
    spec.placement = cfg.placement;

    std::vector<double> accuracies;
    accuracies.reserve(static_cast<std::size_t>(cfg.passes));
    ForwardTrace trace;
    for (int pass = 0; pass < cfg.passes; ++pass) {
        RngStream rng(cfg.seed, "mc_dropout.pass." + std::to_string(pass));
        forward_into(params, variant, batch, &spec, &rng, trace);
        accuracies.push_back(loss_and_accuracy(trace.logits, batch).accuracy);
    }
    const MeanStd ms = mean_std(accuracies.data(), accuracies.size());
    return {ms.mean, ms.std * ms.std};
}

// ---------------------------------------------------------------------------
// Dropout Robustness Curve
// ---------------------------------------------------------------------------

struct DRCPoint {
    double rate = 0.0;
    double mean_accuracy = 0.0;
    double variance = 0.0;
};

struct DRCCurve {
    int checkpoint_epoch = -1;
    std::vector<DRCPoint> points;
};

inline std::vector<double> default_drc_rates() {
    std::vector<double> rates;
    for (int i = 0; i <= 9; ++i) {
        rates.push_back(static_cast<double>(i) / 10.0);
    }
    return rates;
}

inline DRCCurve dropout_robustness_curve(const ModelParams& params, const Variant& variant,
                                         const ModTask& task,
                                         std::span<const std::uint32_t> indices,
                                         std::span<const double> rates, int passes,
                                         std::uint64_t seed,
                                         DropoutSpec::Placement placement =
                                             DropoutSpec::Placement::Hidden) {
    if (rates.empty()) {
        fail(ErrorCode::InvalidSpec, "drc: empty rate grid");
    }
    double prev = -1.0;
    for (double r : rates) {
        if (!(r >= 0.0 && r <= 0.9)) {
            fail(ErrorCode::InvalidSpec, "drc: rates must lie in [0, 0.9]");
        }
        if (r <= prev) {
            fail(ErrorCode::InvalidSpec, "drc: rates must be strictly increasing");
        }
        prev = r;
    }
    DRCCurve curve;
    for (double r : rates) {
        MCDropoutConfig cfg;
        cfg.rate = r;
        cfg.passes = passes;
        cfg.seed = seed;
        cfg.placement = placement;
        const MCDropoutStats stats = mc_dropout_stats(params, variant, task, indices, cfg);
        curve.points.push_back({r, stats.mean_accuracy, stats.variance});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Embedding cosine similarity and codiagonal structure
// ---------------------------------------------------------------------------

// C[i][j] = <E_i, E_j> / (|E_i| |E_j|); exactly symmetric by construction.
inline Matrix cosine_similarity_matrix(const Matrix& embedding) {
    const std::size_t p = embedding.rows();
    const std::size_t d = embedding.cols();
    std::vector<double> norms(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        const double* row = embedding.row(i);
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            sq += row[c] * row[c];
        }
        if (sq == 0.0) {
            fail(ErrorCode::DegenerateEmbedding,
                 "cosine_similarity_matrix: zero-norm embedding row " + std::to_string(i));
        }
        norms[i] = std::sqrt(sq);
    }
    Matrix c(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        const double* ri = embedding.row(i);
        for (std::size_t j = 0; j <= i; ++j) {
            const double* rj = embedding.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                dot += ri[k] * rj[k];
            }
            const double value = dot / (norms[i] * norms[j]);
            c(i, j) = value;
            c(j, i) = value;
        }
    }
    return c;
}

struct CodiagonalEnergy {
    double diff_energy = 0.0; // grouping by (i - j) mod P
    double sum_energy = 0.0;  // grouping by (i + j) mod P

    double max_energy() const { return std::max(diff_energy, sum_energy); }
};

namespace detail {

// Fraction of off-diagonal variance explained by the group means (eta^2).
inline double grouped_energy(const Matrix& c, bool use_sum) {
    const int p = static_cast<int>(c.rows());
    std::vector<double> group_sum(static_cast<std::size_t>(p), 0.0);
    std::vector<std::int64_t> group_n(static_cast<std::size_t>(p), 0);
    double total_sum = 0.0;
    double total_sq = 0.0;
    std::int64_t n = 0;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            if (i == j) {
                continue;
            }
            const int g = use_sum ? (i + j) % p : (((i - j) % p) + p) % p;
            const double v = c(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            group_sum[static_cast<std::size_t>(g)] += v;
            group_n[static_cast<std::size_t>(g)] += 1;
            total_sum += v;
            total_sq += v * v;
            ++n;
        }
    }
    const double mean = total_sum / static_cast<double>(n);
    const double total_var = total_sq / static_cast<double>(n) - mean * mean;
    if (total_var <= 0.0) {
        return 0.0;
    }
    double between = 0.0;
    for (int g = 0; g < p; ++g) {
        if (group_n[static_cast<std::size_t>(g)] == 0) {
            continue;
        }
        const double gm = group_sum[static_cast<std::size_t>(g)] /
                          static_cast<double>(group_n[static_cast<std::size_t>(g)]);
        between += static_cast<double>(group_n[static_cast<std::size_t>(g)]) * (gm - mean) *
                   (gm - mean);
    }
    between /= static_cast<double>(n);
    return std::clamp(between / total_var, 0.0, 1.0);
}

} // namespace detail

inline CodiagonalEnergy codiagonal_energy(const Matrix& c) {
    if (c.rows() != c.cols()) {
        fail(ErrorCode::ShapeMismatch, "codiagonal_energy: matrix must be square, got " +
                                           c.shape());
    }
    if (c.rows() < 3) {
        fail(ErrorCode::UndefinedMetric,
             "codiagonal_energy: undefined for fewer than 3 classes");
    }
    CodiagonalEnergy e;
    e.diff_energy = detail::grouped_energy(c, false);
    e.sum_energy = detail::grouped_energy(c, true);
    return e;
}

// ---------------------------------------------------------------------------
// Distribution statistics and bimodality
// ---------------------------------------------------------------------------

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;

    int bins() const { return static_cast<int>(counts.size()); }
    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
    double bin_center(int i) const {
        return lo + (static_cast<double>(i) + 0.5) * bin_width();
    }
};

struct DistStats {
    double mean = 0.0;
    double std = 0.0; // population convention
    Histogram hist;
};

// Histogram over a symmetric range [-max|v|, +max|v|] so sign structure is
// unbiased; an all-zero group widens the range to a hair above zero.
inline DistStats distribution_stats(std::span<const double> values, int bins = 101) {
    if (values.empty()) {
        fail(ErrorCode::EmptyInput, "distribution_stats: empty input");
    }
    if (bins < 1) {
        fail(ErrorCode::InvalidSpec, "distribution_stats: bins must be >= 1");
    }
    DistStats out;
    const MeanStd ms = mean_std(values.data(), values.size());
    out.mean = ms.mean;
    out.std = ms.std;

    double max_abs = 0.0;
    for (double v : values) {
        max_abs = std::max(max_abs, std::fabs(v));
    }
    if (max_abs == 0.0) {
        max_abs = 1e-12;
    }
    out.hist.lo = -max_abs;
    out.hist.hi = max_abs;
    out.hist.counts.assign(static_cast<std::size_t>(bins), 0);
    out.hist.total = static_cast<std::int64_t>(values.size());
    const double width = out.hist.bin_width();
    for (double v : values) {
        auto idx = static_cast<std::int64_t>((v - out.hist.lo) / width);
        idx = std::clamp<std::int64_t>(idx, 0, bins - 1);
        out.hist.counts[static_cast<std::size_t>(idx)] += 1;
    }
    return out;
}

struct PeakPair {
    double lower = 0.0;
    double upper = 0.0;

    double separation() const { return upper - lower; }
};

namespace detail {

inline std::vector<double> smooth_counts(const Histogram& h, int window) {
    const int n = h.bins();
    std::vector<double> smooth(static_cast<std::size_t>(n), 0.0);
    const int half = window / 2;
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        double sum = 0.0;
        for (int k = lo; k <= hi; ++k) {
            sum += static_cast<double>(h.counts[static_cast<std::size_t>(k)]);
        }
        smooth[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo + 1);
    }
    return smooth;
}

// Topographic prominence: height above the higher of the two valleys that
// separate the peak from the nearest higher ground (or the signal edge).
inline double peak_prominence(const std::vector<double>& s, int peak) {
    const int n = static_cast<int>(s.size());
    const double h = s[static_cast<std::size_t>(peak)];
    double left_min = h;
    for (int i = peak - 1; i >= 0; --i) {
        if (s[static_cast<std::size_t>(i)] > h) {
            break;
        }
        left_min = std::min(left_min, s[static_cast<std::size_t>(i)]);
    }
    double right_min = h;
    for (int i = peak + 1; i < n; ++i) {
        if (s[static_cast<std::size_t>(i)] > h) {
            break;
        }
        right_min = std::min(right_min, s[static_cast<std::size_t>(i)]);
    }
    return h - std::max(left_min, right_min);
}

} // namespace detail

// The two highest strict local maxima of the smoothed histogram (window 5),
// each required to have prominence >= 20% of the global smoothed maximum.
// Locations come back sorted ascending. No sign constraint here; shifted
// one-sided distributions keep a well-defined peak pair.
inline std::optional<PeakPair> top_two_peaks(const Histogram& h) {
    if (h.bins() < 3 || h.total == 0) {
        return std::nullopt;
    }
    const std::vector<double> s = detail::smooth_counts(h, 5);
    const int n = static_cast<int>(s.size());
    std::vector<int> maxima;
    for (int i = 1; i + 1 < n; ++i) {
        if (s[static_cast<std::size_t>(i)] > s[static_cast<std::size_t>(i - 1)] &&
            s[static_cast<std::size_t>(i)] > s[static_cast<std::size_t>(i + 1)]) {
            maxima.push_back(i);
        }
    }
    if (maxima.size() < 2) {
        return std::nullopt;
    }
    std::sort(maxima.begin(), maxima.end(), [&](int a, int b) {
        const double ha = s[static_cast<std::size_t>(a)];
        const double hb = s[static_cast<std::size_t>(b)];
        if (ha != hb) {
            return ha > hb;
        }
        return a < b;
    });
    const int first = maxima[0];
    const int second = maxima[1];
    const double global_max = *std::max_element(s.begin(), s.end());
    const double threshold = 0.2 * global_max;
    if (detail::peak_prominence(s, first) < threshold ||
        detail::peak_prominence(s, second) < threshold) {
        return std::nullopt;
    }
    PeakPair peaks;
    peaks.lower = std::min(h.bin_center(first), h.bin_center(second));
    peaks.upper = std::max(h.bin_center(first), h.bin_center(second));
    return peaks;
}

// Bimodality in the strict sense: the top two peaks must straddle zero.
inline std::optional<PeakPair> detect_bimodality(const Histogram& h) {
    const auto peaks = top_two_peaks(h);
    if (!peaks) {
        return std::nullopt;
    }
    if (!(peaks->lower < 0.0 && peaks->upper > 0.0)) {
        return std::nullopt;
    }
    return peaks;
}

// ---------------------------------------------------------------------------
// ReLU sparsity
// ---------------------------------------------------------------------------

struct SparsityReport {
    double dead_fraction = 0.0;          // neurons silent on every example
    double mean_inactive_fraction = 0.0; // mean per-example zero-activation share
};

inline SparsityReport sparsity(const ModelParams& params, const Variant& variant,
                               const ModTask& task,
                               std::span<const std::uint32_t> indices) {
    if (indices.empty()) {
        fail(ErrorCode::EmptyInput, "sparsity: empty evaluation set");
    }
    std::vector<Example> batch;
    batch.reserve(indices.size());
    for (std::uint32_t idx : indices) {
        batch.push_back(task.pairs.at(idx));
    }
    const ForwardTrace trace = forward(params, variant, batch);
    const std::size_t h = trace.hidden_act.cols();
    std::vector<char> active(h, 0);
    double inactive_sum = 0.0;
    for (std::size_t r = 0; r < trace.hidden_act.rows(); ++r) {
        const double* row = trace.hidden_act.row(r);
        std::size_t zeros = 0;
        for (std::size_t c = 0; c < h; ++c) {
            if (row[c] > 0.0) {
                active[c] = 1;
            } else {
                ++zeros;
            }
        }
        inactive_sum += static_cast<double>(zeros) / static_cast<double>(h);
    }
    std::size_t dead = 0;
    for (char a : active) {
        dead += a ? 0 : 1;
    }
    SparsityReport out;
    out.dead_fraction = static_cast<double>(dead) / static_cast<double>(h);
    out.mean_inactive_fraction = inactive_sum / static_cast<double>(trace.hidden_act.rows());
    return out;
}

// ---------------------------------------------------------------------------
// Grokking times
// ---------------------------------------------------------------------------

struct GrokkingTimes {
    std::optional<int> t_train; // first epoch with train accuracy >= theta_train
    std::optional<int> t_test;  // first epoch with test accuracy >= theta_test

    std::optional<int> delay() const {
        if (t_train && t_test) {
            return *t_test - *t_train;
        }
        return std::nullopt;
    }
};

inline GrokkingTimes grokking_times(std::span<const EpochRecord> log, double theta_train = 0.99,
                                    double theta_test = 0.95) {
    if (log.empty()) {
        fail(ErrorCode::EmptyInput, "grokking_times: empty log");
    }
    if (!(theta_train > 0.0 && theta_train <= 1.0) || !(theta_test > 0.0 && theta_test <= 1.0)) {
        fail(ErrorCode::InvalidSpec, "grokking_times: thresholds must lie in (0, 1]");
    }
    GrokkingTimes times;
    for (const EpochRecord& r : log) {
        if (!times.t_train && r.train_acc >= theta_train) {
            times.t_train = r.epoch;
        }
        if (!times.t_test && r.test_acc >= theta_test) {
            times.t_test = r.epoch;
        }
        if (times.t_train && times.t_test) {
            break;
        }
    }
    return times;
}

// ---------------------------------------------------------------------------
// Structured metric records
// ---------------------------------------------------------------------------

inline nlohmann::json metric_record(std::string_view metric, std::string_view config_hash,
                                    int epoch, std::uint64_t seed, nlohmann::json payload) {
    return {{"metric", std::string(metric)},
            {"config_hash", std::string(config_hash)},
            {"epoch", epoch},
            {"seed", seed},
            {"payload", std::move(payload)}};
}

inline nlohmann::json to_json(const MCDropoutStats& s) {
    return {{"mean_accuracy", s.mean_accuracy}, {"variance", s.variance}};
}

inline nlohmann::json to_json(const DRCCurve& c) {
    nlohmann::json points = nlohmann::json::array();
    for (const DRCPoint& p : c.points) {
        points.push_back(
            {{"rate", p.rate}, {"mean_accuracy", p.mean_accuracy}, {"variance", p.variance}});
    }
    return {{"checkpoint_epoch", c.checkpoint_epoch}, {"points", points}};
}

inline nlohmann::json to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    Matrix m(rows, cols);
    const auto& data = j.at("data");
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            m(r, c) = data.at(r).at(c).get<double>();
        }
    }
    return m;
}

inline nlohmann::json to_json(const Histogram& h) {
    return {{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}, {"total", h.total}};
}

inline Histogram histogram_from_json(const nlohmann::json& j) {
    Histogram h;
    h.lo = j.at("lo").get<double>();
    h.hi = j.at("hi").get<double>();
    h.counts = j.at("counts").get<std::vector<std::int64_t>>();
    h.total = j.at("total").get<std::int64_t>();
    return h;
}

inline nlohmann::json to_json(const DistStats& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"histogram", to_json(s.hist)}};
}

inline nlohmann::json to_json(const SparsityReport& s) {
    return {{"dead_fraction", s.dead_fraction},
            {"mean_inactive_fraction", s.mean_inactive_fraction}};
}

inline nlohmann::json to_json(const CodiagonalEnergy& e) {
    return {{"diff_energy", e.diff_energy},
            {"sum_energy", e.sum_energy},
            {"max_energy", e.max_energy()}};
}

} // namespace groklab
