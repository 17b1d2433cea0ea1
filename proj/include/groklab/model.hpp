#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "groklab/dataset.hpp"
#include "groklab/error.hpp"
#include "groklab/matrix.hpp"
#include "groklab/rng.hpp"

namespace groklab {

// P-way modular task, embedding width d, hidden width H. The hidden layer
// consumes the concatenation of two embeddings, so its input width is 2d.
struct ModelDims {
    int vocab = 53;      // P
    int embed_dim = 128; // d
    int hidden = 256;    // H

    void validate() const {
        if (vocab < 2 || embed_dim < 1 || hidden < 1) {
            fail(ErrorCode::InvalidArgument,
                 "ModelDims: require vocab >= 2, embed_dim >= 1, hidden >= 1");
        }
    }
};

// Initialization of one parameter group. XavierNormal resolves to
// N(0, alpha * sqrt(2 / (n_in + n_out))) with the fan sizes taken from the
// matrix being initialized; biases share their layer's sigma.
struct GroupInit {
    enum class Kind { XavierNormal, Normal, Uniform, Constant };

    Kind kind = Kind::XavierNormal;
    double alpha = 1.0;
    double mean = 0.0;
    double stddev = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double value = 0.0;

    static GroupInit xavier(double alpha = 1.0) {
        GroupInit g;
        g.kind = Kind::XavierNormal;
        g.alpha = alpha;
        return g;
    }
    static GroupInit normal(double mean, double stddev) {
        GroupInit g;
        g.kind = Kind::Normal;
        g.mean = mean;
        g.stddev = stddev;
        return g;
    }
    static GroupInit uniform(double lo, double hi) {
        GroupInit g;
        g.kind = Kind::Uniform;
        g.lo = lo;
        g.hi = hi;
        return g;
    }
    static GroupInit constant(double value) {
        GroupInit g;
        g.kind = Kind::Constant;
        g.value = value;
        return g;
    }

    void validate() const {
        switch (kind) {
        case Kind::XavierNormal:
            if (alpha < 1.0) {
                fail(ErrorCode::InvalidSpec,
                     "xavier_normal: scale alpha must be >= 1, got " + std::to_string(alpha));
            }
            break;
        case Kind::Normal:
            if (stddev < 0.0) {
                fail(ErrorCode::InvalidSpec, "normal init: std must be >= 0");
            }
            break;
        case Kind::Uniform:
            if (lo > hi) {
                fail(ErrorCode::InvalidSpec, "uniform init: lo exceeds hi");
            }
            break;
        case Kind::Constant:
            break;
        }
    }

    DistributionSpec resolve(std::size_t n_in, std::size_t n_out) const {
        validate();
        switch (kind) {
        case Kind::XavierNormal:
            return DistributionSpec::normal(
                0.0, alpha * std::sqrt(2.0 / static_cast<double>(n_in + n_out)));
        case Kind::Normal:
            return DistributionSpec::normal(mean, stddev);
        case Kind::Uniform:
            return DistributionSpec::uniform(lo, hi);
        case Kind::Constant:
            return DistributionSpec::constant(value);
        }
        fail(ErrorCode::InvalidSpec, "unreachable init kind");
    }
};

// One GroupInit per parameter group: embedding table, first affine layer
// (weights and biases), second affine layer.
struct InitSpec {
    GroupInit embedding = GroupInit::xavier();
    GroupInit layer1 = GroupInit::xavier();
    GroupInit layer2 = GroupInit::xavier();

    void validate() const {
        embedding.validate();
        layer1.validate();
        layer2.validate();
    }
};

// Architecture ablations. Freeze flags exclude the group from gradient
// updates entirely (including weight decay).
struct Variant {
    bool relu_after_embedding = false;
    bool freeze_embedding = false;
    bool freeze_non_embedding = false;
};

struct DropoutSpec {
    enum class Placement { Hidden, HiddenAndEmbedding };

    double rate = 0.3;
    Placement placement = Placement::Hidden;

    void validate() const {
        if (!(rate >= 0.0 && rate < 1.0)) {
            fail(ErrorCode::InvalidSpec,
                 "dropout rate must lie in [0, 1), got " + std::to_string(rate));
        }
    }
};

// The complete learnable state.
struct ModelParams {
    Matrix embedding; // P x d
    Matrix w1;        // 2d x H
    Matrix b1;        // 1 x H
    Matrix w2;        // H x P
    Matrix b2;        // 1 x P

    bool same_shape(const ModelParams& o) const {
        return embedding.same_shape(o.embedding) && w1.same_shape(o.w1) &&
               b1.same_shape(o.b1) && w2.same_shape(o.w2) && b2.same_shape(o.b2);
    }

    bool all_finite() const {
        return embedding.all_finite() && w1.all_finite() && b1.all_finite() &&
               w2.all_finite() && b2.all_finite();
    }

    ModelDims dims() const {
        ModelDims d;
        d.vocab = static_cast<int>(embedding.rows());
        d.embed_dim = static_cast<int>(embedding.cols());
        d.hidden = static_cast<int>(w1.cols());
        return d;
    }

    static ModelParams zeros(const ModelDims& dims) {
        dims.validate();
        const auto p = static_cast<std::size_t>(dims.vocab);
        const auto d = static_cast<std::size_t>(dims.embed_dim);
        const auto h = static_cast<std::size_t>(dims.hidden);
        ModelParams out;
        out.embedding = Matrix(p, d);
        out.w1 = Matrix(2 * d, h);
        out.b1 = Matrix(1, h);
        out.w2 = Matrix(h, p);
        out.b2 = Matrix(1, p);
        return out;
    }
};

using Gradients = ModelParams;

// Every stochastic consumer draws from its own labeled stream, so changing
// one group's init spec never shifts the draws of another.
inline ModelParams init_params(const ModelDims& dims, const InitSpec& spec,
                               std::uint64_t master_seed) {
    dims.validate();
    spec.validate();
    const auto p = static_cast<std::size_t>(dims.vocab);
    const auto d = static_cast<std::size_t>(dims.embed_dim);
    const auto h = static_cast<std::size_t>(dims.hidden);

    ModelParams params;
    {
        RngStream rng(master_seed, "init.embedding");
        params.embedding = sample(spec.embedding.resolve(p, d), p, d, rng);
    }
    {
        RngStream rng(master_seed, "init.w1");
        params.w1 = sample(spec.layer1.resolve(2 * d, h), 2 * d, h, rng);
    }
    {
        RngStream rng(master_seed, "init.b1");
        params.b1 = sample(spec.layer1.resolve(2 * d, h), 1, h, rng);
    }
    {
        RngStream rng(master_seed, "init.w2");
        params.w2 = sample(spec.layer2.resolve(h, p), h, p, rng);
    }
    {
        RngStream rng(master_seed, "init.b2");
        params.b2 = sample(spec.layer2.resolve(h, p), 1, p, rng);
    }
    return params;
}

// Backprop cache for one forward pass. Matrices are resized lazily so a
// trace can be reused across epochs without reallocation.
struct ForwardTrace {
    std::vector<int> lhs_tokens;
    std::vector<int> rhs_tokens;
    Matrix embed_raw;    // batch x 2d, concatenated embeddings before relu/dropout
    Matrix embed_in;     // batch x 2d, actual input to the first layer
    Matrix hidden_pre;   // batch x H
    Matrix hidden_act;   // batch x H, post-ReLU post-dropout
    Matrix mask_embed;   // batch x 2d, present iff dropout at embedding placement
    Matrix mask_hidden;  // batch x H, present iff dropout active
    Matrix logits;       // batch x P
    bool has_mask_embed = false;
    bool has_mask_hidden = false;

    std::size_t batch_size() const noexcept { return lhs_tokens.size(); }
};

namespace detail {

inline void ensure_shape(Matrix& m, std::size_t rows, std::size_t cols) {
    if (m.rows() != rows || m.cols() != cols) {
        m = Matrix(rows, cols);
    }
}

inline void add_row_broadcast(Matrix& m, const Matrix& row) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double* out = m.row(r);
        const double* b = row.row(0);
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out[c] += b[c];
        }
    }
}

inline void fill_dropout_mask(Matrix& mask, double rate, RngStream& rng) {
    const double scale = 1.0 / (1.0 - rate);
    for (double& v : mask.values()) {
        v = (rng.next_unit() >= rate) ? scale : 0.0;
    }
}

} // namespace detail

// logits = dropout(ReLU(concat(E[i], E[j]) . W1 + b1)) . W2 + b2, with the
// optional embedding-side ReLU/dropout controlled by variant and spec.
// Dropout with rate zero takes the exact no-dropout path.
inline void forward_into(const ModelParams& params, const Variant& variant,
                         std::span<const Example> batch,
                         const DropoutSpec* dropout, RngStream* rng,
                         ForwardTrace& trace) {
    if (batch.empty()) {
        fail(ErrorCode::EmptyInput, "forward: empty batch");
    }
    const std::size_t vocab = params.embedding.rows();
    const std::size_t d = params.embedding.cols();
    const std::size_t h = params.w1.cols();
    const std::size_t n = batch.size();
    if (params.w1.rows() != 2 * d) {
        fail(ErrorCode::ShapeMismatch, "forward: w1 rows " + params.w1.shape() +
                                           " incompatible with embedding " +
                                           params.embedding.shape());
    }

    const bool drop_active = dropout != nullptr && dropout->rate > 0.0;
    if (drop_active) {
        dropout->validate();
        if (rng == nullptr) {
            fail(ErrorCode::MissingRng, "forward: dropout with rate > 0 requires an rng stream");
        }
    }

    trace.lhs_tokens.resize(n);
    trace.rhs_tokens.resize(n);
    detail::ensure_shape(trace.embed_raw, n, 2 * d);
    for (std::size_t r = 0; r < n; ++r) {
        const int lhs = batch[r].lhs;
        const int rhs = batch[r].rhs;
        if (lhs < 0 || rhs < 0 || static_cast<std::size_t>(lhs) >= vocab ||
            static_cast<std::size_t>(rhs) >= vocab) {
            fail(ErrorCode::OutOfVocabulary,
                 "forward: token id out of range at batch row " + std::to_string(r));
        }
        trace.lhs_tokens[r] = lhs;
        trace.rhs_tokens[r] = rhs;
        double* out = trace.embed_raw.row(r);
        const double* e_lhs = params.embedding.row(static_cast<std::size_t>(lhs));
        const double* e_rhs = params.embedding.row(static_cast<std::size_t>(rhs));
        std::copy(e_lhs, e_lhs + d, out);
        std::copy(e_rhs, e_rhs + d, out + d);
    }

    detail::ensure_shape(trace.embed_in, n, 2 * d);
    if (variant.relu_after_embedding) {
        const double* src = trace.embed_raw.data();
        double* dst = trace.embed_in.data();
        for (std::size_t i = 0; i < trace.embed_raw.size(); ++i) {
            dst[i] = src[i] > 0.0 ? src[i] : 0.0;
        }
    } else {
        trace.embed_in.values() = trace.embed_raw.values();
    }

    trace.has_mask_embed =
        drop_active && dropout->placement == DropoutSpec::Placement::HiddenAndEmbedding;
    if (trace.has_mask_embed) {
        detail::ensure_shape(trace.mask_embed, n, 2 * d);
        detail::fill_dropout_mask(trace.mask_embed, dropout->rate, *rng);
        double* x = trace.embed_in.data();
        const double* m = trace.mask_embed.data();
        for (std::size_t i = 0; i < trace.embed_in.size(); ++i) {
            x[i] *= m[i];
        }
    }

    detail::ensure_shape(trace.hidden_pre, n, h);
    matmul_into(trace.embed_in, params.w1, trace.hidden_pre);
    detail::add_row_broadcast(trace.hidden_pre, params.b1);

    detail::ensure_shape(trace.hidden_act, n, h);
    {
        const double* src = trace.hidden_pre.data();
        double* dst = trace.hidden_act.data();
        for (std::size_t i = 0; i < trace.hidden_pre.size(); ++i) {
            dst[i] = src[i] > 0.0 ? src[i] : 0.0;
        }
    }

    trace.has_mask_hidden = drop_active;
    if (trace.has_mask_hidden) {
        detail::ensure_shape(trace.mask_hidden, n, h);
        detail::fill_dropout_mask(trace.mask_hidden, dropout->rate, *rng);
        double* a = trace.hidden_act.data();
        const double* m = trace.mask_hidden.data();
        for (std::size_t i = 0; i < trace.hidden_act.size(); ++i) {
            a[i] *= m[i];
        }
    }

    detail::ensure_shape(trace.logits, n, vocab);
    matmul_into(trace.hidden_act, params.w2, trace.logits);
    detail::add_row_broadcast(trace.logits, params.b2);
}

inline ForwardTrace forward(const ModelParams& params, const Variant& variant,
                            std::span<const Example> batch,
                            const DropoutSpec* dropout = nullptr,
                            RngStream* rng = nullptr) {
    ForwardTrace trace;
    forward_into(params, variant, batch, dropout, rng, trace);
    return trace;
}

struct LossAccuracy {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Mean cross-entropy via log-sum-exp plus argmax accuracy; argmax ties break
// toward the lowest class index.
inline LossAccuracy loss_and_accuracy(const Matrix& logits, std::span<const Example> batch) {
    if (batch.empty() || logits.rows() == 0) {
        fail(ErrorCode::EmptyInput, "loss_and_accuracy: empty batch");
    }
    if (logits.rows() != batch.size()) {
        fail(ErrorCode::ShapeMismatch, "loss_and_accuracy: logits rows " + logits.shape() +
                                           " vs batch size " + std::to_string(batch.size()));
    }
    const std::size_t classes = logits.cols();
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const int label = batch[r].label;
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            fail(ErrorCode::OutOfVocabulary,
                 "loss_and_accuracy: label out of range at row " + std::to_string(r));
        }
        const double* row = logits.row(r);
        double max_v = row[0];
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (row[c] > max_v) {
                max_v = row[c];
                argmax = c;
            }
        }
        double sum_exp = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            sum_exp += std::exp(row[c] - max_v);
        }
        loss_sum += max_v + std::log(sum_exp) - row[static_cast<std::size_t>(label)];
        if (argmax == static_cast<std::size_t>(label)) {
            ++correct;
        }
    }
    LossAccuracy out;
    out.loss = loss_sum / static_cast<double>(logits.rows());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(logits.rows());
    return out;
}

// Scratch buffers for backward, reusable across calls.
struct BackwardScratch {
    Matrix dlogits;
    Matrix dhidden;
    Matrix dembed;
};

// Exact gradients of the mean cross-entropy w.r.t. every unfrozen group;
// frozen groups come back zero. Dropout masks recorded in the trace are
// replayed, never resampled.
inline void backward_into(const ModelParams& params, const Variant& variant,
                          const ForwardTrace& trace, std::span<const Example> batch,
                          Gradients& grads, BackwardScratch& scratch) {
    const std::size_t n = trace.batch_size();
    if (n == 0) {
        fail(ErrorCode::EmptyInput, "backward: empty trace");
    }
    if (batch.size() != n) {
        fail(ErrorCode::ShapeMismatch, "backward: batch size " + std::to_string(batch.size()) +
                                           " vs trace batch " + std::to_string(n));
    }
    const std::size_t vocab = params.embedding.rows();
    const std::size_t d = params.embedding.cols();
    const std::size_t h = params.w1.cols();
    if (trace.logits.rows() != n || trace.logits.cols() != vocab ||
        trace.hidden_pre.cols() != h || trace.embed_in.cols() != 2 * d) {
        fail(ErrorCode::ShapeMismatch, "backward: trace shapes do not match params");
    }

    detail::ensure_shape(grads.embedding, vocab, d);
    detail::ensure_shape(grads.w1, 2 * d, h);
    detail::ensure_shape(grads.b1, 1, h);
    detail::ensure_shape(grads.w2, h, vocab);
    detail::ensure_shape(grads.b2, 1, vocab);

    // dlogits = (softmax(logits) - onehot(label)) / n
    detail::ensure_shape(scratch.dlogits, n, vocab);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = trace.logits.row(r);
        double* out = scratch.dlogits.row(r);
        double max_v = row[0];
        for (std::size_t c = 1; c < vocab; ++c) {
            max_v = std::max(max_v, row[c]);
        }
        double sum_exp = 0.0;
        for (std::size_t c = 0; c < vocab; ++c) {
            out[c] = std::exp(row[c] - max_v);
            sum_exp += out[c];
        }
        const double inv_sum = 1.0 / sum_exp;
        for (std::size_t c = 0; c < vocab; ++c) {
            out[c] *= inv_sum * inv_n;
        }
        const int label = batch[r].label;
        if (label < 0 || static_cast<std::size_t>(label) >= vocab) {
            fail(ErrorCode::OutOfVocabulary, "backward: label out of range");
        }
        out[static_cast<std::size_t>(label)] -= inv_n;
    }

    const bool need_weights = !variant.freeze_non_embedding;
    const bool need_embedding = !variant.freeze_embedding;

    if (need_weights) {
        for (std::size_t c = 0; c < vocab; ++c) {
            grads.b2(0, c) = 0.0;
        }
        for (std::size_t r = 0; r < n; ++r) {
            const double* row = scratch.dlogits.row(r);
            double* out = grads.b2.row(0);
            for (std::size_t c = 0; c < vocab; ++c) {
                out[c] += row[c];
            }
        }
        matmul_at_into(trace.hidden_act, scratch.dlogits, grads.w2);
    } else {
        grads.w2.fill(0.0);
        grads.b2.fill(0.0);
    }

    // dhidden flows through dropout mask then the ReLU gate.
    detail::ensure_shape(scratch.dhidden, n, h);
    matmul_bt_into(scratch.dlogits, params.w2, scratch.dhidden);
    if (trace.has_mask_hidden) {
        double* dh = scratch.dhidden.data();
        const double* m = trace.mask_hidden.data();
        for (std::size_t i = 0; i < scratch.dhidden.size(); ++i) {
            dh[i] *= m[i];
        }
    }
    {
        double* dh = scratch.dhidden.data();
        const double* pre = trace.hidden_pre.data();
        for (std::size_t i = 0; i < scratch.dhidden.size(); ++i) {
            if (pre[i] <= 0.0) {
                dh[i] = 0.0;
            }
        }
    }

    if (need_weights) {
        for (std::size_t c = 0; c < h; ++c) {
            grads.b1(0, c) = 0.0;
        }
        for (std::size_t r = 0; r < n; ++r) {
            const double* row = scratch.dhidden.row(r);
            double* out = grads.b1.row(0);
            for (std::size_t c = 0; c < h; ++c) {
                out[c] += row[c];
            }
        }
        matmul_at_into(trace.embed_in, scratch.dhidden, grads.w1);
    } else {
        grads.w1.fill(0.0);
        grads.b1.fill(0.0);
    }

    grads.embedding.fill(0.0);
    if (need_embedding) {
        detail::ensure_shape(scratch.dembed, n, 2 * d);
        matmul_bt_into(scratch.dhidden, params.w1, scratch.dembed);
        if (trace.has_mask_embed) {
            double* dx = scratch.dembed.data();
            const double* m = trace.mask_embed.data();
            for (std::size_t i = 0; i < scratch.dembed.size(); ++i) {
                dx[i] *= m[i];
            }
        }
        if (variant.relu_after_embedding) {
            double* dx = scratch.dembed.data();
            const double* raw = trace.embed_raw.data();
            for (std::size_t i = 0; i < scratch.dembed.size(); ++i) {
                if (raw[i] <= 0.0) {
                    dx[i] = 0.0;
                }
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            const double* dx = scratch.dembed.row(r);
            double* e_lhs = grads.embedding.row(static_cast<std::size_t>(trace.lhs_tokens[r]));
            double* e_rhs = grads.embedding.row(static_cast<std::size_t>(trace.rhs_tokens[r]));
            for (std::size_t c = 0; c < d; ++c) {
                e_lhs[c] += dx[c];
                e_rhs[c] += dx[d + c];
            }
        }
    }
}

inline Gradients backward(const ModelParams& params, const Variant& variant,
                          const ForwardTrace& trace, std::span<const Example> batch) {
    Gradients grads;
    BackwardScratch scratch;
    backward_into(params, variant, trace, batch, grads, scratch);
    return grads;
}

} // namespace groklab
