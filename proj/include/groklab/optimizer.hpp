#pragma once

#include <cmath>
#include <cstdint>

#include "groklab/error.hpp"
#include "groklab/model.hpp"

namespace groklab {

struct OptHyper {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1.0;

    void validate() const {
        if (!(lr > 0.0)) {
            fail(ErrorCode::InvalidSpec, "OptHyper: lr must be > 0");
        }
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            fail(ErrorCode::InvalidSpec, "OptHyper: betas must lie in [0, 1)");
        }
        if (weight_decay < 0.0) {
            fail(ErrorCode::InvalidSpec, "OptHyper: weight_decay must be >= 0");
        }
    }
};

struct AdamWState {
    Gradients m;
    Gradients v;
    std::int64_t step = 0;

    static AdamWState zeros(const ModelDims& dims) {
        AdamWState s;
        s.m = ModelParams::zeros(dims);
        s.v = ModelParams::zeros(dims);
        return s;
    }
};

namespace detail {

inline void adamw_update_group(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                               const OptHyper& hyper, double bias1, double bias2) {
    double* w = param.data();
    const double* g = grad.data();
    double* mm = m.data();
    double* vv = v.data();
    const double decay = hyper.lr * hyper.weight_decay;
    for (std::size_t i = 0; i < param.size(); ++i) {
        mm[i] = hyper.beta1 * mm[i] + (1.0 - hyper.beta1) * g[i];
        vv[i] = hyper.beta2 * vv[i] + (1.0 - hyper.beta2) * g[i] * g[i];
        const double m_hat = mm[i] / bias1;
        const double v_hat = vv[i] / bias2;
        w[i] -= hyper.lr * (m_hat / (std::sqrt(v_hat) + hyper.eps)) + decay * w[i];
    }
}

} // namespace detail

// One AdamW step with decoupled weight decay. Decay applies to weights and
// biases of every unfrozen group; frozen groups are left untouched, moments
// included. A non-finite gradient aborts before any mutation.
inline void adamw_step(ModelParams& params, const Gradients& grads, AdamWState& state,
                       const OptHyper& hyper, const Variant& variant = Variant{}) {
    hyper.validate();
    if (!params.same_shape(grads) || !params.same_shape(state.m) ||
        !params.same_shape(state.v)) {
        fail(ErrorCode::ShapeMismatch, "adamw_step: parameter/gradient/state shapes disagree");
    }
    if (!grads.all_finite()) {
        fail(ErrorCode::NonFinite, "adamw_step: poisoned gradient (non-finite entry), step " +
                                       std::to_string(state.step + 1) + " aborted");
    }
    state.step += 1;
    const double bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));

    if (!variant.freeze_embedding) {
        detail::adamw_update_group(params.embedding, grads.embedding, state.m.embedding,
                                   state.v.embedding, hyper, bias1, bias2);
    }
    if (!variant.freeze_non_embedding) {
        detail::adamw_update_group(params.w1, grads.w1, state.m.w1, state.v.w1, hyper, bias1,
                                   bias2);
        detail::adamw_update_group(params.b1, grads.b1, state.m.b1, state.v.b1, hyper, bias1,
                                   bias2);
        detail::adamw_update_group(params.w2, grads.w2, state.m.w2, state.v.w2, hyper, bias1,
                                   bias2);
        detail::adamw_update_group(params.b2, grads.b2, state.m.b2, state.v.b2, hyper, bias1,
                                   bias2);
    }
}

} // namespace groklab
