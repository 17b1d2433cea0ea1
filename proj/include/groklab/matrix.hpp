#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "groklab/error.hpp"
#include "groklab/rng.hpp"

namespace groklab {

// Dense row-major matrix of 64-bit reals; the carrier for every parameter,
// activation and gradient in the lab.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) {
            fail(ErrorCode::InvalidArgument, "Matrix: rows and cols must be positive, got " +
                                                 shape_string(rows, cols));
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double* row(std::size_t r) noexcept { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const noexcept { return data_.data() + r * cols_; }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape() const { return shape_string(rows_, cols_); }

    bool all_finite() const noexcept {
        for (double v : data_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    void fill(double value) {
        for (double& v : data_) {
            v = value;
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    static std::string shape_string(std::size_t rows, std::size_t cols) {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;

inline ConstMap map_of(const Matrix& m) {
    return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                    static_cast<Eigen::Index>(m.cols()));
}

inline MutMap map_of(Matrix& m) {
    return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

} // namespace detail

// out = a * b. out is resized by construction at the caller; this overload
// writes into an existing correctly-shaped matrix to let hot loops reuse
// buffers.
inline void matmul_into(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.rows()) {
        fail(ErrorCode::ShapeMismatch,
             "matmul: inner dimensions differ, " + a.shape() + " * " + b.shape());
    }
    if (out.rows() != a.rows() || out.cols() != b.cols()) {
        fail(ErrorCode::ShapeMismatch,
             "matmul: output shape " + out.shape() + " does not match " +
                 Matrix::shape_string(a.rows(), b.cols()));
    }
    detail::map_of(out).noalias() = detail::map_of(a) * detail::map_of(b);
    if (!out.all_finite()) {
        fail(ErrorCode::NonFinite, "matmul: non-finite entry in " + a.shape() + " * " + b.shape());
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        fail(ErrorCode::ShapeMismatch,
             "matmul: inner dimensions differ, " + a.shape() + " * " + b.shape());
    }
    Matrix out(a.rows(), b.cols());
    matmul_into(a, b, out);
    return out;
}

// out = a * b^T, used by backprop to avoid materializing transposes.
inline void matmul_bt_into(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.cols()) {
        fail(ErrorCode::ShapeMismatch,
             "matmul_bt: inner dimensions differ, " + a.shape() + " * (" + b.shape() + ")^T");
    }
    if (out.rows() != a.rows() || out.cols() != b.rows()) {
        fail(ErrorCode::ShapeMismatch, "matmul_bt: bad output shape " + out.shape());
    }
    detail::map_of(out).noalias() = detail::map_of(a) * detail::map_of(b).transpose();
    if (!out.all_finite()) {
        fail(ErrorCode::NonFinite, "matmul_bt: non-finite entry");
    }
}

// out = a^T * b.
inline void matmul_at_into(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.rows() != b.rows()) {
        fail(ErrorCode::ShapeMismatch,
             "matmul_at: inner dimensions differ, (" + a.shape() + ")^T * " + b.shape());
    }
    if (out.rows() != a.cols() || out.cols() != b.cols()) {
        fail(ErrorCode::ShapeMismatch, "matmul_at: bad output shape " + out.shape());
    }
    detail::map_of(out).noalias() = detail::map_of(a).transpose() * detail::map_of(b);
    if (!out.all_finite()) {
        fail(ErrorCode::NonFinite, "matmul_at: non-finite entry");
    }
}

// i.i.d. sampling specification for one parameter group or tensor.
struct DistributionSpec {
    enum class Kind { Normal, Uniform, Constant };

    Kind kind = Kind::Normal;
    double mean = 0.0;   // Normal
    double stddev = 0.0; // Normal
    double lo = 0.0;     // Uniform
    double hi = 0.0;     // Uniform
    double value = 0.0;  // Constant

    static DistributionSpec normal(double mean, double stddev) {
        DistributionSpec s;
        s.kind = Kind::Normal;
        s.mean = mean;
        s.stddev = stddev;
        return s;
    }
    static DistributionSpec uniform(double lo, double hi) {
        DistributionSpec s;
        s.kind = Kind::Uniform;
        s.lo = lo;
        s.hi = hi;
        return s;
    }
    static DistributionSpec constant(double value) {
        DistributionSpec s;
        s.kind = Kind::Constant;
        s.value = value;
        return s;
    }

    void validate() const {
        switch (kind) {
        case Kind::Normal:
            if (stddev < 0.0) {
                fail(ErrorCode::InvalidSpec,
                     "normal distribution: std must be >= 0, got " + std::to_string(stddev));
            }
            break;
        case Kind::Uniform:
            if (lo > hi) {
                fail(ErrorCode::InvalidSpec, "uniform distribution: lo " + std::to_string(lo) +
                                                 " exceeds hi " + std::to_string(hi));
            }
            break;
        case Kind::Constant:
            break;
        }
    }
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // population convention (divide by N)
};

inline MeanStd mean_std(const double* values, std::size_t count) {
    if (count == 0) {
        fail(ErrorCode::EmptyInput, "mean_std: empty input");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        sum += values[i];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = values[i] - mean;
        sq += d * d;
    }
    return {mean, std::sqrt(sq / static_cast<double>(count))};
}

inline MeanStd mean_std(const Matrix& m) { return mean_std(m.data(), m.size()); }

inline Matrix sample(const DistributionSpec& spec, std::size_t rows, std::size_t cols,
                     RngStream& rng) {
    spec.validate();
    Matrix m(rows, cols);
    switch (spec.kind) {
    case DistributionSpec::Kind::Normal:
        for (double& v : m.values()) {
            v = rng.normal(spec.mean, spec.stddev);
        }
        break;
    case DistributionSpec::Kind::Uniform:
        for (double& v : m.values()) {
            v = rng.uniform(spec.lo, spec.hi);
        }
        break;
    case DistributionSpec::Kind::Constant:
        m.fill(spec.value);
        break;
    }
    return m;
}

} // namespace groklab
