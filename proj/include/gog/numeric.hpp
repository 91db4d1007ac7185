#pragma once

// Dense row-major matrices, activations, losses and the seeded generator
// shared by every other module.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gog/error.hpp"

namespace gog {

/// Floor applied to probabilities before taking a logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) throw ShapeError("Matrix dimensions must be positive");
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows == 0 || cols == 0) throw ShapeError("Matrix dimensions must be positive");
        if (data_.size() != rows * cols) throw ShapeError("Matrix data size does not match shape");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        if (rows_ == 0 || cols_ == 0) throw ShapeError("Matrix dimensions must be positive");
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ShapeError("ragged initializer for Matrix");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix column(std::span<const double> v) {
        return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
    }

    static Matrix row(std::span<const double> v) {
        return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row_span(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row_span(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {
inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}
}  // namespace detail

/// A * B.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.data().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += aik * brow[j];
        }
    }
    return out;
}

/// A^T * B without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* brow = b.data().data() + k * n;
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            double* o = out.data().data() + i * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += aki * brow[j];
        }
    }
    return out;
}

/// A * B^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ar = a.row_span(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto br = b.row_span(j);
            double s = 0.0;
            for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
            out(i, j) = s;
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "add");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "subtract");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

/// Elementwise product.
inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

inline Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

/// a += s * b
inline void axpy(Matrix& a, double s, const Matrix& b) {
    detail::require_same_shape(a, b, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += s * b.data()[i];
}

inline Matrix outer(std::span<const double> u, std::span<const double> v) {
    Matrix out(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out(i, j) = u[i] * v[j];
    return out;
}

/// Sum of each row, as a column of length rows().
inline std::vector<double> row_sum(const Matrix& a) {
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (double v : a.row_span(i)) out[i] += v;
    return out;
}

/// Sum of each column, as a vector of length cols().
inline std::vector<double> col_sum(const Matrix& a) {
    std::vector<double> out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row_span(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
    }
    return out;
}

/// Rows of `a` selected by `idx`, in order.
inline Matrix gather_rows(const Matrix& a, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
        std::copy_n(a.row_span(idx[i]).begin(), a.cols(), out.row_span(i).begin());
    }
    return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// ---------------------------------------------------------------------------
// Activations and losses

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

/// Numerically stable softmax (max-subtracted).
inline std::vector<double> softmax(std::span<const double> v) {
    if (v.empty()) throw ShapeError("softmax: empty input");
    for (double x : v)
        if (!std::isfinite(x)) throw InvalidArgument("softmax: non-finite input");
    const double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

/// Row-wise softmax of a logits matrix.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto p = softmax(logits.row_span(i));
        std::copy(p.begin(), p.end(), out.row_span(i).begin());
    }
    return out;
}

/// -sum_d y_d log(max(p_d, floor)) for a one-hot label.
inline double cross_entropy(std::span<const double> pred, std::span<const double> label) {
    if (pred.size() != label.size()) throw ShapeError("cross_entropy: dimension mismatch");
    double loss = 0.0;
    for (std::size_t d = 0; d < pred.size(); ++d)
        if (label[d] != 0.0) loss -= label[d] * std::log(std::max(pred[d], kProbabilityFloor));
    return loss;
}

/// Cross-entropy against an integer class index.
inline double cross_entropy(std::span<const double> pred, std::size_t label) {
    if (label >= pred.size()) throw ShapeError("cross_entropy: label out of range");
    return -std::log(std::max(pred[label], kProbabilityFloor));
}

inline std::vector<double> one_hot(std::size_t label, std::size_t classes) {
    if (label >= classes) throw ShapeError("one_hot: label out of range");
    std::vector<double> v(classes, 0.0);
    v[label] = 1.0;
    return v;
}

// ---------------------------------------------------------------------------
// Randomness

/// Seeded pseudo-random stream. Identical seed gives an identical stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), engine_);
    }

    /// Derives an independent child stream; used to give subsystems their own generators.
    Rng split(std::uint64_t stream) const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        std::uint32_t words[2];
        seq.generate(words, words + 2);
        return Rng((static_cast<std::uint64_t>(words[0]) << 32) | words[1]);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Matrix m(fan_in, fan_out);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : m.data()) v = rng.uniform(-limit, limit);
    return m;
}

// ---------------------------------------------------------------------------
// Small statistics helpers

inline double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double sample_stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Pearson correlation; NaN when either input has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace gog
