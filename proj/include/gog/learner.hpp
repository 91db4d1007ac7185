#pragma once

// MLP learner h(x) = softmax(z(x) W) with ReLU hidden layers, hand-derived
// backpropagation, and the per-sample gradient features consumed by the
// adversary.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gog/error.hpp"
#include "gog/numeric.hpp"

namespace gog {

struct DenseLayer {
    Matrix weights;  // in x out
    Matrix bias;     // 1 x out
};

/// theta = (W, V): hidden layers V and a bias-free last layer W of shape D x M.
/// The same type holds gradients with respect to the parameters.
struct LearnerParams {
    std::vector<DenseLayer> hidden;
    Matrix last;
    double dropout = 0.0;

    std::size_t input_dim() const { return hidden.empty() ? last.rows() : hidden.front().weights.rows(); }
    std::size_t representation_dim() const { return last.rows(); }
    std::size_t num_classes() const { return last.cols(); }

    /// Every trainable tensor, in a fixed order (hidden layers first, last layer at the end).
    std::vector<Matrix*> tensors() {
        std::vector<Matrix*> out;
        for (auto& l : hidden) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
        }
        out.push_back(&last);
        return out;
    }
    std::vector<const Matrix*> tensors() const {
        std::vector<const Matrix*> out;
        for (const auto& l : hidden) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
        }
        out.push_back(&last);
        return out;
    }

    /// Same shapes, all zeros, no dropout.
    LearnerParams zeros_like() const {
        LearnerParams g;
        for (const auto& l : hidden)
            g.hidden.push_back({Matrix(l.weights.rows(), l.weights.cols()), Matrix(1, l.bias.cols())});
        g.last = Matrix(last.rows(), last.cols());
        return g;
    }

    void validate() const {
        if (last.empty()) throw ShapeError("learner: missing last layer");
        if (last.cols() < 2) throw ShapeError("learner: need at least two output classes");
        std::size_t width = hidden.empty() ? last.rows() : hidden.front().weights.rows();
        for (const auto& l : hidden) {
            if (l.weights.rows() != width) throw ShapeError("learner: hidden layer width mismatch");
            if (l.bias.rows() != 1 || l.bias.cols() != l.weights.cols())
                throw ShapeError("learner: bias shape mismatch");
            width = l.weights.cols();
        }
        if (width != last.rows()) throw ShapeError("learner: last hidden width must equal D");
        if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("learner: dropout must be in [0, 1)");
    }

    /// Glorot-uniform weights, zero biases.
    static LearnerParams init(std::size_t input_dim, std::span<const std::size_t> hidden_sizes,
                              std::size_t classes, double dropout, Rng& rng) {
        LearnerParams p;
        p.dropout = dropout;
        std::size_t in = input_dim;
        for (std::size_t h : hidden_sizes) {
            p.hidden.push_back({glorot_uniform(in, h, rng), Matrix(1, h)});
            in = h;
        }
        p.last = glorot_uniform(in, classes, rng);
        p.validate();
        return p;
    }
};

/// Everything the backward pass and the adversary need from one forward pass.
struct ForwardRecord {
    Matrix input;               // n x t'
    std::vector<Matrix> pre;    // pre-activation of each hidden layer
    std::vector<Matrix> post;   // activation after ReLU and dropout
    std::vector<Matrix> masks;  // inverted-dropout multipliers; empty outside train mode
    Matrix logits;              // n x M
    Matrix probs;               // n x M
    std::vector<int> labels;
    std::vector<double> losses;

    std::size_t batch_size() const { return input.rows(); }
    /// z(x; V): the last representation (the input itself for a network with no hidden layer).
    const Matrix& representation() const { return post.empty() ? input : post.back(); }
};

inline ForwardRecord forward(const Matrix& x, std::span<const int> labels,
                             const LearnerParams& theta, bool train_mode, Rng* rng = nullptr) {
    if (x.cols() != theta.input_dim()) throw ShapeError("forward: feature width does not match first layer");
    if (labels.size() != x.rows()) throw ShapeError("forward: label count does not match batch");
    const bool use_dropout = train_mode && theta.dropout > 0.0;
    if (use_dropout && rng == nullptr) throw InvalidArgument("forward: dropout in train mode needs an Rng");

    ForwardRecord rec;
    rec.input = x;
    rec.labels.assign(labels.begin(), labels.end());
    const Matrix* in = &rec.input;
    for (const auto& layer : theta.hidden) {
        Matrix pre = matmul(*in, layer.weights);
        for (std::size_t i = 0; i < pre.rows(); ++i) {
            auto r = pre.row_span(i);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] += layer.bias(0, j);
        }
        Matrix act(pre.rows(), pre.cols());
        for (std::size_t k = 0; k < pre.size(); ++k) act.data()[k] = relu(pre.data()[k]);
        if (use_dropout) {
            const double keep = 1.0 - theta.dropout;
            Matrix mask(pre.rows(), pre.cols());
            for (double& m : mask.data()) m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
            act = hadamard(act, mask);
            rec.masks.push_back(std::move(mask));
        }
        rec.pre.push_back(std::move(pre));
        rec.post.push_back(std::move(act));
        in = &rec.post.back();
    }
    rec.logits = matmul(*in, theta.last);
    rec.probs = softmax_rows(rec.logits);
    rec.losses.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) rec.losses[i] = cross_entropy(rec.probs.row_span(i), static_cast<std::size_t>(labels[i]));
    return rec;
}

/// dL/dW = z (y_hat - y)^T for one sample: a D x M matrix.
inline Matrix last_layer_gradient(std::span<const double> z, std::span<const double> y_hat,
                                  std::span<const double> y) {
    if (y_hat.size() != y.size()) throw ShapeError("last_layer_gradient: prediction/label size mismatch");
    std::vector<double> err(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) err[j] = y_hat[j] - y[j];
    return outer(z, err);
}

/// g[d * M + j] = z_d * |y_hat_j - y_j|. Row-major over (d, j).
inline std::vector<double> undirected_gradient(std::span<const double> z, std::span<const double> y_hat,
                                               std::span<const double> y) {
    if (y_hat.size() != y.size()) throw ShapeError("undirected_gradient: prediction/label size mismatch");
    const std::size_t m = y.size();
    std::vector<double> g(z.size() * m);
    for (std::size_t d = 0; d < z.size(); ++d)
        for (std::size_t j = 0; j < m; ++j) g[d * m + j] = z[d] * std::abs(y_hat[j] - y[j]);
    return g;
}

/// Undirected last-layer gradient of every sample in the batch: n x (D * M).
inline Matrix last_layer_gradient_features(const ForwardRecord& rec) {
    const Matrix& z = rec.representation();
    const std::size_t m = rec.probs.cols();
    Matrix g(rec.batch_size(), z.cols() * m);
    for (std::size_t i = 0; i < rec.batch_size(); ++i) {
        auto zi = z.row_span(i);
        auto pi = rec.probs.row_span(i);
        auto out = g.row_span(i);
        for (std::size_t d = 0; d < zi.size(); ++d)
            for (std::size_t j = 0; j < m; ++j) {
                const double err = pi[j] - (rec.labels[i] == static_cast<int>(j) ? 1.0 : 0.0);
                out[d * m + j] = zi[d] * std::abs(err);
            }
    }
    return g;
}

namespace detail {

struct BackwardResult {
    LearnerParams grads;
    std::vector<Matrix> pre_grads;  // dJ/d(pre-activation) per hidden layer
};

inline BackwardResult backpropagate(const ForwardRecord& rec, std::span<const double> weights,
                                    const LearnerParams& theta) {
    const std::size_t n = rec.batch_size();
    if (weights.size() != n) throw ShapeError("backward: weight vector length must equal batch size");
    for (double w : weights)
        if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("backward: weights must be finite and nonnegative");

    BackwardResult out;
    out.grads = theta.zeros_like();
    out.pre_grads.resize(theta.hidden.size());

    Matrix delta = rec.probs;
    for (std::size_t i = 0; i < n; ++i) {
        delta(i, static_cast<std::size_t>(rec.labels[i])) -= 1.0;
        for (double& v : delta.row_span(i)) v *= weights[i];
    }
    out.grads.last = matmul_tn(rec.representation(), delta);
    if (theta.hidden.empty()) return out;

    Matrix d = matmul_nt(delta, theta.last);
    for (std::size_t l = theta.hidden.size(); l-- > 0;) {
        if (!rec.masks.empty()) d = hadamard(d, rec.masks[l]);
        const Matrix& pre = rec.pre[l];
        for (std::size_t k = 0; k < d.size(); ++k)
            if (pre.data()[k] <= 0.0) d.data()[k] = 0.0;
        const Matrix& layer_in = l == 0 ? rec.input : rec.post[l - 1];
        out.grads.hidden[l].weights = matmul_tn(layer_in, d);
        const auto bias = col_sum(d);
        out.grads.hidden[l].bias = Matrix::row(bias);
        Matrix next;
        if (l > 0) next = matmul_nt(d, theta.hidden[l].weights);
        out.pre_grads[l] = std::move(d);
        d = std::move(next);
    }
    return out;
}

}  // namespace detail

/// Gradient of J = sum_i weights_i * L_i with respect to every learner parameter.
/// The weights are constants here.
inline LearnerParams backward(const ForwardRecord& rec, std::span<const double> weights,
                              const LearnerParams& theta) {
    return detail::backpropagate(rec, weights, theta).grads;
}

/// First-layer analogue of the undirected gradient:
/// g[p * w1 + q] = x_p * |dL/d pre1_q|, one row per sample (unweighted losses).
inline Matrix first_layer_gradient_features(const ForwardRecord& rec, const LearnerParams& theta) {
    if (theta.hidden.empty()) throw InvalidArgument("first-layer features need at least one hidden layer");
    const std::vector<double> ones(rec.batch_size(), 1.0);
    const auto bp = detail::backpropagate(rec, ones, theta);
    const Matrix& delta = bp.pre_grads.front();
    const std::size_t w1 = delta.cols();
    Matrix g(rec.batch_size(), rec.input.cols() * w1);
    for (std::size_t i = 0; i < rec.batch_size(); ++i) {
        auto xi = rec.input.row_span(i);
        auto di = delta.row_span(i);
        auto out = g.row_span(i);
        for (std::size_t p = 0; p < xi.size(); ++p)
            for (std::size_t q = 0; q < w1; ++q) out[p * w1 + q] = xi[p] * std::abs(di[q]);
    }
    return g;
}

/// Class probabilities in evaluation mode (no dropout).
inline Matrix predict_proba(const Matrix& x, const LearnerParams& theta) {
    const std::vector<int> dummy(x.rows(), 0);
    return forward(x, dummy, theta, false).probs;
}

}  // namespace gog
