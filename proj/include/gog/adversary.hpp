#pragma once

// Sample-weight adversary: a one-layer graph convolution over the batch graph,
// lambda' = sigmoid(A_norm (g W0 + x W1) W2), normalized to sum to n.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gog/error.hpp"
#include "gog/numeric.hpp"

namespace gog {

/// Which inputs feed the node embedding H.
enum class EmbeddingInputs {
    GradientAndFeatures,  // H = g W0 + x W1
    FeaturesOnly,         // H = x W1
    GradientOnly,         // H = g W0
};

struct AdversaryParams {
    Matrix grad_embed;     // W0: (D*M) x r
    Matrix feature_embed;  // W1: t' x r
    Matrix output;         // W2: r x 1

    std::size_t embed_dim() const { return output.rows(); }

    std::vector<Matrix*> tensors() { return {&grad_embed, &feature_embed, &output}; }
    std::vector<const Matrix*> tensors() const { return {&grad_embed, &feature_embed, &output}; }

    AdversaryParams zeros_like() const {
        return {Matrix(grad_embed.rows(), grad_embed.cols()), Matrix(feature_embed.rows(), feature_embed.cols()),
                Matrix(output.rows(), output.cols())};
    }

    static AdversaryParams init(std::size_t grad_dim, std::size_t feature_dim, std::size_t embed_dim, Rng& rng) {
        if (embed_dim == 0) throw InvalidArgument("adversary: embedding width must be positive");
        return {glorot_uniform(grad_dim, embed_dim, rng), glorot_uniform(feature_dim, embed_dim, rng),
                glorot_uniform(embed_dim, 1, rng)};
    }
};

/// H = g W0 + x W1, or one of the single-input variants.
inline Matrix embed(const Matrix& x, const Matrix& g, const AdversaryParams& phi, EmbeddingInputs inputs) {
    switch (inputs) {
        case EmbeddingInputs::FeaturesOnly:
            return matmul(x, phi.feature_embed);
        case EmbeddingInputs::GradientOnly:
            return matmul(g, phi.grad_embed);
        case EmbeddingInputs::GradientAndFeatures:
            if (g.rows() != x.rows()) throw ShapeError("embed: gradient and feature batches differ");
            return add(matmul(g, phi.grad_embed), matmul(x, phi.feature_embed));
    }
    throw InvalidArgument("embed: unknown embedding mode");
}

/// lambda' = sigmoid(A_norm H W2); entries in (0, 1).
inline std::vector<double> gcn_forward(const Matrix& h, const Matrix& a_norm, const Matrix& w2) {
    if (a_norm.rows() != a_norm.cols() || a_norm.cols() != h.rows())
        throw ShapeError("gcn_forward: adjacency does not match embedding rows");
    if (w2.cols() != 1 || w2.rows() != h.cols()) throw ShapeError("gcn_forward: output weights must be r x 1");
    const Matrix u = matmul(a_norm, matmul(h, w2));
    std::vector<double> out(u.rows());
    for (std::size_t i = 0; i < u.rows(); ++i) out[i] = sigmoid(u(i, 0));
    return out;
}

/// lambda_i = n * lambda'_i / sum_j lambda'_j.
inline std::vector<double> normalize_weights(std::span<const double> raw) {
    if (raw.empty()) throw InvalidArgument("normalize_weights: empty input");
    double total = 0.0;
    for (double v : raw) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("normalize_weights: raw weights must be finite and nonnegative");
        total += v;
    }
    if (total <= 0.0) throw InvalidArgument("normalize_weights: raw weights are all zero");
    const double n = static_cast<double>(raw.size());
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = n * raw[i] / total;
    return out;
}

inline double weighted_objective(std::span<const double> weights, std::span<const double> losses) {
    if (weights.size() != losses.size()) throw ShapeError("weighted_objective: length mismatch");
    double j = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) j += weights[i] * losses[i];
    return j;
}

struct AdversaryOutput {
    Matrix embedding;            // H
    std::vector<double> raw;     // lambda'
    std::vector<double> weights; // lambda
};

inline AdversaryOutput adversary_forward(const Matrix& x, const Matrix& g, const Matrix& a_norm,
                                         const AdversaryParams& phi, EmbeddingInputs inputs) {
    AdversaryOutput out;
    out.embedding = embed(x, g, phi, inputs);
    out.raw = gcn_forward(out.embedding, a_norm, phi.output);
    out.weights = normalize_weights(out.raw);
    return out;
}

/// Exact gradient of J(phi) = sum_i lambda_i(phi) L_i with the losses held
/// fixed, differentiating through the sigmoid and the sum-to-n normalization.
inline AdversaryParams adversary_gradient(const Matrix& x, const Matrix& g, const Matrix& a_norm,
                                          const AdversaryParams& phi, EmbeddingInputs inputs,
                                          std::span<const double> losses) {
    const AdversaryOutput fwd = adversary_forward(x, g, a_norm, phi, inputs);
    const std::size_t n = fwd.raw.size();
    if (losses.size() != n) throw ShapeError("adversary_gradient: loss count does not match batch");

    double total = 0.0;
    for (double v : fwd.raw) total += v;
    const double j_over_n = weighted_objective(fwd.weights, losses) / static_cast<double>(n);
    const double scale = static_cast<double>(n) / total;

    Matrix du(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double d_raw = scale * (losses[i] - j_over_n);
        du(i, 0) = d_raw * fwd.raw[i] * (1.0 - fwd.raw[i]);
    }
    const Matrix dv = matmul_tn(a_norm, du);  // A^T du

    AdversaryParams grad = phi.zeros_like();
    grad.output = matmul_tn(fwd.embedding, dv);
    const Matrix dh = matmul_nt(dv, phi.output);  // n x r
    if (inputs != EmbeddingInputs::GradientOnly) grad.feature_embed = matmul_tn(x, dh);
    if (inputs != EmbeddingInputs::FeaturesOnly) grad.grad_embed = matmul_tn(g, dh);
    return grad;
}

}  // namespace gog
