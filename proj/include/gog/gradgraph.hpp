#pragma once

// Per-batch K-nearest-neighbour graph over gradient (or feature) vectors and
// its symmetric degree normalization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "gog/error.hpp"
#include "gog/numeric.hpp"

namespace gog {

struct GradientGraph {
    std::size_t k = 0;
    Matrix adjacency;   // directed KNN, binary, zero diagonal; rows sum to k
    Matrix symmetric;   // max(A, A^T)
    Matrix normalized;  // D^-1/2 (A_sym + I) D^-1/2

    std::size_t size() const { return normalized.rows(); }
};

/// Euclidean distance between every pair of rows.
inline Matrix pairwise_distances(const Matrix& g) {
    const std::size_t n = g.rows();
    Matrix d(n, n);
    for (std::size_t u = 0; u < n; ++u) {
        const auto gu = g.row_span(u);
        for (std::size_t v = u + 1; v < n; ++v) {
            const auto gv = g.row_span(v);
            double s = 0.0;
            for (std::size_t p = 0; p < gu.size(); ++p) {
                const double diff = gu[p] - gv[p];
                s += diff * diff;
            }
            d(u, v) = d(v, u) = std::sqrt(s);
        }
    }
    return d;
}

/// A[u, i] = 1 iff row i is among the K nearest rows to row u (self excluded).
/// Equal distances are broken in favour of the smaller index.
inline Matrix knn_adjacency(const Matrix& g, std::size_t k) {
    const std::size_t n = g.rows();
    if (k == 0) throw InvalidArgument("knn_adjacency: K must be at least 1");
    if (k >= n) {
        throw InvalidArgument("knn_adjacency: K (" + std::to_string(k) + ") must be smaller than the number of samples (" +
                              std::to_string(n) + ")");
    }
    if (!g.all_finite()) throw InvalidArgument("knn_adjacency: non-finite input vectors");
    const Matrix dist = pairwise_distances(g);
    Matrix a(n, n);
    std::vector<std::size_t> others(n - 1);
    for (std::size_t u = 0; u < n; ++u) {
        std::size_t w = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (i != u) others[w++] = i;
        std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end(),
                          [&](std::size_t i, std::size_t j) {
                              const double di = dist(u, i), dj = dist(u, j);
                              return di < dj || (di == dj && i < j);
                          });
        for (std::size_t t = 0; t < k; ++t) a(u, others[t]) = 1.0;
    }
    return a;
}

inline Matrix symmetrize(const Matrix& a) {
    if (a.rows() != a.cols()) throw ShapeError("symmetrize: adjacency must be square");
    Matrix s = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = std::max(a(i, j), a(j, i));
    return s;
}

/// D^-1/2 (max(A, A^T) + I) D^-1/2 with D the degree matrix of the self-looped graph.
inline Matrix normalize_adjacency(const Matrix& a) {
    if (a.rows() != a.cols()) throw ShapeError("normalize_adjacency: adjacency must be square");
    Matrix hat = symmetrize(a);
    const std::size_t n = hat.rows();
    for (std::size_t i = 0; i < n; ++i) hat(i, i) = 1.0;
    const auto degree = row_sum(hat);
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) hat(i, j) *= inv_sqrt[i] * inv_sqrt[j];
    return hat;
}

inline GradientGraph build_knn_graph(const Matrix& g, std::size_t k) {
    GradientGraph graph;
    graph.k = k;
    graph.adjacency = knn_adjacency(g, k);
    graph.symmetric = symmetrize(graph.adjacency);
    graph.normalized = normalize_adjacency(graph.adjacency);
    return graph;
}

/// Graph with no edges: normalized adjacency is the identity, so no aggregation happens.
inline GradientGraph identity_graph(std::size_t n) {
    GradientGraph graph;
    graph.adjacency = Matrix(n, n);
    graph.symmetric = Matrix(n, n);
    graph.normalized = Matrix::identity(n);
    return graph;
}

/// Writes the CSV header used by write_graph_dump.
inline void write_graph_dump_header(std::ostream& os, std::size_t dims) {
    os << "batch,sample,neighbors";
    for (std::size_t p = 0; p < dims; ++p) os << ",g" << p;
    os << '\n';
}

/// One CSV row per node: batch id, dataset sample id, ';'-separated neighbour
/// sample ids (directed KNN), then the vector the graph was built from.
inline void write_graph_dump(std::ostream& os, std::size_t batch, const GradientGraph& graph, const Matrix& g,
                             std::span<const std::size_t> sample_ids) {
    if (sample_ids.size() != g.rows() || graph.adjacency.rows() != g.rows())
        throw ShapeError("write_graph_dump: graph, vectors and ids disagree in size");
    for (std::size_t u = 0; u < g.rows(); ++u) {
        os << batch << ',' << sample_ids[u] << ',';
        bool first = true;
        for (std::size_t i = 0; i < g.rows(); ++i) {
            if (graph.adjacency(u, i) == 0.0) continue;
            if (!first) os << ';';
            os << sample_ids[i];
            first = false;
        }
        for (double v : g.row_span(u)) os << ',' << v;
        os << '\n';
    }
}

}  // namespace gog
