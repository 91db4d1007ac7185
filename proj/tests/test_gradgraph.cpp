#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gog/gradgraph.hpp"
#include "oracles.hpp"

using namespace gog;

namespace {

void expect_graph_invariants(const GradientGraph& g) {
    const std::size_t n = g.size();
    for (std::size_t u = 0; u < n; ++u) {
        EXPECT_EQ(g.adjacency(u, u), 0.0);
        double out = 0.0, deg = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            out += g.adjacency(u, i);
            deg += g.symmetric(u, i);
            EXPECT_EQ(g.symmetric(u, i), std::max(g.adjacency(u, i), g.adjacency(i, u)));
            EXPECT_EQ(g.normalized(u, i), g.normalized(i, u));
            EXPECT_GE(g.normalized(u, i), 0.0);
            EXPECT_LE(g.normalized(u, i), 1.0);
        }
        EXPECT_EQ(out, static_cast<double>(g.k));
        EXPECT_GE(deg, static_cast<double>(g.k + 1));
        EXPECT_LE(deg, static_cast<double>(n));
    }
}

}  // namespace

TEST(PairwiseDistances, IdenticalVectorsAreZero) {
    const Matrix g(4, 3, 0.7);
    const Matrix d = pairwise_distances(g);
    for (double v : d.data()) EXPECT_EQ(v, 0.0);
}

TEST(PairwiseDistances, ThreeFourFive) {
    const Matrix d = pairwise_distances(Matrix{{0.0, 0.0}, {3.0, 4.0}});
    EXPECT_EQ(d(0, 1), 5.0);
    EXPECT_EQ(d(1, 0), 5.0);
    EXPECT_EQ(d(0, 0), 0.0);
}

TEST(PairwiseDistances, MatchesNaiveOracleAndIsAMetric) {
    Rng rng(1);
    const Matrix g = oracle::random_matrix(8, 3, rng);
    const Matrix d = pairwise_distances(g);
    for (std::size_t u = 0; u < 8; ++u)
        for (std::size_t v = 0; v < 8; ++v) {
            double s = 0.0;
            for (std::size_t p = 0; p < 3; ++p) s += std::pow(g(u, p) - g(v, p), 2);
            EXPECT_NEAR(d(u, v), std::sqrt(s), 1e-10);
            EXPECT_EQ(d(u, v), d(v, u));
            for (std::size_t w = 0; w < 8; ++w) EXPECT_LE(d(u, w), d(u, v) + d(v, w) + 1e-12);
        }
}

TEST(KnnAdjacency, OneDimensionalExample) {
    const Matrix a = knn_adjacency(Matrix{{0.0}, {1.0}, {3.0}}, 1);
    EXPECT_EQ(a, (Matrix{{0, 1, 0}, {1, 0, 0}, {0, 1, 0}}));
}

TEST(KnnAdjacency, FullNeighbourhoodIsCompleteGraph) {
    Rng rng(2);
    const Matrix a = knn_adjacency(oracle::random_matrix(6, 2, rng), 5);
    for (std::size_t u = 0; u < 6; ++u)
        for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a(u, i), u == i ? 0.0 : 1.0);
}

TEST(KnnAdjacency, TiesGoToSmallerIndex) {
    const Matrix a = knn_adjacency(Matrix(4, 2, 1.5), 2);
    EXPECT_EQ(a, (Matrix{{0, 1, 1, 0}, {1, 0, 1, 0}, {1, 1, 0, 0}, {1, 1, 0, 0}}));
}

TEST(KnnAdjacency, RejectsBadK) {
    const Matrix g(3, 2);
    EXPECT_THROW(knn_adjacency(g, 3), InvalidArgument);
    EXPECT_THROW(knn_adjacency(g, 0), InvalidArgument);
    Matrix bad(3, 2);
    bad(1, 1) = NAN;
    EXPECT_THROW(knn_adjacency(bad, 1), InvalidArgument);
}

TEST(KnnAdjacencyProperty, MatchesBruteForceSort) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.index(30), p = 1 + rng.index(6), k = 1 + rng.index(n - 1);
        Matrix g = oracle::random_matrix(n, p, rng);
        if (trial % 4 == 0)  // coarse grid so that ties actually occur
            for (double& v : g.data()) v = std::round(v);
        EXPECT_EQ(knn_adjacency(g, k), oracle::brute_knn(g, k)) << "trial " << trial;
    }
}

TEST(NormalizeAdjacency, IsolatedNode) {
    EXPECT_EQ(normalize_adjacency(Matrix{{0.0}}), (Matrix{{1.0}}));
}

TEST(NormalizeAdjacency, TwoConnectedNodes) {
    const Matrix n = normalize_adjacency(Matrix{{0.0, 1.0}, {0.0, 0.0}});
    for (double v : n.data()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(NormalizeAdjacencyProperty, PreservesDegreeDirection) {
    Rng rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 3 + rng.index(20), k = 1 + rng.index(n - 1);
        const auto graph = build_knn_graph(oracle::random_matrix(n, 3, rng), k);
        expect_graph_invariants(graph);
        // A_norm D^1/2 1 = D^1/2 1
        std::vector<double> root(n);
        for (std::size_t i = 0; i < n; ++i) {
            double deg = 1.0;
            for (std::size_t j = 0; j < n; ++j) deg += graph.symmetric(i, j);
            root[i] = std::sqrt(deg);
        }
        const Matrix out = matmul(graph.normalized, Matrix::column(root));
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(out(i, 0), root[i], 1e-12);
    }
}

TEST(IdentityGraph, NormalizedIsIdentity) {
    const auto g = identity_graph(5);
    EXPECT_EQ(g.normalized, Matrix::identity(5));
}

TEST(GraphDump, RowsListNeighbours) {
    const Matrix g{{0.0}, {1.0}, {3.0}};
    const auto graph = build_knn_graph(g, 1);
    std::ostringstream os;
    write_graph_dump_header(os, 1);
    const std::vector<std::size_t> ids{10, 11, 12};
    write_graph_dump(os, 0, graph, g, ids);
    EXPECT_EQ(os.str(), "batch,sample,neighbors,g0\n0,10,11,0\n0,11,10,1\n0,12,11,3\n");
}
