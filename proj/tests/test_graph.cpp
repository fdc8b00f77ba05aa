#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "qknn/error.hpp"
#include "qknn/graph.hpp"
#include "qknn/rng.hpp"

namespace qknn {
namespace {

Matrix random_points(int n, int d, std::uint64_t seed) {
  CounterRng rng(seed, 7);
  Matrix X(n, d);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) X(i, c) = rng.uniform();
  }
  return X;
}

Matrix line_points(std::initializer_list<double> xs) {
  Matrix X(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) X(i++, 0) = x;
  return X;
}

std::set<std::pair<int, int>> edge_set(const KnnGraph& g) {
  std::set<std::pair<int, int>> out;
  for (const Edge& e : g.edges()) out.emplace(e.tail, e.head);
  return out;
}

TEST(KnnGraph, LineExampleK1) {
  const KnnGraph g = build_knn_graph(line_points({0.0, 1.0, 3.0}), 1);
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(KnnGraph, SymmetricOrRuleAddsReverseEdge) {
  // 0's nearest is 1, 1's nearest is 0, 2's nearest is 1 but 1 does not pick 2.
  const KnnGraph g = build_knn_graph(line_points({0.0, 1.0, 3.0, 10.0}), 1);
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}}));
}

TEST(KnnGraph, TiesGoToSmallerIndex) {
  // Vertex 1 is equidistant from 0 and 2.
  const KnnGraph g = build_knn_graph(line_points({0.0, 1.0, 2.0}), 1);
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
  const auto nn = nearest_neighbors(line_points({0.0, 1.0, 2.0}), std::vector<double>{1.0}, 1, 1);
  EXPECT_EQ(nn, std::vector<int>{0});
}

TEST(KnnGraph, DuplicateRowsAreNeighbours) {
  const KnnGraph g = build_knn_graph(line_points({0.5, 0.5, 0.9}), 1);
  EXPECT_TRUE(edge_set(g).count({0, 1}));
}

TEST(KnnGraph, MatchesBruteForce) {
  for (int n : {2, 7, 50, 200}) {
    for (int k : {1, 3, 5}) {
      if (k > n - 1) continue;
      const Matrix X = random_points(n, 3, static_cast<std::uint64_t>(n * 10 + k));
      const KnnGraph g = build_knn_graph(X, k);
      EXPECT_EQ(edge_set(g), oracle::knn_edges(X, k)) << "n=" << n << " k=" << k;
    }
  }
}

TEST(KnnGraph, MatchesBruteForceWithTiesOnLattice) {
  Matrix X(36, 2);
  for (int i = 0; i < 36; ++i) {
    X(i, 0) = i % 6;
    X(i, 1) = i / 6;
  }
  for (int k : {1, 2, 4, 6}) EXPECT_EQ(edge_set(build_knn_graph(X, k)), oracle::knn_edges(X, k)) << k;
}

TEST(KnnGraph, IndependentOfThreadCount) {
  const Matrix X = random_points(150, 2, 3);
  const KnnGraph one = build_knn_graph(X, 5, Metric::kEuclidean, 1);
  const KnnGraph four = build_knn_graph(X, 5, Metric::kEuclidean, 4);
  EXPECT_EQ(one.edges(), four.edges());
}

TEST(KnnGraph, StructuralInvariants) {
  const Matrix X = random_points(120, 2, 11);
  const int k = 5;
  const KnnGraph g = build_knn_graph(X, k);
  EXPECT_LE(g.num_edges(), 120 * k);
  EXPECT_GE(g.num_edges(), 120 * k / 2);
  EXPECT_TRUE(std::is_sorted(g.edges().begin(), g.edges().end()));
  for (const Edge& e : g.edges()) EXPECT_LT(e.tail, e.head);
  int degree_sum = 0;
  for (int v = 0; v < g.num_vertices(); ++v) {
    EXPECT_GE(g.degree(v), k);
    degree_sum += g.degree(v);
    for (int p : g.incident_edges(v)) {
      const Edge& e = g.edges()[p];
      EXPECT_TRUE(e.tail == v || e.head == v);
    }
  }
  EXPECT_EQ(degree_sum, 2 * g.num_edges());
}

TEST(KnnGraph, RejectsBadK) {
  const Matrix X = random_points(5, 2, 1);
  EXPECT_THROW(build_knn_graph(X, 0), ParameterError);
  EXPECT_THROW(build_knn_graph(X, 5), ParameterError);
  EXPECT_NO_THROW(build_knn_graph(X, 4));
}

TEST(KnnGraph, RejectsNonFiniteCovariates) {
  Matrix X = random_points(5, 2, 1);
  X(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(build_knn_graph(X, 2), InputError);
}

TEST(KnnGraph, ExplicitEdgeValidation) {
  EXPECT_THROW(KnnGraph(3, 1, {{0, 0}}), InputError);
  EXPECT_THROW(KnnGraph(3, 1, {{0, 3}}), InputError);
  EXPECT_THROW(KnnGraph(3, 1, {{0, 1}, {1, 0}}), InputError);
  const KnnGraph g(3, 1, {{2, 1}, {1, 0}});
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(Incidence, PathExample) {
  const KnnGraph g(3, 1, {{0, 1}, {1, 2}});
  const Vector theta = (Vector(3) << 1.0, 4.0, 2.0).finished();
  const Vector diff = incidence_apply(g, theta);
  EXPECT_DOUBLE_EQ(diff[0], -3.0);
  EXPECT_DOUBLE_EQ(diff[1], 2.0);
  const Vector back = incidence_transpose_apply(g, (Vector(2) << 1.0, 1.0).finished());
  EXPECT_DOUBLE_EQ(back[0], 1.0);
  EXPECT_DOUBLE_EQ(back[1], 0.0);
  EXPECT_DOUBLE_EQ(back[2], -1.0);
}

TEST(Incidence, AdjointIdentity) {
  const KnnGraph g = build_knn_graph(random_points(80, 2, 5), 4);
  CounterRng rng(9, 1);
  for (int trial = 0; trial < 10; ++trial) {
    Vector x(g.num_vertices());
    Vector w(g.num_edges());
    for (Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
    for (Index p = 0; p < w.size(); ++p) w[p] = rng.normal();
    const double lhs = incidence_apply(g, x).dot(w);
    const double rhs = x.dot(incidence_transpose_apply(g, w));
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)));
  }
}

TEST(Incidence, ConstantsInNullSpace) {
  const KnnGraph g = build_knn_graph(random_points(40, 2, 2), 3);
  EXPECT_EQ(incidence_apply(g, Vector::Constant(40, 2.5)).cwiseAbs().maxCoeff(), 0.0);
  // Columns of the transpose sum to zero: every edge adds +1 and -1.
  const Vector w = Vector::LinSpaced(g.num_edges(), -1.0, 3.0);
  EXPECT_NEAR(incidence_transpose_apply(g, w).sum(), 0.0, 1e-10);
}

TEST(Components, MaskExamples) {
  const KnnGraph g(5, 1, {{0, 1}, {1, 2}, {3, 4}});
  Components all = connected_components(g, {true, true, true});
  EXPECT_EQ(all.count, 2);
  EXPECT_EQ(all.labels, (std::vector<int>{0, 0, 0, 3, 3}));
  Components none = connected_components(g, {false, false, false});
  EXPECT_EQ(none.count, 5);
  Components some = connected_components(g, {true, false, true});
  EXPECT_EQ(some.count, 3);
  EXPECT_EQ(some.labels, (std::vector<int>{0, 0, 2, 3, 3}));
  EXPECT_THROW(connected_components(g, {true}), DimensionError);
}

TEST(Components, MatchesDepthFirstSearch) {
  const KnnGraph g = build_knn_graph(random_points(60, 2, 4), 2);
  CounterRng rng(4, 2);
  std::vector<bool> mask(static_cast<std::size_t>(g.num_edges()));
  for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = rng.uniform() < 0.3;
  // Oracle: repeated DFS over the adjacency of kept edges.
  std::vector<std::vector<int>> adj(60);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    adj[g.edges()[p].tail].push_back(g.edges()[p].head);
    adj[g.edges()[p].head].push_back(g.edges()[p].tail);
  }
  std::vector<int> label(60, -1);
  int count = 0;
  for (int s = 0; s < 60; ++s) {
    if (label[s] >= 0) continue;
    ++count;
    std::vector<int> stack{s};
    label[s] = s;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (label[w] < 0) {
          label[w] = s;
          stack.push_back(w);
        }
      }
    }
  }
  const Components c = connected_components(g, mask);
  EXPECT_EQ(c.count, count);
  EXPECT_EQ(c.labels, label);
}

TEST(Predict, AveragesNearestFittedValues) {
  const Matrix train = line_points({0.0, 1.0, 2.0, 10.0});
  const Vector theta = (Vector(4) << 1.0, 2.0, 4.0, 100.0).finished();
  const Vector out = predict(train, theta, line_points({0.9, 9.0}), 2);
  EXPECT_DOUBLE_EQ(out[0], 1.5);
  EXPECT_DOUBLE_EQ(out[1], 52.0);
}

TEST(Predict, MatchesBruteForce) {
  const Matrix train = random_points(70, 2, 8);
  const Matrix query = random_points(15, 2, 9);
  Vector theta(70);
  for (int i = 0; i < 70; ++i) theta[i] = std::sin(3.0 * i);
  const Vector out = predict(train, theta, query, 5);
  for (int q = 0; q < 15; ++q) {
    std::vector<std::pair<double, int>> all;
    for (int j = 0; j < 70; ++j) {
      double acc = 0.0;
      for (int c = 0; c < 2; ++c) acc += (train(j, c) - query(q, c)) * (train(j, c) - query(q, c));
      all.emplace_back(acc, j);
    }
    std::sort(all.begin(), all.end());
    double mean = 0.0;
    for (int r = 0; r < 5; ++r) mean += theta[all[r].second] / 5.0;
    EXPECT_NEAR(out[q], mean, 1e-12);
  }
}

TEST(Predict, Errors) {
  const Matrix train = random_points(5, 2, 1);
  EXPECT_THROW(predict(train, Vector::Zero(4), random_points(1, 2, 2), 2), DimensionError);
  EXPECT_THROW(predict(train, Vector::Zero(5), random_points(1, 3, 2), 2), DimensionError);
  EXPECT_THROW(predict(train, Vector::Zero(5), random_points(1, 2, 2), 6), ParameterError);
}

TEST(EdgeList, RoundTrip) {
  const KnnGraph g = build_knn_graph(random_points(30, 2, 6), 3);
  std::stringstream buffer;
  write_edge_list(buffer, g);
  std::string header;
  std::getline(std::stringstream(buffer.str()), header);
  EXPECT_EQ(header, "knn-graph n=30 k=3 m=" + std::to_string(g.num_edges()));
  const KnnGraph back = read_edge_list(buffer);
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_EQ(back.k(), 3);
  EXPECT_EQ(back.num_vertices(), 30);
}

TEST(EdgeList, RejectsMalformedInput) {
  std::stringstream no_header("0 1\n");
  EXPECT_THROW(read_edge_list(no_header), InputError);
  std::stringstream short_list("knn-graph n=3 k=1 m=2\n0 1\n");
  EXPECT_THROW(read_edge_list(short_list), InputError);
  std::stringstream bad_line("knn-graph n=3 k=1 m=1\n0 x\n");
  EXPECT_THROW(read_edge_list(bad_line), InputError);
}

TEST(Dataset, Validate) {
  Dataset ok{random_points(4, 2, 1), Vector::Zero(4)};
  EXPECT_NO_THROW(ok.validate());
  Dataset mismatch{random_points(4, 2, 1), Vector::Zero(3)};
  EXPECT_THROW(mismatch.validate(), DimensionError);
  Dataset nan{random_points(4, 2, 1), Vector::Zero(4)};
  nan.y[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(nan.validate(), InputError);
}

}  // namespace
}  // namespace qknn
