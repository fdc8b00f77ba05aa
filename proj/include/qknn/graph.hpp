#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "qknn/types.hpp"

namespace qknn {

// Regression input: one covariate row per observation plus the response.
struct Dataset {
  Matrix X;
  Vector y;

  Index n() const { return X.rows(); }
  Index d() const { return X.cols(); }

  // Throws InputError/DimensionError if the invariants do not hold.
  void validate() const;
};

enum class Metric { kEuclidean };

std::string_view metric_name(Metric metric);

// Undirected edge, always stored with tail < head. In the oriented incidence
// operator the tail carries +1 and the head -1.
struct Edge {
  int tail;
  int head;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Immutable undirected graph with a fixed edge order. Built either from a
// K-nearest-neighbour scan or from an explicit edge list.
class KnnGraph {
 public:
  // Validates and sorts `edges`; rejects self loops, duplicates and
  // out-of-range endpoints. Pairs may be given in either orientation.
  KnnGraph(int n, int k, std::vector<Edge> edges, Metric metric = Metric::kEuclidean);

  int num_vertices() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int k() const { return k_; }
  Metric metric() const { return metric_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Edge ids incident to vertex v.
  std::span<const int> incident_edges(int v) const;
  int degree(int v) const;
  int max_degree() const;

 private:
  int n_;
  int k_;
  Metric metric_;
  std::vector<Edge> edges_;
  std::vector<int> offsets_;
  std::vector<int> incidence_;
};

// Symmetric K-NN graph: (i, j) is an edge iff i is among the K nearest
// neighbours of j or j among those of i. Distance ties go to the smaller
// vertex index. Exact O(n^2 d) scan, split across `threads` workers.
KnnGraph build_knn_graph(const Matrix& X, int k, Metric metric = Metric::kEuclidean,
                         int threads = 1);

// Indices of the K training rows nearest to `point` (ties by smaller index),
// ordered by increasing distance. `exclude` skips one row (-1 for none).
std::vector<int> nearest_neighbors(const Matrix& train, std::span<const double> point, int k,
                                   int exclude = -1);

// (grad theta)_p = theta_tail - theta_head for edge p.
Vector incidence_apply(const KnnGraph& graph, const Vector& theta);
void incidence_apply(const KnnGraph& graph, const Vector& theta, Vector& out);

// Adjoint of incidence_apply.
Vector incidence_transpose_apply(const KnnGraph& graph, const Vector& w);
void incidence_transpose_apply(const KnnGraph& graph, const Vector& w, Vector& out);

struct Components {
  int count = 0;
  // labels[v] is the smallest vertex index in v's component.
  std::vector<int> labels;
};

// Components of the subgraph that keeps edge p iff active[p] is true.
Components connected_components(const KnnGraph& graph, const std::vector<bool>& active);

// K-NN prediction: average of fitted values over the K training points
// nearest to each query row.
Vector predict(const Matrix& train_X, const Vector& theta, const Matrix& query_X, int k);

// Edge-list text format: header `knn-graph n=<n> k=<k> m=<m>` followed by one
// `i j` line per edge, 0-based.
void write_edge_list(std::ostream& out, const KnnGraph& graph);
KnnGraph read_edge_list(std::istream& in);

}  // namespace qknn
