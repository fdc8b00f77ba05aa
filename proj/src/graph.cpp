#include "qknn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "qknn/error.hpp"
#include "qknn/parallel.hpp"

namespace qknn {

namespace {

void require_finite(const Matrix& X, const char* what) {
  for (Index r = 0; r < X.rows(); ++r) {
    for (Index c = 0; c < X.cols(); ++c) {
      if (!std::isfinite(X(r, c))) {
        std::ostringstream msg;
        msg << what << ": non-finite value at row " << r << ", column " << c;
        throw InputError(msg.str());
      }
    }
  }
}

double squared_distance(const double* a, const double* b, Index d) {
  double acc = 0.0;
  for (Index c = 0; c < d; ++c) {
    const double diff = a[c] - b[c];
    acc += diff * diff;
  }
  return acc;
}

// Union-find with path halving; the root of a set is always its smallest member.
class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }

  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

void Dataset::validate() const {
  if (X.rows() < 1 || X.cols() < 1) throw InputError("dataset must have n >= 1 and d >= 1");
  if (X.rows() != y.size()) {
    throw DimensionError("dataset: covariate rows (" + std::to_string(X.rows()) +
                         ") != response length (" + std::to_string(y.size()) + ")");
  }
  require_finite(X, "dataset covariates");
  for (Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw InputError("dataset: non-finite response at row " + std::to_string(i));
  }
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::kEuclidean:
      return "euclidean";
  }
  return "unknown";
}

KnnGraph::KnnGraph(int n, int k, std::vector<Edge> edges, Metric metric)
    : n_(n), k_(k), metric_(metric), edges_(std::move(edges)) {
  if (n_ < 1) throw ParameterError("graph must have at least one vertex");
  if (k_ < 1) throw ParameterError("graph neighbour parameter k must be >= 1");
  for (Edge& e : edges_) {
    if (e.tail == e.head) throw InputError("graph: self loop at vertex " + std::to_string(e.tail));
    if (e.tail > e.head) std::swap(e.tail, e.head);
    if (e.tail < 0 || e.head >= n_) {
      throw InputError("graph: edge (" + std::to_string(e.tail) + ", " + std::to_string(e.head) +
                       ") out of range");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw InputError("graph: duplicate edge");
  }

  offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (const Edge& e : edges_) {
    ++offsets_[e.tail + 1];
    ++offsets_[e.head + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  incidence_.resize(2 * edges_.size());
  std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
  for (int p = 0; p < num_edges(); ++p) {
    incidence_[cursor[edges_[p].tail]++] = p;
    incidence_[cursor[edges_[p].head]++] = p;
  }
}

std::span<const int> KnnGraph::incident_edges(int v) const {
  return {incidence_.data() + offsets_[v], incidence_.data() + offsets_[v + 1]};
}

int KnnGraph::degree(int v) const { return offsets_[v + 1] - offsets_[v]; }

int KnnGraph::max_degree() const {
  int best = 0;
  for (int v = 0; v < n_; ++v) best = std::max(best, degree(v));
  return best;
}

std::vector<int> nearest_neighbors(const Matrix& train, std::span<const double> point, int k,
                                   int exclude) {
  const Index n = train.rows();
  const Index d = train.cols();
  std::vector<std::pair<double, int>> candidates;
  candidates.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    if (j == exclude) continue;
    candidates.emplace_back(squared_distance(point.data(), train.row(j).data(), d), static_cast<int>(j));
  }
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
  // Pair ordering compares distance first, then index: the tie rule.
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count),
                    candidates.end());
  std::vector<int> out(count);
  for (std::size_t r = 0; r < count; ++r) out[r] = candidates[r].second;
  return out;
}

KnnGraph build_knn_graph(const Matrix& X, int k, Metric metric, int threads) {
  const Index n = X.rows();
  if (n < 2 || k < 1 || k > n - 1) {
    throw ParameterError("knn graph: K=" + std::to_string(k) + " outside [1, n-1] for n=" +
                         std::to_string(n));
  }
  require_finite(X, "knn graph covariates");

  std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    neighbors[i] = nearest_neighbors(
        X, std::span<const double>(X.row(static_cast<Index>(i)).data(), static_cast<std::size_t>(X.cols())), k,
        static_cast<int>(i));
  });

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * k);
  for (Index i = 0; i < n; ++i) {
    for (int j : neighbors[i]) {
      edges.push_back(Edge{std::min(static_cast<int>(i), j), std::max(static_cast<int>(i), j)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return KnnGraph(static_cast<int>(n), k, std::move(edges), metric);
}

void incidence_apply(const KnnGraph& graph, const Vector& theta, Vector& out) {
  if (theta.size() != graph.num_vertices()) {
    throw DimensionError("incidence_apply: vector length " + std::to_string(theta.size()) +
                         " != vertex count " + std::to_string(graph.num_vertices()));
  }
  const auto& edges = graph.edges();
  out.resize(graph.num_edges());
  for (std::size_t p = 0; p < edges.size(); ++p) {
    out[static_cast<Index>(p)] = theta[edges[p].tail] - theta[edges[p].head];
  }
}

Vector incidence_apply(const KnnGraph& graph, const Vector& theta) {
  Vector out;
  incidence_apply(graph, theta, out);
  return out;
}

void incidence_transpose_apply(const KnnGraph& graph, const Vector& w, Vector& out) {
  if (w.size() != graph.num_edges()) {
    throw DimensionError("incidence_transpose_apply: vector length " + std::to_string(w.size()) +
                         " != edge count " + std::to_string(graph.num_edges()));
  }
  const auto& edges = graph.edges();
  out.setZero(graph.num_vertices());
  for (std::size_t p = 0; p < edges.size(); ++p) {
    out[edges[p].tail] += w[static_cast<Index>(p)];
    out[edges[p].head] -= w[static_cast<Index>(p)];
  }
}

Vector incidence_transpose_apply(const KnnGraph& graph, const Vector& w) {
  Vector out;
  incidence_transpose_apply(graph, w, out);
  return out;
}

Components connected_components(const KnnGraph& graph, const std::vector<bool>& active) {
  if (static_cast<int>(active.size()) != graph.num_edges()) {
    throw DimensionError("connected_components: mask length " + std::to_string(active.size()) +
                         " != edge count " + std::to_string(graph.num_edges()));
  }
  const int n = graph.num_vertices();
  DisjointSets sets(n);
  int count = n;
  const auto& edges = graph.edges();
  for (std::size_t p = 0; p < edges.size(); ++p) {
    if (active[p] && sets.unite(edges[p].tail, edges[p].head)) --count;
  }
  Components out;
  out.count = count;
  out.labels.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) out.labels[v] = sets.find(v);
  return out;
}

Vector predict(const Matrix& train_X, const Vector& theta, const Matrix& query_X, int k) {
  const Index n = train_X.rows();
  if (theta.size() != n) throw DimensionError("predict: fitted vector length != training rows");
  if (query_X.rows() > 0 && query_X.cols() != train_X.cols()) {
    throw DimensionError("predict: query dimension != training dimension");
  }
  if (k < 1 || k > n) {
    throw ParameterError("predict: K=" + std::to_string(k) + " outside [1, n] for n=" + std::to_string(n));
  }
  require_finite(train_X, "predict training covariates");
  require_finite(query_X, "predict query covariates");

  Vector out(query_X.rows());
  for (Index q = 0; q < query_X.rows(); ++q) {
    const auto idx = nearest_neighbors(
        train_X, std::span<const double>(query_X.row(q).data(), static_cast<std::size_t>(query_X.cols())), k);
    double acc = 0.0;
    for (int i : idx) acc += theta[i];
    out[q] = acc / k;
  }
  return out;
}

void write_edge_list(std::ostream& out, const KnnGraph& graph) {
  out << "knn-graph n=" << graph.num_vertices() << " k=" << graph.k() << " m=" << graph.num_edges()
      << '\n';
  for (const Edge& e : graph.edges()) out << e.tail << ' ' << e.head << '\n';
}

KnnGraph read_edge_list(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw InputError("edge list: missing header");
  int n = 0, k = 0, m = 0;
  if (std::sscanf(header.c_str(), "knn-graph n=%d k=%d m=%d", &n, &k, &m) != 3) {
    throw InputError("edge list: malformed header '" + header + "'");
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(std::max(m, 0)));
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    Edge e{};
    if (!(row >> e.tail >> e.head)) throw InputError("edge list: malformed line " + std::to_string(line_no));
    edges.push_back(e);
  }
  if (static_cast<int>(edges.size()) != m) {
    throw InputError("edge list: header announces m=" + std::to_string(m) + " but found " +
                     std::to_string(edges.size()) + " edges");
  }
  return KnnGraph(n, k, std::move(edges));
}

}  // namespace qknn
