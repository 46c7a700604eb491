#include "gcaps/graph.hpp"

#include <cmath>
#include <queue>
#include <string>

namespace gcaps {

Graph::Graph(Tensor adjacency, Tensor node_features, std::optional<std::size_t> label)
    : adjacency_(std::move(adjacency)), label_(label) {
  if (adjacency_.rank() != 2 || adjacency_.rows() != adjacency_.cols()) {
    throw GraphError("graph: adjacency must be square, got " +
                     shape_to_string(adjacency_.shape()));
  }
  num_nodes_ = adjacency_.rows();
  if (num_nodes_ == 0) throw GraphError("graph: at least one node is required");
  for (std::size_t i = 0; i < num_nodes_; ++i) {
    if (adjacency_(i, i) != 0.0) {
      throw GraphError("graph: self-loop at node " + std::to_string(i));
    }
    for (std::size_t j = 0; j < num_nodes_; ++j) {
      const double w = adjacency_(i, j);
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw GraphError("graph: invalid edge weight at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
      }
      if (w != adjacency_(j, i)) {
        throw GraphError("graph: adjacency not symmetric at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
      }
    }
  }
  if (node_features.empty() && node_features.rank() == 0) node_features = Tensor({num_nodes_, 0});
  set_node_features(std::move(node_features));
}

Graph Graph::from_edges(std::size_t num_nodes,
                        const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                        std::optional<std::size_t> label) {
  Tensor adj({num_nodes, num_nodes});
  for (auto [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw GraphError("graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                       ") outside " + std::to_string(num_nodes) + " nodes");
    }
    if (u == v) throw GraphError("graph: self-loop at node " + std::to_string(u));
    adj(u, v) = 1.0;
    adj(v, u) = 1.0;
  }
  return Graph(std::move(adj), Tensor({num_nodes, 0}), label);
}

void Graph::set_node_features(Tensor features) {
  if (features.rank() != 2 || features.rows() != num_nodes_) {
    throw GraphError("graph: feature matrix " + shape_to_string(features.shape()) +
                     " does not have " + std::to_string(num_nodes_) + " rows");
  }
  features_ = std::move(features);
}

void Graph::set_node_labels(std::vector<long> labels) {
  if (labels.size() != num_nodes_) {
    throw GraphError("graph: " + std::to_string(labels.size()) + " node labels for " +
                     std::to_string(num_nodes_) + " nodes");
  }
  node_labels_ = std::move(labels);
}

std::size_t Graph::num_edges() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < num_nodes_; ++i)
    for (std::size_t j = i + 1; j < num_nodes_; ++j)
      if (adjacency_(i, j) != 0.0) ++count;
  return count;
}

std::vector<std::size_t> Graph::neighbors(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < num_nodes_; ++j)
    if (adjacency_(node, j) != 0.0) out.push_back(j);
  return out;
}

std::vector<double> Graph::degrees() const {
  std::vector<double> deg(num_nodes_, 0.0);
  for (std::size_t i = 0; i < num_nodes_; ++i)
    for (std::size_t j = 0; j < num_nodes_; ++j) deg[i] += adjacency_(i, j);
  return deg;
}

void GraphDataset::validate() const {
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const Graph& g = graphs[k];
    if (g.feature_dim() != feature_dim) {
      throw GraphError("dataset: graph " + std::to_string(k) + " has feature dim " +
                       std::to_string(g.feature_dim()) + ", expected " +
                       std::to_string(feature_dim));
    }
    if (g.label() && *g.label() >= num_classes) {
      throw GraphError("dataset: graph " + std::to_string(k) + " label " +
                       std::to_string(*g.label()) + " outside " + std::to_string(num_classes) +
                       " classes");
    }
  }
}

Tensor build_laplacian(const Graph& g) {
  const std::size_t n = g.num_nodes();
  const Tensor& a = g.adjacency();
  Tensor lap({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      deg += a(i, j);
      lap(i, j) = -a(i, j);
    }
    lap(i, i) = deg;
  }
  return lap;
}

Tensor build_filter(const Graph& g, FilterKind kind) {
  const std::size_t n = g.num_nodes();
  const Tensor& a = g.adjacency();
  const std::vector<double> deg = g.degrees();
  switch (kind) {
    case FilterKind::laplacian:
      return build_laplacian(g);
    case FilterKind::normalized_laplacian: {
      Tensor m({n, n});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double d = deg[i] * deg[j];
          m(i, j) = (d > 0.0) ? -a(i, j) / std::sqrt(d) : 0.0;
        }
        m(i, i) = deg[i] > 0.0 ? 1.0 : 0.0;
      }
      return m;
    }
    case FilterKind::mean_adjacency: {
      Tensor m({n, n});
      for (std::size_t i = 0; i < n; ++i) {
        const double inv = 1.0 / (deg[i] + 1.0);
        for (std::size_t j = 0; j < n; ++j) m(i, j) = a(i, j) * inv;
        m(i, i) = inv;
      }
      return m;
    }
  }
  throw GraphError("graph: unknown filter kind");
}

std::vector<Tensor> laplacian_powers(const Tensor& m, std::size_t max_degree) {
  if (m.rank() != 2 || m.rows() != m.cols()) {
    throw ShapeError("laplacian_powers: expected a square matrix, got " +
                     shape_to_string(m.shape()));
  }
  std::vector<Tensor> powers;
  powers.reserve(max_degree + 1);
  powers.push_back(Tensor::identity(m.rows()));
  for (std::size_t k = 1; k <= max_degree; ++k) powers.push_back(matmul(powers.back(), m));
  return powers;
}

bool is_permutation(std::span<const std::size_t> perm) {
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

namespace {

void require_permutation(std::span<const std::size_t> perm, std::size_t n) {
  if (perm.size() != n) {
    throw InvalidPermutation("permutation: length " + std::to_string(perm.size()) +
                             " does not match " + std::to_string(n) + " nodes");
  }
  if (!is_permutation(perm)) throw InvalidPermutation("permutation: not a bijection");
}

}  // namespace

Permutation inverse_permutation(std::span<const std::size_t> perm) {
  require_permutation(perm, perm.size());
  Permutation inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

Tensor permute_rows(const Tensor& m, std::span<const std::size_t> perm) {
  const std::size_t rows = m.dim(0);
  require_permutation(perm, rows);
  const std::size_t width = rows ? m.size() / rows : 0;
  Tensor out(m.shape());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < width; ++j) out[perm[i] * width + j] = m[i * width + j];
  return out;
}

Tensor permute_symmetric(const Tensor& m, std::span<const std::size_t> perm) {
  const std::size_t n = m.rows();
  require_permutation(perm, n);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(perm[i], perm[j]) = m(i, j);
  return out;
}

Graph permute_graph(const Graph& g, std::span<const std::size_t> perm) {
  require_permutation(perm, g.num_nodes());
  Graph out(permute_symmetric(g.adjacency(), perm), permute_rows(g.node_features(), perm),
            g.label());
  if (g.node_labels()) {
    std::vector<long> labels(g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) labels[perm[i]] = (*g.node_labels())[i];
    out.set_node_labels(std::move(labels));
  }
  return out;
}

std::vector<std::vector<std::size_t>> graph_distance_matrix(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) adj[i] = g.neighbors(i);

  std::vector<std::vector<std::size_t>> dist(n, std::vector<std::size_t>(n, kUnreachable));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> frontier;
    dist[s][s] = 0;
    frontier.push(s);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v : adj[u]) {
        if (dist[s][v] == kUnreachable) {
          dist[s][v] = dist[s][u] + 1;
          frontier.push(v);
        }
      }
    }
  }
  return dist;
}

}  // namespace gcaps
