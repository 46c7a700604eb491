#ifndef GCAPS_GRAPH_HPP
#define GCAPS_GRAPH_HPP

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gcaps/tensor.hpp"

namespace gcaps {

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidPermutation : public GraphError {
 public:
  using GraphError::GraphError;
};

/**
 * Weighted undirected graph with a dense adjacency and per-node features.
 *
 * The adjacency is validated on construction: square, exactly symmetric,
 * non-negative, zero diagonal. Features are N×d (d may be zero until a
 * feature policy fills them in).
 */
class Graph {
 public:
  Graph() = default;
  Graph(Tensor adjacency, Tensor node_features, std::optional<std::size_t> label = {});

  /// Unit-weight graph from an edge list; duplicate and reversed pairs collapse.
  static Graph from_edges(std::size_t num_nodes,
                          const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                          std::optional<std::size_t> label = {});

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t feature_dim() const noexcept { return features_.rank() == 2 ? features_.cols() : 0; }
  const Tensor& adjacency() const noexcept { return adjacency_; }
  const Tensor& node_features() const noexcept { return features_; }
  const std::optional<std::size_t>& label() const noexcept { return label_; }
  /// Raw discrete node labels (kept for round-tripping datasets).
  const std::optional<std::vector<long>>& node_labels() const noexcept { return node_labels_; }

  void set_node_features(Tensor features);
  void set_label(std::optional<std::size_t> label) { label_ = label; }
  void set_node_labels(std::vector<long> labels);

  std::size_t num_edges() const;
  std::vector<std::size_t> neighbors(std::size_t node) const;
  std::vector<double> degrees() const;

 private:
  std::size_t num_nodes_ = 0;
  Tensor adjacency_;
  Tensor features_;
  std::optional<std::size_t> label_;
  std::optional<std::vector<long>> node_labels_;
};

struct GraphDataset {
  std::vector<Graph> graphs;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  /// Original class values in the order of their remapped index.
  std::vector<long> class_values;

  std::size_t size() const noexcept { return graphs.size(); }
  /// Throws GraphError when a graph disagrees with the dataset-wide fields.
  void validate() const;
};

enum class FilterKind {
  laplacian,             ///< L = D - A
  normalized_laplacian,  ///< I - D^-1/2 A D^-1/2
  mean_adjacency,        ///< D̂^-1 (A + I), the neighborhood mean with self loop
};

Tensor build_laplacian(const Graph& g);
Tensor build_filter(const Graph& g, FilterKind kind);

/// [M^0, M^1, ..., M^K] with M^0 = I.
std::vector<Tensor> laplacian_powers(const Tensor& m, std::size_t max_degree);

using Permutation = std::vector<std::size_t>;

/// Node i of the input becomes node perm[i] of the result (A' = P A Pᵀ, X' = P X).
Graph permute_graph(const Graph& g, std::span<const std::size_t> perm);
Permutation inverse_permutation(std::span<const std::size_t> perm);
bool is_permutation(std::span<const std::size_t> perm);
/// Applies the same relabeling to the rows of a matrix.
Tensor permute_rows(const Tensor& m, std::span<const std::size_t> perm);
/// P M Pᵀ for a square matrix.
Tensor permute_symmetric(const Tensor& m, std::span<const std::size_t> perm);

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// All-pairs hop counts by breadth-first search; kUnreachable across components.
std::vector<std::vector<std::size_t>> graph_distance_matrix(const Graph& g);

}  // namespace gcaps

#endif  // GCAPS_GRAPH_HPP
