#ifndef GCAPS_LAYERS_HPP
#define GCAPS_LAYERS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "gcaps/autodiff.hpp"
#include "gcaps/graph.hpp"
#include "gcaps/tensor.hpp"

namespace gcaps {

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/**
 * Weight blocks of one moment-capsule layer.
 *
 * Block (q, k) maps the q-th Hadamard power of the flattened input, after
 * filtering with the k-th filter power, to `out_dim` features. Blocks are
 * stored with q running slowest: index (q - 1) * (degree + 1) + k.
 */
struct CapsuleLayerParams {
  std::size_t in_width = 0;  // h_in * p_in
  std::size_t out_dim = 0;
  std::size_t order = 1;     // P
  std::size_t degree = 0;    // K
  std::vector<Tensor> blocks;

  static CapsuleLayerParams glorot(std::size_t in_width, std::size_t out_dim,
                                   std::size_t order, std::size_t degree, Rng& rng);

  std::size_t block_index(std::size_t q, std::size_t k) const { return (q - 1) * (degree + 1) + k; }
  const Tensor& block(std::size_t q, std::size_t k) const { return blocks.at(block_index(q, k)); }
  Tensor& block(std::size_t q, std::size_t k) { return blocks.at(block_index(q, k)); }
};

struct DenseLayerParams {
  Tensor weight;  // in × out
  Tensor bias;    // out

  static DenseLayerParams glorot(std::size_t in_dim, std::size_t out_dim, Rng& rng);
};

/// Collapses every axis after the first: N×h×p becomes N×(h·p).
Var flatten_nodes(Var x);

/**
 * Moment-capsule graph convolution.
 *
 * For every order q in 1..P: σ(Σ_k M^k · x_flat^{⊙q} · W_qk), stacked along a
 * trailing axis into N×h_out×P. `blocks` follows CapsuleLayerParams layout
 * and `filter_powers` holds [M^0 .. M^K].
 */
Var graph_capsule_forward(Var x, std::span<const Var> filter_powers, std::span<const Var> blocks,
                          Activation activation);
Tensor graph_capsule_forward(const Tensor& x, std::span<const Tensor> filter_powers,
                             const CapsuleLayerParams& params, Activation activation);

/// Polynomial-filter convolution σ(Σ_k M^k X W_k); the single-order capsule layer without the trailing axis.
Var graph_conv_forward(Var x, std::span<const Var> filter_powers, std::span<const Var> weights,
                       Activation activation);
Tensor graph_conv_forward(const Tensor& x, std::span<const Tensor> filter_powers,
                          std::span<const Tensor> weights, Activation activation);

Var dense_forward(Var x, Var weight, Var bias);

// Node-level oracles for the aggregation semantics. Neighborhoods include the
// node itself with self-weight 1.
double scalar_conv_reference(std::size_t node, const Graph& g, std::span<const double> x);
std::vector<double> moment_capsule_reference(std::size_t node, const Graph& g,
                                             std::span<const double> x, std::size_t order);

/// Column means followed by the row-major upper triangle (diagonal included)
/// of the biased covariance. Length F + F(F+1)/2.
Var covariance_readout(Var h);
Tensor covariance_readout(const Tensor& h);
std::size_t covariance_readout_size(std::size_t features);

/// Column means only, length F.
Var mean_readout(Var h);

Var concat_intermediate(std::span<const Var> per_layer_outputs);
Tensor concat_intermediate(std::span<const Tensor> per_layer_outputs);

/// Node indices ordered by the last column, descending; ties keep index order.
std::vector<std::size_t> max_sort_order(const Tensor& h);
/// Top-k entries of the last column in descending order, zero padded.
Tensor max_sort_readout(const Tensor& h, std::size_t k);

enum class ReadoutKind { covariance, max_sort };

/// Fixed random capsule stack shared by both graphs of a feature test.
struct DiagnosticStack {
  std::vector<CapsuleLayerParams> layers;
  std::size_t filter_degree = 1;
  Activation activation = Activation::tanh;

  static DiagnosticStack random(std::size_t feature_dim, unsigned long long seed,
                                std::size_t depth = 2, std::size_t hidden = 4,
                                std::size_t order = 2, std::size_t filter_degree = 1);
  /// Concatenated per-layer outputs, N×Σ(h·P).
  Tensor node_features(const Graph& g) const;
};

/// What a readout coordinate compares: a feature pair for covariance, a node for max-sort.
struct ReadoutCoordinate {
  enum class Kind { mean, covariance, rank, padding };
  Kind kind = Kind::mean;
  std::size_t first = 0;
  std::size_t second = 0;
  bool operator==(const ReadoutCoordinate&) const = default;
};

struct FeatureTestReport {
  ReadoutKind readout = ReadoutKind::covariance;
  Tensor features_small;
  Tensor features_large;
  std::vector<ReadoutCoordinate> coordinates_small;
  std::vector<ReadoutCoordinate> coordinates_large;
  /// Positions whose coordinates refer to different things in the two graphs.
  std::size_t rank_displacement = 0;
  bool aligned = true;
};

/**
 * Runs both graphs through `stack` and records, coordinate by coordinate,
 * what each readout entry is computed from.
 *
 * `embedding[i]` is the node of `large` that plays node i of `small`; an
 * empty span means the identity on the first N_small nodes. For max-sort,
 * `k` = 0 uses the node count of `large`.
 */
FeatureTestReport feature_test_diagnostic(const Graph& small, const Graph& large,
                                          ReadoutKind readout, const DiagnosticStack& stack,
                                          std::span<const std::size_t> embedding = {},
                                          std::size_t k = 0);

}  // namespace gcaps

#endif  // GCAPS_LAYERS_HPP
