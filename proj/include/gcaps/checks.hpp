#ifndef GCAPS_CHECKS_HPP
#define GCAPS_CHECKS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcaps/graph.hpp"
#include "gcaps/layers.hpp"
#include "gcaps/tensor.hpp"

namespace gcaps {

struct CheckResult {
  std::string name;
  /// Which part of the model the property exercises (e.g. "covariance readout").
  std::string covers;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  unsigned long long seed = 7;
  /// Randomized trials per property.
  std::size_t trials = 20;
};

/// Randomized invariants of every module, run in a fixed order.
std::vector<CheckResult> run_property_suite(const CheckOptions& options);

// Random fixtures shared by the suite and the test binaries.

/// Connected-or-not random graph with `n` nodes, edge probability `p`, unit
/// weights and `feature_dim` standard-normal features.
Graph random_graph(std::size_t n, double p, std::size_t feature_dim, Rng& rng);
/// Uniform random labeled tree on `n` nodes.
Graph random_tree(std::size_t n, Rng& rng);
Permutation random_permutation(std::size_t n, Rng& rng);
Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0);

/// A graph containing `small` plus one node attached to `anchor`, with the
/// stack under which that node heads the max-sort order.
struct SubgraphPair {
  Graph large;
  DiagnosticStack stack;
};

/// Searches a few stacks and feature values for the added node; empty when
/// none makes it dominate. `small` must have one feature column.
std::optional<SubgraphPair> dominated_supergraph(const Graph& small, std::size_t anchor,
                                                 std::uint64_t seed);

}  // namespace gcaps

#endif  // GCAPS_CHECKS_HPP
