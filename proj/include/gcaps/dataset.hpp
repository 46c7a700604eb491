#ifndef GCAPS_DATASET_HPP
#define GCAPS_DATASET_HPP

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcaps/graph.hpp"
#include "gcaps/spectral.hpp"

namespace gcaps {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Reads a TU benchmark dataset: `<name>_A.txt`, `<name>_graph_indicator.txt`,
 * `<name>_graph_labels.txt` and optionally `<name>_node_labels.txt`, all
 * inside `directory`.
 *
 * Edges get unit weight and are symmetrized. Graph labels are remapped to
 * 0..C-1 in sorted order of the original values. Node labels, when present,
 * become one-hot features over the dataset-wide label alphabet.
 */
GraphDataset load_tu_dataset(const std::filesystem::path& directory, const std::string& name);

/// Writes the same four-file layout (edges listed in both directions).
void write_tu_dataset(const GraphDataset& dataset, const std::filesystem::path& directory,
                      const std::string& name);

enum class FeaturePolicy { one_hot_labels, degree, fgsd, degree_plus_fgsd, labels_plus_fgsd };

FeaturePolicy parse_feature_policy(const std::string& text);
std::string to_string(FeaturePolicy policy);

/// Harmonic distance matrices of every graph, computed once and reused across splits.
std::vector<Tensor> harmonic_distances(const GraphDataset& dataset, double zero_tolerance = 1e-8);

/**
 * Replaces node features according to `policy`.
 *
 * FGSD histograms use `fgsd.range_max` when set, otherwise the largest finite
 * distance among the graphs listed in `fit_indices` (all graphs when empty).
 * Pass precomputed `distances` to skip the eigendecompositions.
 */
GraphDataset assemble_node_features(const GraphDataset& dataset, FeaturePolicy policy,
                                    const FgsdConfig& fgsd,
                                    std::span<const std::size_t> fit_indices = {},
                                    std::span<const Tensor> distances = {});

/// Range the histograms would use for the given fit split.
double fit_fgsd_range(std::span<const Tensor> distances, std::span<const std::size_t> fit_indices);

enum class SyntheticTask { cycle_vs_union, cycle_parity };

SyntheticTask parse_synthetic_task(const std::string& text);

/**
 * Class-balanced synthetic benchmark.
 *
 * cycle_vs_union: for an even n, either C_n (label 0) or C_{n/2} ∪ C_{n/2}
 * (label 1). cycle_parity: C_n labeled n mod 2. Node order is shuffled.
 * Graphs carry no features; pick a policy with assemble_node_features.
 */
GraphDataset generate_synthetic(SyntheticTask task, std::size_t count, std::size_t min_nodes,
                                std::size_t max_nodes, unsigned long long seed);

Graph cycle_graph(std::size_t n);
/// Disjoint union; nodes of `b` follow those of `a`.
Graph disjoint_union(const Graph& a, const Graph& b);

}  // namespace gcaps

#endif  // GCAPS_DATASET_HPP
