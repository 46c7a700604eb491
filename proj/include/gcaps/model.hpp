#ifndef GCAPS_MODEL_HPP
#define GCAPS_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gcaps/autodiff.hpp"
#include "gcaps/graph.hpp"
#include "gcaps/layers.hpp"
#include "gcaps/tensor.hpp"

namespace gcaps {

enum class ReadoutMode { covariance_with_mean, mean_only };

struct ModelConfig {
  std::size_t depth = 2;
  /// One width per capsule layer, or a single width shared by all of them.
  std::vector<std::size_t> hidden = {32};
  std::size_t capsule_order = 2;
  std::size_t filter_degree = 2;
  /// Width of the two fully connected layers; 0 reuses the last capsule width.
  std::size_t fc_hidden = 0;
  double dropout = 0.0;
  double l2 = 0.0;
  Activation activation = Activation::tanh;
  ReadoutMode readout = ReadoutMode::covariance_with_mean;
  bool concat_intermediate = true;
  FilterKind filter = FilterKind::laplacian;
  /// Standardize every capsule layer input with statistics from the training split.
  bool standardize = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError (see dataset.hpp) on an invalid combination.
  void validate() const;
  std::size_t hidden_at(std::size_t layer) const;
  std::size_t fc_width() const;
};

struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Tensor> values;
  /// Only regularized entries (weights, not biases) enter the L2 penalty.
  std::vector<bool> regularized;

  void add(std::string name, Tensor value, bool is_weight);
  std::size_t size() const noexcept { return values.size(); }
  std::size_t scalar_count() const;
};

/// A graph with its filter powers precomputed for a given configuration.
struct PreparedGraph {
  Tensor features;
  std::vector<Tensor> filter_powers;
  std::size_t label = 0;
};

PreparedGraph prepare_graph(const Graph& g, const ModelConfig& cfg);
std::vector<PreparedGraph> prepare_dataset(const GraphDataset& dataset, const ModelConfig& cfg);

/// Per-feature mean and variance used to standardize a capsule layer input.
struct FeatureStatistics {
  Tensor mean;      // width
  Tensor variance;  // width
};

/**
 * Capsule network: capsule layers, optional concatenation of every layer's
 * output, mean/covariance readout, two dense layers, class logits.
 */
class GcapsModel {
 public:
  GcapsModel(ModelConfig cfg, std::size_t feature_dim, std::size_t num_classes);

  struct Pass {
    std::vector<Var> params;  // parallel to parameters().values
    Var node_representation;  // N×F fed to the readout
    Var readout;
    Var logits;               // 1×C
  };

  /// Records a forward pass. Training mode applies dropout (needs `rng`) and
  /// folds the observed layer-input statistics into the running estimates.
  Pass forward(Tape& tape, const PreparedGraph& g, bool training, Rng* rng = nullptr);
  /// Evaluation-mode pass; never changes the model.
  Pass forward_eval(Tape& tape, const PreparedGraph& g) const;
  /// Evaluation-mode pass over caller-bound parameter handles, e.g. for
  /// gradient checks. `params` must mirror parameters().values.
  Pass forward_with(Tape& tape, const PreparedGraph& g, std::span<const Var> params) const;

  Tensor logits(const PreparedGraph& g) const;
  Tensor node_representation(const PreparedGraph& g) const;

  /// Sets the first layer's input statistics from the listed training graphs.
  void fit_input_statistics(std::span<const PreparedGraph> graphs,
                            std::span<const std::size_t> indices);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }
  const std::vector<FeatureStatistics>& statistics() const noexcept { return stats_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t readout_dim() const noexcept { return readout_dim_; }

  /// Replaces parameter values, checking every shape.
  void assign_parameters(std::vector<Tensor> values);

 private:
  Pass run(Tape& tape, const PreparedGraph& g, bool training, Rng* rng,
           std::vector<FeatureStatistics>* observed, std::span<const Var> bound = {}) const;

  ModelConfig cfg_;
  std::size_t feature_dim_;
  std::size_t num_classes_;
  std::size_t readout_dim_ = 0;
  ParameterSet params_;
  std::vector<std::size_t> layer_block_offset_;
  std::size_t fc_offset_ = 0;
  std::vector<FeatureStatistics> stats_;
};

Var loss_with_l2(Var logits, std::size_t target, std::span<const Var> weights, double l2);

/// Predicted class; ties go to the lowest index.
std::size_t argmax_class(std::span<const double> logits);

/// Binary parameter blob: "GCAP", u32 version, u32 count, per tensor u32 rank
/// and u64 dims, then all values as little-endian f64.
void save_parameters(std::ostream& out, std::span<const Tensor> values);
std::vector<Tensor> load_parameters(std::istream& in);

}  // namespace gcaps

#endif  // GCAPS_MODEL_HPP
