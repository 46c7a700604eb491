#ifndef GCAPS_TRAINING_HPP
#define GCAPS_TRAINING_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcaps/model.hpp"

namespace gcaps {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  /// Epochs between learning-rate decays; 0 means max(epochs / 4, 1).
  std::size_t decay_every = 0;
  double decay_factor = 0.1;

  std::size_t decay_interval() const;
  double rate_at(std::size_t epoch) const;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_parameters(std::span<const Tensor> params);
};

/// One bias-corrected Adam update; the step counter advances even for zero gradients.
void adam_step(AdamState& state, std::span<Tensor> params, std::span<const Tensor> grads,
               double learning_rate);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t epoch, std::size_t graph)
      : std::runtime_error(what), epoch_(epoch), graph_(graph) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t graph() const noexcept { return graph_; }

 private:
  std::size_t epoch_;
  std::size_t graph_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> trace;
};

/**
 * Mini-batch training with per-graph gradient accumulation.
 *
 * Each batch averages the per-graph gradients of cross entropy plus the L2
 * penalty and takes one Adam step. When `monitor` is non-empty those graphs
 * are evaluated after every epoch and logged under split "test".
 */
TrainResult train(GcapsModel& model, std::span<const PreparedGraph> graphs,
                  std::span<const std::size_t> train_indices, const TrainConfig& cfg, Rng& rng,
                  std::span<const std::size_t> monitor = {});

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t total = 0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

EvalResult score_logits(std::span<const Tensor> logits, std::span<const std::size_t> labels,
                        std::size_t num_classes);
EvalResult evaluate(const GcapsModel& model, std::span<const PreparedGraph> graphs,
                    std::span<const std::size_t> indices);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified k-fold partition of 0..labels.size()-1.
std::vector<Fold> kfold_split(std::span<const std::size_t> labels, std::size_t k,
                              unsigned long long seed);

/// Stratified single split: round(fraction * class size) members of every class go to test.
Fold holdout_split(std::span<const std::size_t> labels, double test_fraction,
                   unsigned long long seed);

struct LocalityResult {
  double max_change = 0.0;
  bool changed = false;
};

/// Adds `delta` to every input feature of node `source` and reports how much
/// the pre-readout representation of node `target` moved.
LocalityResult locality_check(const GcapsModel& model, const PreparedGraph& g,
                              std::size_t target, std::size_t source, double delta = 1.0);

}  // namespace gcaps

#endif  // GCAPS_TRAINING_HPP
