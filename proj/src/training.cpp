#include "gcaps/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gcaps/dataset.hpp"

namespace gcaps {

std::size_t TrainConfig::decay_interval() const {
  return decay_every ? decay_every : std::max<std::size_t>(epochs / 4, 1);
}

double TrainConfig::rate_at(std::size_t epoch) const {
  const auto steps = static_cast<double>(epoch / decay_interval());
  return learning_rate * std::pow(decay_factor, steps);
}

AdamState AdamState::for_parameters(std::span<const Tensor> params) {
  AdamState state;
  for (const Tensor& p : params) {
    state.m.emplace_back(p.shape());
    state.v.emplace_back(p.shape());
  }
  return state;
}

void adam_step(AdamState& state, std::span<Tensor> params, std::span<const Tensor> grads,
               double learning_rate) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                        std::to_string(grads.size()) + " gradients, " +
                        std::to_string(state.m.size()) + " moment buffers");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].shape() != grads[k].shape() || params[k].shape() != state.m[k].shape()) {
      throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(k) + ": " +
                          shape_to_string(params[k].shape()) + " vs gradient " +
                          shape_to_string(grads[k].shape()));
    }
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    const Tensor& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

namespace {

std::vector<Var> regularized_vars(const ParameterSet& params, std::span<const Var> vars) {
  std::vector<Var> out;
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (params.regularized[i]) out.push_back(vars[i]);
  return out;
}

}  // namespace

TrainResult train(GcapsModel& model, std::span<const PreparedGraph> graphs,
                  std::span<const std::size_t> train_indices, const TrainConfig& cfg, Rng& rng,
                  std::span<const std::size_t> monitor) {
  if (train_indices.empty()) throw ConfigError("train: the training split is empty");
  if (cfg.batch_size == 0) throw ConfigError("train: batch size must be positive");
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("train: learning rate must be non-negative");

  if (model.config().standardize) model.fit_input_statistics(graphs, train_indices);

  ParameterSet& params = model.parameters();
  AdamState adam = AdamState::for_parameters(params.values);
  const double l2 = model.config().l2;
  std::vector<std::size_t> order(train_indices.begin(), train_indices.end());
  std::vector<Tensor> grads;
  TrainResult result;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double rate = cfg.rate_at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(stop - start);
      grads.clear();
      for (const Tensor& p : params.values) grads.emplace_back(p.shape());

      for (std::size_t pos = start; pos < stop; ++pos) {
        const std::size_t idx = order[pos];
        const PreparedGraph& g = graphs[idx];
        Tape tape;
        auto pass = model.forward(tape, g, true, &rng);
        const auto weights = regularized_vars(params, pass.params);
        Var loss = loss_with_l2(pass.logits, g.label, weights, l2);
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
          throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                  ", graph " + std::to_string(idx),
                              epoch, idx);
        }
        loss_sum += value;
        if (argmax_class(pass.logits.value().values()) == g.label) ++correct;
        tape.backward(loss);
        for (std::size_t k = 0; k < grads.size(); ++k) {
          const Tensor gk = tape.gradient(pass.params[k]);
          for (std::size_t i = 0; i < gk.size(); ++i) grads[k][i] += weight * gk[i];
        }
      }
      adam_step(adam, params.values, grads, rate);
    }

    const double n = static_cast<double>(order.size());
    result.trace.push_back({epoch, "train", loss_sum / n, static_cast<double>(correct) / n});
    if (!monitor.empty()) {
      const EvalResult eval = evaluate(model, graphs, monitor);
      result.trace.push_back({epoch, "test", eval.loss, eval.accuracy});
    }
  }
  return result;
}

EvalResult score_logits(std::span<const Tensor> logits, std::span<const std::size_t> labels,
                        std::size_t num_classes) {
  if (logits.size() != labels.size()) {
    throw ContractError("score_logits: " + std::to_string(logits.size()) + " outputs for " +
                        std::to_string(labels.size()) + " labels");
  }
  EvalResult result;
  result.total = labels.size();
  result.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto z = logits[i].values();
    const std::size_t predicted = argmax_class(z);
    if (predicted == labels[i]) ++correct;
    if (labels[i] < num_classes && predicted < num_classes) ++result.confusion[labels[i]][predicted];
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double v : z) total += std::exp(v - top);
    loss += top + std::log(total) - z[labels[i]];
  }
  if (result.total) {
    result.accuracy = static_cast<double>(correct) / static_cast<double>(result.total);
    result.loss = loss / static_cast<double>(result.total);
  }
  return result;
}

EvalResult evaluate(const GcapsModel& model, std::span<const PreparedGraph> graphs,
                    std::span<const std::size_t> indices) {
  std::vector<Tensor> logits;
  std::vector<std::size_t> labels;
  logits.reserve(indices.size());
  for (std::size_t idx : indices) {
    logits.push_back(model.logits(graphs[idx]));
    labels.push_back(graphs[idx].label);
  }
  return score_logits(logits, labels, model.num_classes());
}

std::vector<Fold> kfold_split(std::span<const std::size_t> labels, std::size_t k,
                              unsigned long long seed) {
  if (k < 2) throw ConfigError("kfold_split: need at least 2 folds");
  if (k > labels.size()) {
    throw ConfigError("kfold_split: " + std::to_string(k) + " folds for " +
                      std::to_string(labels.size()) + " items");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> dealt;
  dealt.reserve(labels.size());
  for (auto& [cls, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    dealt.insert(dealt.end(), members.begin(), members.end());
  }

  std::vector<std::size_t> fold_of(labels.size());
  for (std::size_t pos = 0; pos < dealt.size(); ++pos) fold_of[dealt[pos]] = pos % k;

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(i);
    }
  }
  return folds;
}

Fold holdout_split(std::span<const std::size_t> labels, double test_fraction,
                   unsigned long long seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("holdout_split: test fraction must lie in (0, 1)");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<bool> is_test(labels.size(), false);
  for (auto& [cls, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = static_cast<std::size_t>(
        std::lround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < take; ++i) is_test[members[i]] = true;
  }
  Fold fold;
  for (std::size_t i = 0; i < labels.size(); ++i) (is_test[i] ? fold.test : fold.train).push_back(i);
  if (fold.train.empty() || fold.test.empty()) {
    throw ConfigError("holdout_split: a split is empty for " + std::to_string(labels.size()) +
                      " items");
  }
  return fold;
}

LocalityResult locality_check(const GcapsModel& model, const PreparedGraph& g,
                              std::size_t target, std::size_t source, double delta) {
  const std::size_t n = g.features.rows();
  if (target >= n || source >= n) {
    throw std::out_of_range("locality_check: node index outside graph of " + std::to_string(n) +
                            " nodes");
  }
  const Tensor before = model.node_representation(g);
  PreparedGraph perturbed = g;
  for (std::size_t j = 0; j < perturbed.features.cols(); ++j) perturbed.features(source, j) += delta;
  const Tensor after = model.node_representation(perturbed);

  LocalityResult result;
  for (std::size_t j = 0; j < before.cols(); ++j) {
    result.max_change = std::max(result.max_change, std::abs(after(target, j) - before(target, j)));
  }
  result.changed = result.max_change > 0.0;
  return result;
}

}  // namespace gcaps
