#include <doctest.h>

#include <algorithm>
#include <limits>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "gcaps/checks.hpp"
#include "gcaps/dataset.hpp"
#include "gcaps/model.hpp"
#include "gcaps/training.hpp"

using namespace gcaps;

namespace {

Graph path_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return Graph::from_edges(n, edges);
}

ModelConfig tiny(std::size_t depth, std::size_t order, std::size_t degree, std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.depth = depth;
  cfg.hidden = {4};
  cfg.capsule_order = order;
  cfg.filter_degree = degree;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

TEST_CASE("first Adam step with unit gradient") {
  // m̂ = v̂ = 1 after bias correction, so the step is -lr / (1 + eps).
  std::vector<Tensor> params = {Tensor::vector({0.0, 5.0})};
  const std::vector<Tensor> grads = {Tensor::vector({1.0, 1.0})};
  AdamState state = AdamState::for_parameters(params);
  adam_step(state, params, grads, 0.1);
  const double expected = -0.1 / (1.0 + 1e-8);
  CHECK(std::abs(params[0][0] - expected) <= 1e-12);
  CHECK(std::abs(params[0][1] - (5.0 + expected)) <= 1e-12);
  CHECK(state.t == 1);
}

TEST_CASE("Adam with zero gradient leaves parameters but counts the step") {
  std::vector<Tensor> params = {Tensor::vector({2.0})};
  const std::vector<Tensor> grads = {Tensor::vector({0.0})};
  AdamState state = AdamState::for_parameters(params);
  adam_step(state, params, grads, 0.1);
  CHECK(params[0][0] == 2.0);
  CHECK(state.t == 1);
}

TEST_CASE("Adam shape contract") {
  std::vector<Tensor> params = {Tensor::vector({2.0})};
  const std::vector<Tensor> grads = {Tensor::vector({0.0, 1.0})};
  AdamState state = AdamState::for_parameters(params);
  CHECK_THROWS_AS(adam_step(state, params, grads, 0.1), ContractError);
}

TEST_CASE("learning rate decays stepwise") {
  TrainConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.epochs = 8;
  CHECK(cfg.decay_interval() == 2);
  CHECK(cfg.rate_at(1) == 1.0);
  CHECK(cfg.rate_at(2) == doctest::Approx(0.1));
  CHECK(cfg.rate_at(7) == doctest::Approx(1e-3));
  cfg.epochs = 3;
  CHECK(cfg.decay_interval() == 1);
}

TEST_CASE("L2 penalty arithmetic") {
  Tape tape;
  Var logits = tape.constant(Tensor::matrix({{0, 0}}));
  const Var weights[] = {tape.variable(Tensor::vector({2.0}))};
  const double base = softmax_cross_entropy(logits, 0).value()[0];
  CHECK(loss_with_l2(logits, 0, weights, 0.5).value()[0] == doctest::Approx(base + 2.0));
  const Var zeros[] = {tape.variable(Tensor::vector({0.0, 0.0}))};
  CHECK(loss_with_l2(logits, 0, zeros, 3.0).value()[0] == doctest::Approx(base));
}

TEST_CASE("k-fold splits") {
  SUBCASE("singletons") {
    const std::vector<std::size_t> labels(10, 0);
    const auto folds = kfold_split(labels, 10, 3);
    for (const Fold& f : folds) {
      CHECK(f.test.size() == 1);
      CHECK(f.train.size() == 9);
    }
  }
  SUBCASE("partition and stratification") {
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 53; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
    const auto folds = kfold_split(labels, 5, 11);
    std::vector<int> seen(labels.size(), 0);
    const double ones = static_cast<double>(std::count(labels.begin(), labels.end(), 1u));
    for (const Fold& f : folds) {
      for (std::size_t i : f.test) ++seen[i];
      CHECK(f.train.size() + f.test.size() == labels.size());
      const auto test_ones = std::count_if(f.test.begin(), f.test.end(),
                                           [&](std::size_t i) { return labels[i] == 1; });
      const double expected = ones * static_cast<double>(f.test.size()) / labels.size();
      CHECK(std::abs(static_cast<double>(test_ones) - expected) <= 1.0);
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
  SUBCASE("determinism and errors") {
    const std::vector<std::size_t> labels = {0, 1, 0, 1, 0, 1};
    CHECK(kfold_split(labels, 3, 4)[1].test == kfold_split(labels, 3, 4)[1].test);
    CHECK_THROWS_AS(kfold_split(labels, 7, 4), ConfigError);
    CHECK_THROWS_AS(kfold_split(labels, 1, 4), ConfigError);
  }
}

TEST_CASE("holdout split keeps class proportions") {
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 200; ++i) labels.push_back(i % 2);
  const Fold f = holdout_split(labels, 0.25, 9);
  CHECK(f.test.size() == 50);
  CHECK(std::count_if(f.test.begin(), f.test.end(), [&](std::size_t i) { return labels[i] == 1; }) == 25);
  CHECK_THROWS_AS(holdout_split(labels, 1.0, 9), ConfigError);
}

TEST_CASE("evaluation breaks ties toward class zero") {
  const std::vector<Tensor> logits(4, Tensor::matrix({{0.0, 0.0}}));
  const std::vector<std::size_t> labels = {0, 1, 0, 1};
  const EvalResult r = score_logits(logits, labels, 2);
  CHECK(r.accuracy == 0.5);
  CHECK(r.confusion[1][0] == 2);
  std::size_t total = 0;
  for (const auto& row : r.confusion) total += std::accumulate(row.begin(), row.end(), std::size_t{0});
  CHECK(total == r.total);
  const std::vector<Tensor> perfect = {Tensor::matrix({{5, 0}}), Tensor::matrix({{0, 5}})};
  const std::vector<std::size_t> two = {0, 1};
  CHECK(score_logits(perfect, two, 2).accuracy == 1.0);
}

TEST_CASE("model parameter layout") {
  const GcapsModel model(tiny(2, 3, 1), 5, 4);
  const auto& names = model.parameters().names;
  CHECK(names.front() == "gc1.w1.0");
  CHECK(std::count_if(names.begin(), names.end(), [](const std::string& n) { return n.rfind("gc", 0) == 0; }) == 12);
  CHECK(names.back() == "out.b");
  // Concatenated width 4*3 + 4*3 = 24 features.
  CHECK(model.readout_dim() == covariance_readout_size(24));
  CHECK(model.parameters().values[0].shape() == Shape{5, 4});
  CHECK(model.parameters().values[6].shape() == Shape{12, 4});
}

TEST_CASE("model configuration errors") {
  CHECK_THROWS_AS(GcapsModel(tiny(2, 5, 1), 3, 2), ConfigError);
  CHECK_THROWS_AS(GcapsModel(tiny(0, 1, 1), 3, 2), ConfigError);
  CHECK_THROWS_AS(GcapsModel(tiny(1, 1, 1), 0, 2), ConfigError);
  ModelConfig bad = tiny(2, 1, 1);
  bad.hidden = {3, 3, 3};
  CHECK_THROWS_AS(GcapsModel(bad, 3, 2), ConfigError);
  bad = tiny(1, 1, 1);
  bad.dropout = 1.0;
  CHECK_THROWS_AS(GcapsModel(bad, 3, 2), ConfigError);
}

TEST_CASE("initialization is deterministic in the seed") {
  const GcapsModel a(tiny(2, 2, 2, 9), 3, 2);
  const GcapsModel b(tiny(2, 2, 2, 9), 3, 2);
  const GcapsModel c(tiny(2, 2, 2, 10), 3, 2);
  CHECK(a.parameters().values == b.parameters().values);
  CHECK_FALSE(a.parameters().values == c.parameters().values);
}

TEST_CASE("degenerate one-layer, first-order, zero-degree model is a node MLP") {
  // With K = 0 each node only sees itself, so node features never mix.
  Rng rng(2);
  const Graph g = random_graph(6, 0.5, 2, rng);
  const GcapsModel model(tiny(1, 1, 0), 2, 2);
  const auto pg = prepare_graph(g, model.config());
  for (std::size_t u = 0; u < 6; ++u)
    for (std::size_t i = 0; i < 6; ++i)
      if (i != u) CHECK(locality_check(model, pg, i, u).max_change == 0.0);
}

TEST_CASE("locality on a ten-node path") {
  Graph g = path_graph(10);
  Rng rng(6);
  g.set_node_features(random_matrix(10, 2, rng));
  const GcapsModel model(tiny(2, 2, 1, 3), 2, 2);
  const auto pg = prepare_graph(g, model.config());
  CHECK(locality_check(model, pg, 0, 9).max_change == 0.0);
  CHECK_FALSE(locality_check(model, pg, 0, 3).changed);
  // Within reach a change is generic but not guaranteed.
  const auto near = locality_check(model, pg, 0, 1);
  if (!near.changed) MESSAGE("node 1 did not move node 0 for this draw");
}

TEST_CASE("end-to-end permutation invariance") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(1 + rng() % 20, 0.25, 3, rng);
    const auto perm = random_permutation(g.num_nodes(), rng);
    const GcapsModel model(tiny(2, 2, 2, rng()), 3, 3);
    const Tensor a = model.logits(prepare_graph(g, model.config()));
    const Tensor b = model.logits(prepare_graph(permute_graph(g, perm), model.config()));
    CHECK(max_abs_diff(a, b) <= 1e-8);
  }
}

TEST_CASE("mean-only readout model") {
  ModelConfig cfg = tiny(2, 1, 1);
  cfg.readout = ReadoutMode::mean_only;
  cfg.concat_intermediate = false;
  const GcapsModel model(cfg, 2, 2);
  CHECK(model.readout_dim() == 4);
}

TEST_CASE("full-model gradient against central differences") {
  Rng rng(8);
  const Graph g = random_graph(8, 0.4, 3, rng);
  ModelConfig cfg = tiny(2, 2, 2, 4);
  cfg.hidden = {3};
  cfg.l2 = 1e-2;
  GcapsModel model(cfg, 3, 2);
  const auto pg = prepare_graph(g, cfg);
  const std::size_t one[] = {0};
  model.fit_input_statistics(std::span<const PreparedGraph>(&pg, 1), one);
  const auto& params = model.parameters();
  const auto report = finite_difference_check(
      [&](Tape& tape, std::span<const Var> vars) {
        auto pass = model.forward_with(tape, pg, vars);
        std::vector<Var> weights;
        for (std::size_t i = 0; i < vars.size(); ++i)
          if (params.regularized[i]) weights.push_back(vars[i]);
        return loss_with_l2(pass.logits, 0, weights, cfg.l2);
      },
      params.values);
  CHECK(report.max_relative_error <= 1e-5);
}

TEST_CASE("parameter blob round trip") {
  const GcapsModel model(tiny(2, 2, 1), 3, 2);
  std::stringstream buffer;
  save_parameters(buffer, model.parameters().values);
  const std::string bytes = buffer.str();
  CHECK(bytes.substr(0, 4) == "GCAP");
  const auto back = load_parameters(buffer);
  CHECK(back == model.parameters().values);
  std::stringstream bad("GCAX\x01");
  CHECK_THROWS(load_parameters(bad));
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(load_parameters(truncated));
}

TEST_CASE("assign_parameters checks shapes") {
  GcapsModel model(tiny(1, 1, 1), 3, 2);
  auto values = model.parameters().values;
  values[0] = Tensor({1, 1});
  CHECK_THROWS(model.assign_parameters(values));
}

namespace {

struct Toy {
  GraphDataset data;
  std::vector<PreparedGraph> prepared;
};

Toy toy_data(const ModelConfig& cfg, std::size_t count) {
  Toy toy;
  toy.data = assemble_node_features(generate_synthetic(SyntheticTask::cycle_parity, count, 3, 9, 2),
                                    FeaturePolicy::degree_plus_fgsd, FgsdConfig{});
  toy.prepared = prepare_dataset(toy.data, cfg);
  return toy;
}

}  // namespace

TEST_CASE("zero learning rate freezes parameters") {
  const ModelConfig cfg = tiny(2, 2, 1);
  const Toy toy = toy_data(cfg, 8);
  GcapsModel model(cfg, toy.data.feature_dim, 2);
  const auto before = model.parameters().values;
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 3;
  Rng rng(1);
  const auto idx = iota_indices(8);
  train(model, toy.prepared, idx, tc, rng);
  CHECK(model.parameters().values == before);
}

TEST_CASE("one graph is overfit monotonically with a small rate") {
  const ModelConfig cfg = tiny(2, 2, 1);
  const Toy toy = toy_data(cfg, 2);
  GcapsModel model(cfg, toy.data.feature_dim, 2);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.epochs = 10;
  tc.decay_every = 100;
  Rng rng(1);
  const std::size_t one[] = {0};
  const auto trace = train(model, toy.prepared, one, tc, rng).trace;
  REQUIRE(trace.size() == 10);
  for (std::size_t e = 1; e < trace.size(); ++e) CHECK(trace[e].loss <= trace[e - 1].loss + 1e-12);
}

TEST_CASE("training is reproducible and logs both splits") {
  ModelConfig cfg = tiny(2, 2, 1);
  cfg.dropout = 0.3;
  const Toy toy = toy_data(cfg, 12);
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 5;
  tc.learning_rate = 0.01;
  const auto train_idx = iota_indices(9);
  const std::vector<std::size_t> test_idx = {9, 10, 11};
  auto run = [&] {
    GcapsModel model(cfg, toy.data.feature_dim, 2);
    Rng rng(77);
    auto trace = train(model, toy.prepared, train_idx, tc, rng, test_idx).trace;
    return std::make_pair(model.parameters().values, trace);
  };
  const auto [pa, ta] = run();
  const auto [pb, tb] = run();
  CHECK(pa == pb);
  REQUIRE(ta.size() == 8);
  CHECK(ta[0].split == "train");
  CHECK(ta[1].split == "test");
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i].loss == tb[i].loss);
}

TEST_CASE("non-finite loss aborts with the epoch and graph") {
  const ModelConfig cfg = tiny(1, 1, 1);
  Toy toy = toy_data(cfg, 4);
  toy.prepared[2].features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  Rng rng(3);
  const std::size_t bad[] = {2};
  try {
    GcapsModel m(cfg, toy.data.feature_dim, 2);
    train(m, toy.prepared, bad, tc, rng);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() == 0);
    CHECK(e.graph() == 2);
  }
}

TEST_CASE("training contracts") {
  const ModelConfig cfg = tiny(1, 1, 1);
  const Toy toy = toy_data(cfg, 4);
  GcapsModel model(cfg, toy.data.feature_dim, 2);
  Rng rng(1);
  CHECK_THROWS_AS(train(model, toy.prepared, {}, TrainConfig{}, rng), ConfigError);
}
