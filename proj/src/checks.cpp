#include "gcaps/checks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>

#include "gcaps/autodiff.hpp"
#include "gcaps/dataset.hpp"
#include "gcaps/layers.hpp"
#include "gcaps/model.hpp"
#include "gcaps/spectral.hpp"
#include "gcaps/training.hpp"

namespace gcaps {

Graph random_graph(std::size_t n, double p, std::size_t feature_dim, Rng& rng) {
  std::bernoulli_distribution edge(p);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(rng)) edges.emplace_back(i, j);
  Graph g = Graph::from_edges(n, edges);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor x({n, feature_dim});
  for (double& v : x.values()) v = normal(rng);
  g.set_node_features(std::move(x));
  return g;
}

Graph random_tree(std::size_t n, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t v = 1; v < n; ++v) {
    std::uniform_int_distribution<std::size_t> parent(0, v - 1);
    edges.emplace_back(parent(rng), v);
  }
  Graph tree = Graph::from_edges(n, edges);
  return permute_graph(tree, random_permutation(n, rng));
}

Permutation random_permutation(std::size_t n, Rng& rng) {
  Permutation perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor m({rows, cols});
  for (double& v : m.values()) v = normal(rng);
  return m;
}

std::optional<SubgraphPair> dominated_supergraph(const Graph& small, std::size_t anchor,
                                                 std::uint64_t seed) {
  const std::size_t n = small.num_nodes();
  Tensor adj({n + 1, n + 1});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) adj(i, j) = small.adjacency()(i, j);
  adj(n, anchor) = adj(anchor, n) = 1.0;
  for (std::uint64_t attempt = 0; attempt < 20; ++attempt) {
    auto stack = DiagnosticStack::random(1, seed * 100 + attempt);
    for (double value : {-8.0, -4.0, -2.0, -1.0, 1.0, 2.0, 4.0, 8.0}) {
      Tensor x({n + 1, 1});
      for (std::size_t i = 0; i < n; ++i) x(i, 0) = small.node_features()(i, 0);
      x(n, 0) = value;
      Graph large(adj, x);
      if (max_sort_order(stack.node_features(large)).front() == n) {
        return SubgraphPair{std::move(large), std::move(stack)};
      }
    }
  }
  return std::nullopt;
}

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << v;
  return out.str();
}

CheckResult bounded(std::string name, std::string covers, double worst, double tol) {
  return {std::move(name), std::move(covers), worst <= tol,
          "worst " + fmt(worst) + " (tolerance " + fmt(tol) + ")"};
}

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

ModelConfig small_model(std::size_t depth, std::size_t order, std::size_t degree,
                        unsigned long long seed) {
  ModelConfig cfg;
  cfg.depth = depth;
  cfg.hidden = {4};
  cfg.fc_hidden = 5;
  cfg.capsule_order = order;
  cfg.filter_degree = degree;
  cfg.seed = seed;
  return cfg;
}

struct PrimitiveCheck {
  double worst = 0.0;
  std::string primitive;
  GradientCheckReport report;
};

PrimitiveCheck gradient_check_primitives(Rng& rng, std::size_t trials) {
  using Builder = std::function<Var(Tape&, std::span<const Var>)>;
  static const char* const names[] = {
      "matmul",   "add",        "sub",         "mul",    "hadamard_power", "tanh",
      "add_row",  "mul_row",    "transpose",   "concat_columns", "stack_last", "column_mean",
      "gather",   "softmax_cross_entropy",     "covariance_readout"};
  PrimitiveCheck worst;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t m = uniform_size(rng, 1, 8);
    const std::size_t k = uniform_size(rng, 1, 8);
    const std::size_t n = uniform_size(rng, 1, 8);
    // Half-scale inputs keep the loss small, which keeps differencing roundoff small.
    const Tensor a = random_matrix(m, k, rng, 0.5);
    const Tensor b = random_matrix(k, n, rng, 0.5);
    const Tensor c = random_matrix(m, k, rng, 0.5);
    const Tensor row = random_matrix(1, k, rng, 0.5);
    const Tensor proj_mn = random_matrix(m, n, rng, 0.5);
    const Tensor proj_mk = random_matrix(m, k, rng, 0.5);
    const Tensor proj_stack = random_matrix(m, 2 * k, rng, 0.5);
    const Tensor pair = random_matrix(1, 2, rng, 0.5);
    // Cubing near zero makes the difference quotient's eps^2 term dominate.
    Tensor away = a;
    for (double& v : away.values()) v += std::copysign(0.5, v);

    auto project = [](Tape& tape, Var v, const Tensor& r) {
      return sum(mul(v, tape.constant(r.reshaped(v.shape()))));
    };
    const std::vector<std::pair<Builder, std::vector<Tensor>>> cases = {
        {[&](Tape& tp, std::span<const Var> p) { return project(tp, matmul(p[0], p[1]), proj_mn); },
         {a, b}},
        {[&](Tape& tp, std::span<const Var> p) { return project(tp, add(p[0], p[1]), proj_mk); },
         {a, c}},
        {[&](Tape& tp, std::span<const Var> p) { return project(tp, sub(p[0], p[1]), proj_mk); },
         {a, c}},
        {[&](Tape& tp, std::span<const Var> p) { return project(tp, mul(p[0], p[1]), proj_mk); },
         {a, c}},
        {[&](Tape& tp, std::span<const Var> p) {
           return project(tp, hadamard_power(p[0], 3), proj_mk);
         },
         {away}},
        {[&](Tape& tp, std::span<const Var> p) {
           return project(tp, activate(p[0], Activation::tanh), proj_mk);
         },
         {a}},
        {[&](Tape& tp, std::span<const Var> p) { return project(tp, add_row(p[0], p[1]), proj_mk); },
         {a, row}},
        {[&](Tape& tp, std::span<const Var> p) { return project(tp, mul_row(p[0], p[1]), proj_mk); },
         {a, row}},
        {[&](Tape& tp, std::span<const Var> p) {
           return project(tp, transpose(transpose(p[0])), proj_mk);
         },
         {a}},
        {[&](Tape&, std::span<const Var> p) {
           const Var parts[] = {p[0], p[1]};
           return sum_squares(concat_columns(parts));
         },
         {a, c}},
        {[&](Tape& tp, std::span<const Var> p) {
           const Var parts[] = {p[0], p[1]};
           return project(tp, reshape(stack_last(parts), {m, 2 * k}), proj_stack);
         },
         {a, c}},
        {[&](Tape&, std::span<const Var> p) { return sum_squares(column_mean(p[0])); }, {a}},
        {[&](Tape&, std::span<const Var> p) { return sum(gather(hadamard_power(p[0], 2), {0, 0})); },
         {a}},
        {[&](Tape&, std::span<const Var> p) {
           return softmax_cross_entropy(reshape(p[0], {1, p[0].value().size()}), 0);
         },
         {m * k >= 2 ? a : pair}},
        {[&](Tape&, std::span<const Var> p) { return sum_squares(covariance_readout(p[0])); }, {a}},
    };
    for (std::size_t c = 0; c < cases.size(); ++c) {
      const auto report = finite_difference_check(cases[c].first, cases[c].second);
      if (report.max_relative_error > worst.worst) worst = {report.max_relative_error, names[c], report};
    }
  }
  return worst;
}

}  // namespace

std::vector<CheckResult> run_property_suite(const CheckOptions& options) {
  Rng rng(options.seed);
  const std::size_t trials = std::max<std::size_t>(options.trials, 1);
  std::vector<CheckResult> results;

  // graph-core
  {
    double perm_err = 0.0;
    double row_err = 0.0;
    double min_eig = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const Graph g = random_graph(uniform_size(rng, 1, 20), 0.3, 1, rng);
      const auto perm = random_permutation(g.num_nodes(), rng);
      const Tensor lap = build_laplacian(g);
      perm_err = std::max(perm_err, max_abs_diff(build_laplacian(permute_graph(g, perm)),
                                                 permute_symmetric(lap, perm)));
      for (std::size_t i = 0; i < lap.rows(); ++i) {
        double s = 0.0;
        for (double v : lap.row(i)) s += v;
        row_err = std::max(row_err, std::abs(s));
      }
      min_eig = std::min(min_eig, eigendecompose_symmetric(lap).eigenvalues.front());
    }
    results.push_back(bounded("laplacian commutes with node permutation", "graph Laplacian",
                              perm_err, 1e-12));
    results.push_back(bounded("laplacian rows sum to zero", "graph Laplacian", row_err, 1e-12));
    results.push_back({"laplacian is positive semidefinite", "graph Laplacian", min_eig >= -1e-9,
                       "smallest eigenvalue " + fmt(min_eig)});
  }

  // tensor-autodiff
  {
    const auto prim = gradient_check_primitives(rng, std::max<std::size_t>(trials / 4, 1));
    auto result = bounded("primitive gradients match central differences",
                          "reverse-mode differentiation", prim.worst, 1e-5);
    if (!prim.primitive.empty()) {
      result.detail += " in " + prim.primitive + ": analytic " + fmt(prim.report.analytic) +
                       ", numeric " + fmt(prim.report.numeric);
    }
    results.push_back(std::move(result));
    bool reshape_ok = true;
    bool deterministic = true;
    for (std::size_t t = 0; t < trials; ++t) {
      const Tensor x = random_matrix(uniform_size(rng, 1, 8), uniform_size(rng, 1, 8), rng);
      reshape_ok = reshape_ok && x.reshaped({x.size()}).reshaped(x.shape()) == x;
      const Tensor w = random_matrix(x.cols(), 3, rng);
      auto run = [&] {
        Tape tape;
        Var xv = tape.variable(x);
        Var loss = sum_squares(activate(matmul(hadamard_power(xv, 2), tape.constant(w)),
                                        Activation::tanh));
        tape.backward(loss);
        return tape.gradient(xv);
      };
      deterministic = deterministic && run() == run();
    }
    results.push_back({"reshape round trip keeps values", "tensor storage", reshape_ok, ""});
    results.push_back({"backward is bitwise deterministic", "reverse-mode differentiation",
                       deterministic, ""});
  }

  // spectral-features
  {
    double orth_err = 0.0;
    double recon_err = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t n = uniform_size(rng, 1, 12);
      Tensor m = random_matrix(n, n, rng);
      m = m + m.transposed();
      const auto eig = eigendecompose_symmetric(m);
      const Tensor& q = eig.eigenvectors;
      orth_err = std::max(orth_err, max_abs_diff(matmul(q.transposed(), q),
                                                 Tensor::identity(m.rows())));
      Tensor diag({m.rows(), m.rows()});
      for (std::size_t i = 0; i < m.rows(); ++i) diag(i, i) = eig.eigenvalues[i];
      recon_err = std::max(recon_err, max_abs_diff(matmul(matmul(q, diag), q.transposed()), m));
    }
    results.push_back(bounded("eigenvectors are orthonormal", "symmetric eigensolver", orth_err, 1e-8));
    results.push_back(bounded("eigendecomposition reconstructs the input", "symmetric eigensolver",
                              recon_err, 1e-8));

    double tree_err = 0.0;
    double multiset_err = 0.0;
    bool finite = true;
    for (std::size_t t = 0; t < trials; ++t) {
      const Graph tree = random_tree(uniform_size(rng, 2, 10), rng);
      const Tensor s = harmonic_distance_matrix(build_laplacian(tree));
      const auto hops = graph_distance_matrix(tree);
      for (std::size_t i = 0; i < tree.num_nodes(); ++i)
        for (std::size_t j = 0; j < tree.num_nodes(); ++j)
          tree_err = std::max(tree_err, std::abs(s(i, j) - static_cast<double>(hops[i][j])));

      const Graph g = random_graph(uniform_size(rng, 2, 15), 0.25, 1, rng);
      const auto perm = random_permutation(g.num_nodes(), rng);
      const Tensor s1 = harmonic_distance_matrix(build_laplacian(g));
      const Tensor s2 = harmonic_distance_matrix(build_laplacian(permute_graph(g, perm)));
      std::vector<double> a(s1.values().begin(), s1.values().end());
      std::vector<double> b(s2.values().begin(), s2.values().end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      for (std::size_t i = 0; i < a.size(); ++i) multiset_err = std::max(multiset_err, std::abs(a[i] - b[i]));
      finite = finite && all_finite(s1);
    }
    results.push_back(bounded("harmonic distance equals hop distance on trees", "harmonic distance",
                              tree_err, 1e-6));
    results.push_back(bounded("harmonic distance multiset is permutation invariant",
                              "harmonic distance", multiset_err, 1e-8));
    results.push_back({"harmonic distance stays finite on disconnected graphs", "harmonic distance",
                       finite, ""});
  }

  // layers
  {
    double conv_err = 0.0;
    double oracle_err = 0.0;
    double equiv_err = 0.0;
    double cov_err = 0.0;
    double readout_err = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      // Single-order capsule vs polynomial convolution.
      const Graph g = random_graph(uniform_size(rng, 1, 12), 0.3, 3, rng);
      const auto powers = laplacian_powers(build_laplacian(g), 2);
      auto layer = CapsuleLayerParams::glorot(3, 4, 1, 2, rng);
      const Tensor cap = graph_capsule_forward(g.node_features(), powers, layer, Activation::tanh);
      const Tensor conv =
          graph_conv_forward(g.node_features(), powers, layer.blocks, Activation::tanh);
      conv_err = std::max(conv_err, max_abs_diff(cap.reshaped(conv.shape()), conv));

      // Matrix capsule with the neighborhood-mean filter vs the node oracle.
      const Graph h = random_graph(uniform_size(rng, 1, 10), 0.35, 1, rng);
      const auto mean_powers = laplacian_powers(build_filter(h, FilterKind::mean_adjacency), 1);
      CapsuleLayerParams probe{1, 1, 3, 1, {}};
      for (std::size_t q = 1; q <= 3; ++q) {
        probe.blocks.push_back(Tensor({1, 1}, 0.0));
        probe.blocks.push_back(Tensor({1, 1}, 1.0));
      }
      const Tensor moments =
          graph_capsule_forward(h.node_features(), mean_powers, probe, Activation::identity);
      const auto column = h.node_features().values();
      for (std::size_t i = 0; i < h.num_nodes(); ++i) {
        const auto expected = moment_capsule_reference(i, h, column, 3);
        for (std::size_t q = 0; q < 3; ++q)
          oracle_err = std::max(oracle_err, std::abs(moments(i, 0, q) - expected[q]));
      }

      // Equivariance.
      const Graph e = random_graph(uniform_size(rng, 1, 30), 0.2, 3, rng);
      const auto perm = random_permutation(e.num_nodes(), rng);
      const Graph pe = permute_graph(e, perm);
      auto caps = CapsuleLayerParams::glorot(3, 4, 3, 2, rng);
      const Tensor out = graph_capsule_forward(
          e.node_features(), laplacian_powers(build_laplacian(e), 2), caps, Activation::tanh);
      const Tensor pout = graph_capsule_forward(
          pe.node_features(), laplacian_powers(build_laplacian(pe), 2), caps, Activation::tanh);
      equiv_err = std::max(equiv_err, max_abs_diff(permute_rows(out, perm), pout));

      // Covariance against a double loop.
      const Tensor m = random_matrix(uniform_size(rng, 1, 20), uniform_size(rng, 1, 8), rng);
      const Tensor r = covariance_readout(m);
      const std::size_t n = m.rows();
      const std::size_t f = m.cols();
      std::vector<double> mu(f, 0.0);
      for (std::size_t j = 0; j < f; ++j) {
        for (std::size_t i = 0; i < n; ++i) mu[j] += m(i, j);
        mu[j] /= static_cast<double>(n);
      }
      std::size_t pos = f;
      for (std::size_t a = 0; a < f; ++a) {
        cov_err = std::max(cov_err, std::abs(r[a] - mu[a]));
        for (std::size_t b = a; b < f; ++b, ++pos) {
          double c = 0.0;
          for (std::size_t i = 0; i < n; ++i) c += (m(i, a) - mu[a]) * (m(i, b) - mu[b]);
          cov_err = std::max(cov_err, std::abs(r[pos] - c / static_cast<double>(n)));
        }
      }
      if (r.size() != covariance_readout_size(f)) cov_err = INFINITY;

      // Readout invariance over a capsule stack.
      const auto stack = DiagnosticStack::random(3, rng());
      readout_err = std::max(readout_err, max_abs_diff(covariance_readout(stack.node_features(e)),
                                                       covariance_readout(stack.node_features(pe))));
    }
    results.push_back(bounded("single-order capsule equals polynomial convolution",
                              "polynomial filter convolution", conv_err, 1e-12));
    results.push_back(bounded("mean-filter capsule matches neighborhood mean oracle",
                              "neighborhood mean aggregation", oracle_err, 1e-10));
    results.push_back(bounded("mean-filter capsule matches raw moment oracle", "moment capsule",
                              oracle_err, 1e-10));
    results.push_back(bounded("capsule layer is permutation equivariant", "moment capsule",
                              equiv_err, 1e-9));
    results.push_back(bounded("covariance readout matches a double loop", "covariance readout",
                              cov_err, 1e-12));
    results.push_back(bounded("covariance readout of a capsule stack is permutation invariant",
                              "covariance readout", readout_err, 1e-8));
  }

  // Subgraph feature test on pairs whose added node heads the sort key.
  {
    std::size_t displaced = 0;
    std::size_t aligned = 0;
    std::size_t pairs = 0;
    for (std::size_t draws = 0; pairs < trials && draws < 10 * trials; ++draws) {
      const Graph small = random_graph(uniform_size(rng, 4, 10), 0.4, 1, rng);
      const auto pair =
          dominated_supergraph(small, uniform_size(rng, 0, small.num_nodes() - 1), options.seed + draws);
      if (!pair) continue;
      ++pairs;
      const auto sorted = feature_test_diagnostic(small, pair->large, ReadoutKind::max_sort,
                                                  pair->stack, {}, small.num_nodes());
      const auto cov = feature_test_diagnostic(small, pair->large, ReadoutKind::covariance, pair->stack);
      if (sorted.rank_displacement >= 1) ++displaced;
      if (cov.aligned) ++aligned;
    }
    results.push_back({"max-sort readout loses coordinate alignment on subgraph pairs",
                       "max-sort readout subgraph test", pairs == trials && displaced == pairs,
                       std::to_string(displaced) + "/" + std::to_string(pairs) + " displaced"});
    results.push_back({"covariance readout keeps coordinate alignment on subgraph pairs",
                       "covariance readout subgraph test", pairs == trials && aligned == pairs,
                       std::to_string(aligned) + "/" + std::to_string(pairs) + " aligned"});
  }

  // Whole model.
  {
    double invariance = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const Graph g = random_graph(uniform_size(rng, 1, 30), 0.2, 3, rng);
      const auto perm = random_permutation(g.num_nodes(), rng);
      const auto cfg = small_model(2, 2, 2, rng());
      const GcapsModel model(cfg, 3, 3);
      const Tensor a = model.logits(prepare_graph(g, cfg));
      const Tensor b = model.logits(prepare_graph(permute_graph(g, perm), cfg));
      invariance = std::max(invariance, max_abs_diff(a, b));
    }
    results.push_back(bounded("model logits are permutation invariant", "end-to-end model",
                              invariance, 1e-8));

    std::size_t violations = 0;
    std::size_t probes = 0;
    for (std::size_t degree = 0; degree <= 3; ++degree) {
      for (std::size_t depth = 1; depth <= 3; ++depth) {
        const Graph g = random_graph(uniform_size(rng, 2, 15), 0.15, 2, rng);
        const auto cfg = small_model(depth, 2, degree, rng());
        const GcapsModel model(cfg, 2, 2);
        const PreparedGraph pg = prepare_graph(g, cfg);
        const auto hops = graph_distance_matrix(g);
        const std::size_t radius = degree * depth;
        for (std::size_t i = 0; i < g.num_nodes(); ++i) {
          for (std::size_t u = 0; u < g.num_nodes(); ++u) {
            if (hops[i][u] != kUnreachable && hops[i][u] <= radius) continue;
            ++probes;
            if (locality_check(model, pg, i, u).max_change > 1e-12) ++violations;
          }
        }
      }
    }
    results.push_back({"nodes beyond K*depth hops never influence a node", "k-hop locality",
                       violations == 0,
                       std::to_string(violations) + " violations in " + std::to_string(probes) +
                           " probes"});

    {
      const Graph g = random_graph(8, 0.4, 3, rng);
      auto cfg = small_model(2, 2, 2, rng());
      // A narrow readout leaves fewer near-zero fc1 coordinates, whose difference
      // quotients sit at the roundoff floor.
      cfg.hidden = {2};
      cfg.concat_intermediate = false;
      cfg.fc_hidden = 4;
      cfg.l2 = 1e-3;
      // A bounded spectrum keeps curvature, and so the eps^2 term, small.
      cfg.filter = FilterKind::normalized_laplacian;
      GcapsModel model(cfg, 3, 2);
      const PreparedGraph pg = prepare_graph(g, cfg);
      const std::size_t indices[] = {0};
      model.fit_input_statistics(std::span<const PreparedGraph>(&pg, 1), indices);
      const auto& params = model.parameters();
      const auto report = finite_difference_check(
          [&](Tape& tape, std::span<const Var> vars) {
            auto pass = model.forward_with(tape, pg, vars);
            std::vector<Var> weights;
            for (std::size_t i = 0; i < vars.size(); ++i)
              if (params.regularized[i]) weights.push_back(vars[i]);
            return loss_with_l2(pass.logits, 1, weights, cfg.l2);
          },
          params.values);
      auto result = bounded("full model gradient matches central differences",
                            "reverse-mode differentiation", report.max_relative_error, 1e-5);
      result.detail += " at " + params.names[report.worst_parameter] + "[" +
                       std::to_string(report.worst_index) + "]: analytic " + fmt(report.analytic) +
                       ", numeric " + fmt(report.numeric);
      results.push_back(std::move(result));
    }

    {
      auto data = generate_synthetic(SyntheticTask::cycle_parity, 12, 3, 8, options.seed);
      data = assemble_node_features(data, FeaturePolicy::degree, FgsdConfig{});
      auto cfg = small_model(2, 2, 1, options.seed);
      cfg.dropout = 0.2;
      const auto prepared = prepare_dataset(data, cfg);
      std::vector<std::size_t> idx(prepared.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      TrainConfig tc;
      tc.epochs = 3;
      tc.batch_size = 4;
      tc.learning_rate = 0.01;
      auto run = [&] {
        GcapsModel model(cfg, data.feature_dim, 2);
        Rng train_rng(options.seed);
        train(model, prepared, idx, tc, train_rng);
        return model.parameters().values;
      };
      results.push_back({"training is bitwise reproducible for a fixed seed", "training loop",
                         run() == run(), ""});
    }
  }

  // dataset-io
  {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("gcaps_check_" + std::to_string(options.seed));
    auto data = generate_synthetic(SyntheticTask::cycle_vs_union, 6, 6, 10, options.seed);
    write_tu_dataset(data, dir, "SYN");
    const auto back = load_tu_dataset(dir, "SYN");
    bool same = back.size() == data.size();
    for (std::size_t i = 0; same && i < data.size(); ++i) {
      same = back.graphs[i].adjacency() == data.graphs[i].adjacency() &&
             back.graphs[i].label() == data.graphs[i].label();
    }
    std::filesystem::remove_all(dir);
    results.push_back({"TU files round trip", "dataset files", same, ""});
  }

  return results;
}

}  // namespace gcaps
