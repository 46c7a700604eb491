#include "gcaps/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gcaps {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor w({fan_in, fan_out});
  for (double& v : w.values()) v = dist(rng);
  return w;
}

CapsuleLayerParams CapsuleLayerParams::glorot(std::size_t in_width, std::size_t out_dim,
                                              std::size_t order, std::size_t degree, Rng& rng) {
  if (order < 1) throw ContractError("capsule layer: order must be >= 1");
  CapsuleLayerParams p{in_width, out_dim, order, degree, {}};
  p.blocks.reserve(order * (degree + 1));
  for (std::size_t i = 0; i < order * (degree + 1); ++i) {
    p.blocks.push_back(glorot_uniform(in_width, out_dim, rng));
  }
  return p;
}

DenseLayerParams DenseLayerParams::glorot(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  return {glorot_uniform(in_dim, out_dim, rng), Tensor({out_dim})};
}

Var flatten_nodes(Var x) {
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("flatten_nodes: scalar input");
  if (s.size() == 2) return x;
  return reshape(x, {s[0], shape_size(s) / std::max<std::size_t>(s[0], 1)});
}

namespace {

void check_filter_powers(std::span<const Var> powers, std::size_t n, const char* op) {
  if (powers.empty()) throw ShapeError(std::string(op) + ": no filter powers");
  for (std::size_t k = 0; k < powers.size(); ++k) {
    const Shape& s = powers[k].shape();
    if (s.size() != 2 || s[0] != n || s[1] != n) {
      throw ShapeError(std::string(op) + ": filter power " + std::to_string(k) + " is " +
                       shape_to_string(s) + ", expected " + std::to_string(n) + "x" +
                       std::to_string(n));
    }
  }
}

// Σ_k M^k · x · W_k in a fixed evaluation order shared by both layer kinds.
Var filtered_sum(Var x, std::span<const Var> powers, std::span<const Var> weights) {
  Var total;
  for (std::size_t k = 0; k < powers.size(); ++k) {
    Var term = matmul(matmul(powers[k], x), weights[k]);
    total = total.valid() ? add(total, term) : term;
  }
  return total;
}

std::vector<Var> bind_constants(Tape& tape, std::span<const Tensor> tensors) {
  std::vector<Var> out;
  out.reserve(tensors.size());
  for (const Tensor& t : tensors) out.push_back(tape.constant(t));
  return out;
}

}  // namespace

Var graph_capsule_forward(Var x, std::span<const Var> filter_powers, std::span<const Var> blocks,
                          Activation activation) {
  Var flat = flatten_nodes(x);
  const std::size_t n = flat.shape()[0];
  const std::size_t width = flat.shape()[1];
  check_filter_powers(filter_powers, n, "graph_capsule_forward");
  const std::size_t terms = filter_powers.size();
  if (blocks.empty() || blocks.size() % terms != 0) {
    throw ShapeError("graph_capsule_forward: " + std::to_string(blocks.size()) +
                     " weight blocks cannot be split over " + std::to_string(terms) +
                     " filter powers");
  }
  const std::size_t order = blocks.size() / terms;
  const std::size_t out_dim = blocks.front().shape().size() == 2 ? blocks.front().shape()[1] : 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Shape& s = blocks[i].shape();
    if (s.size() != 2 || s[0] != width || s[1] != out_dim) {
      throw ShapeError("graph_capsule_forward: block (p=" + std::to_string(i / terms + 1) +
                       ", k=" + std::to_string(i % terms) + ") is " + shape_to_string(s) +
                       ", expected " + std::to_string(width) + "x" + std::to_string(out_dim));
    }
  }

  std::vector<Var> capsules;
  capsules.reserve(order);
  for (std::size_t q = 1; q <= order; ++q) {
    Var powered = hadamard_power(flat, static_cast<int>(q));
    Var pre = filtered_sum(powered, filter_powers, blocks.subspan((q - 1) * terms, terms));
    capsules.push_back(activate(pre, activation));
  }
  return stack_last(capsules);
}

Tensor graph_capsule_forward(const Tensor& x, std::span<const Tensor> filter_powers,
                             const CapsuleLayerParams& params, Activation activation) {
  if (params.degree + 1 != filter_powers.size()) {
    throw ShapeError("graph_capsule_forward: layer has degree " + std::to_string(params.degree) +
                     " but " + std::to_string(filter_powers.size()) + " filter powers were given");
  }
  Tape tape;
  Var xv = tape.constant(x);
  const auto powers = bind_constants(tape, filter_powers);
  const auto blocks = bind_constants(tape, params.blocks);
  return graph_capsule_forward(xv, powers, blocks, activation).value();
}

Var graph_conv_forward(Var x, std::span<const Var> filter_powers, std::span<const Var> weights,
                       Activation activation) {
  Var flat = flatten_nodes(x);
  check_filter_powers(filter_powers, flat.shape()[0], "graph_conv_forward");
  if (weights.size() != filter_powers.size()) {
    throw ShapeError("graph_conv_forward: " + std::to_string(weights.size()) +
                     " weight matrices for " + std::to_string(filter_powers.size()) +
                     " filter powers");
  }
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const Shape& s = weights[k].shape();
    if (s.size() != 2 || s[0] != flat.shape()[1] || s[1] != weights[0].shape()[1]) {
      throw ShapeError("graph_conv_forward: weight " + std::to_string(k) + " is " +
                       shape_to_string(s));
    }
  }
  return activate(filtered_sum(flat, filter_powers, weights), activation);
}

Tensor graph_conv_forward(const Tensor& x, std::span<const Tensor> filter_powers,
                          std::span<const Tensor> weights, Activation activation) {
  Tape tape;
  Var xv = tape.constant(x);
  const auto powers = bind_constants(tape, filter_powers);
  const auto w = bind_constants(tape, weights);
  return graph_conv_forward(xv, powers, w, activation).value();
}

Var dense_forward(Var x, Var weight, Var bias) {
  const std::size_t in = x.value().size();
  return add_row(matmul(reshape(x, {1, in}), weight), bias);
}

double scalar_conv_reference(std::size_t node, const Graph& g, std::span<const double> x) {
  return moment_capsule_reference(node, g, x, 1)[0];
}

std::vector<double> moment_capsule_reference(std::size_t node, const Graph& g,
                                             std::span<const double> x, std::size_t order) {
  if (node >= g.num_nodes()) {
    throw std::out_of_range("moment_capsule_reference: node " + std::to_string(node) +
                            " outside graph of " + std::to_string(g.num_nodes()) + " nodes");
  }
  if (x.size() != g.num_nodes()) {
    throw ShapeError("moment_capsule_reference: feature column has " +
                     std::to_string(x.size()) + " entries for " +
                     std::to_string(g.num_nodes()) + " nodes");
  }
  std::vector<double> moments(order, 0.0);
  std::size_t members = 0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k) {
    const double w = (k == node) ? 1.0 : g.adjacency()(node, k);
    if (w == 0.0) continue;
    ++members;
    double power = 1.0;
    for (std::size_t q = 0; q < order; ++q) {
      power *= x[k];
      moments[q] += w * power;
    }
  }
  for (double& m : moments) m /= static_cast<double>(members);
  return moments;
}

std::size_t covariance_readout_size(std::size_t features) {
  return features + features * (features + 1) / 2;
}

Var covariance_readout(Var h) {
  Var flat = flatten_nodes(h);
  const std::size_t n = flat.shape()[0];
  const std::size_t f = flat.shape()[1];
  if (n == 0) throw ShapeError("covariance_readout: no nodes");
  Var mean = column_mean(flat);
  Var centered = add_row(flat, scale(mean, -1.0));
  Var cov = scale(matmul(transpose(centered), centered), 1.0 / static_cast<double>(n));

  std::vector<std::size_t> upper;
  upper.reserve(f * (f + 1) / 2);
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = i; j < f; ++j) upper.push_back(i * f + j);
  const Var parts[] = {reshape(mean, {f}), gather(cov, std::move(upper))};
  return concat_flat(parts);
}

Tensor covariance_readout(const Tensor& h) {
  Tape tape;
  return covariance_readout(tape.constant(h)).value();
}

Var mean_readout(Var h) {
  Var flat = flatten_nodes(h);
  return reshape(column_mean(flat), {flat.shape()[1]});
}

Var concat_intermediate(std::span<const Var> per_layer_outputs) {
  std::vector<Var> flat;
  flat.reserve(per_layer_outputs.size());
  for (Var v : per_layer_outputs) flat.push_back(flatten_nodes(v));
  if (flat.size() == 1) return flat.front();
  return concat_columns(flat);
}

Tensor concat_intermediate(std::span<const Tensor> per_layer_outputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : per_layer_outputs) vars.push_back(tape.constant(t));
  return concat_intermediate(vars).value();
}

std::vector<std::size_t> max_sort_order(const Tensor& h) {
  const std::size_t n = h.rows();
  const std::size_t last = h.cols() - 1;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return h(a, last) > h(b, last); });
  return order;
}

Tensor max_sort_readout(const Tensor& h, std::size_t k) {
  if (k == 0) throw ContractError("max_sort_readout: k must be >= 1");
  if (h.rank() != 2 || h.cols() == 0) {
    throw ShapeError("max_sort_readout: expected N×F with F >= 1, got " +
                     shape_to_string(h.shape()));
  }
  const auto order = max_sort_order(h);
  Tensor out({k});
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) out[r] = h(order[r], h.cols() - 1);
  return out;
}

DiagnosticStack DiagnosticStack::random(std::size_t feature_dim, unsigned long long seed,
                                        std::size_t depth, std::size_t hidden, std::size_t order,
                                        std::size_t filter_degree) {
  Rng rng(seed);
  DiagnosticStack stack;
  stack.filter_degree = filter_degree;
  std::size_t width = feature_dim;
  for (std::size_t l = 0; l < depth; ++l) {
    stack.layers.push_back(CapsuleLayerParams::glorot(width, hidden, order, filter_degree, rng));
    width = hidden * order;
  }
  return stack;
}

Tensor DiagnosticStack::node_features(const Graph& g) const {
  const auto powers = laplacian_powers(build_laplacian(g), filter_degree);
  std::vector<Tensor> outputs;
  Tensor x = g.node_features();
  for (const CapsuleLayerParams& layer : layers) {
    x = graph_capsule_forward(x, powers, layer, activation);
    outputs.push_back(x);
  }
  return concat_intermediate(outputs);
}

namespace {

std::vector<ReadoutCoordinate> covariance_coordinates(std::size_t f) {
  std::vector<ReadoutCoordinate> coords;
  for (std::size_t i = 0; i < f; ++i) coords.push_back({ReadoutCoordinate::Kind::mean, i, i});
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = i; j < f; ++j)
      coords.push_back({ReadoutCoordinate::Kind::covariance, i, j});
  return coords;
}

std::vector<ReadoutCoordinate> rank_coordinates(const Tensor& h, std::size_t k,
                                                std::span<const std::size_t> relabel) {
  const auto order = max_sort_order(h);
  std::vector<ReadoutCoordinate> coords;
  for (std::size_t r = 0; r < k; ++r) {
    if (r < order.size()) {
      const std::size_t node = relabel.empty() ? order[r] : relabel[order[r]];
      coords.push_back({ReadoutCoordinate::Kind::rank, r, node});
    } else {
      coords.push_back({ReadoutCoordinate::Kind::padding, r, 0});
    }
  }
  return coords;
}

}  // namespace

FeatureTestReport feature_test_diagnostic(const Graph& small, const Graph& large,
                                          ReadoutKind readout, const DiagnosticStack& stack,
                                          std::span<const std::size_t> embedding, std::size_t k) {
  std::vector<std::size_t> map(embedding.begin(), embedding.end());
  if (map.empty()) {
    if (small.num_nodes() > large.num_nodes()) {
      throw GraphError("feature_test_diagnostic: first graph is larger than the second");
    }
    map.resize(small.num_nodes());
    std::iota(map.begin(), map.end(), std::size_t{0});
  }
  if (map.size() != small.num_nodes()) {
    throw GraphError("feature_test_diagnostic: embedding has " + std::to_string(map.size()) +
                     " entries for " + std::to_string(small.num_nodes()) + " nodes");
  }

  const Tensor h_small = stack.node_features(small);
  const Tensor h_large = stack.node_features(large);

  FeatureTestReport report;
  report.readout = readout;
  if (readout == ReadoutKind::covariance) {
    report.features_small = covariance_readout(h_small);
    report.features_large = covariance_readout(h_large);
    report.coordinates_small = covariance_coordinates(h_small.cols());
    report.coordinates_large = covariance_coordinates(h_large.cols());
  } else {
    const std::size_t top = k ? k : large.num_nodes();
    report.features_small = max_sort_readout(h_small, top);
    report.features_large = max_sort_readout(h_large, top);
    report.coordinates_small = rank_coordinates(h_small, top, map);
    report.coordinates_large = rank_coordinates(h_large, top, {});
  }

  const std::size_t common =
      std::min(report.coordinates_small.size(), report.coordinates_large.size());
  report.rank_displacement =
      std::max(report.coordinates_small.size(), report.coordinates_large.size()) - common;
  for (std::size_t i = 0; i < common; ++i) {
    if (!(report.coordinates_small[i] == report.coordinates_large[i])) ++report.rank_displacement;
  }
  report.aligned = report.rank_displacement == 0;
  return report;
}

}  // namespace gcaps
