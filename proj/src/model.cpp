#include "gcaps/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "gcaps/dataset.hpp"

namespace gcaps {

namespace {

constexpr double kRunningMomentum = 0.1;
constexpr double kVarianceEpsilon = 1e-5;

}  // namespace

void ModelConfig::validate() const {
  if (depth < 1) throw ConfigError("model: depth must be >= 1");
  if (capsule_order < 1 || capsule_order > 4) {
    throw ConfigError("model: capsule order must be in [1, 4], got " +
                      std::to_string(capsule_order));
  }
  if (hidden.empty() || (hidden.size() != 1 && hidden.size() != depth)) {
    throw ConfigError("model: need one hidden width or one per layer (" + std::to_string(depth) +
                      "), got " + std::to_string(hidden.size()));
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("model: hidden widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must be in [0, 1)");
  if (!(l2 >= 0.0)) throw ConfigError("model: l2 must be non-negative");
}

std::size_t ModelConfig::hidden_at(std::size_t layer) const {
  return hidden.size() == 1 ? hidden.front() : hidden.at(layer);
}

std::size_t ModelConfig::fc_width() const {
  return fc_hidden ? fc_hidden : hidden_at(depth - 1);
}

void ParameterSet::add(std::string name, Tensor value, bool is_weight) {
  names.push_back(std::move(name));
  values.push_back(std::move(value));
  regularized.push_back(is_weight);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const Tensor& t : values) total += t.size();
  return total;
}

PreparedGraph prepare_graph(const Graph& g, const ModelConfig& cfg) {
  return PreparedGraph{g.node_features(),
                       laplacian_powers(build_filter(g, cfg.filter), cfg.filter_degree),
                       g.label().value_or(0)};
}

std::vector<PreparedGraph> prepare_dataset(const GraphDataset& dataset, const ModelConfig& cfg) {
  std::vector<PreparedGraph> out;
  out.reserve(dataset.size());
  for (const Graph& g : dataset.graphs) out.push_back(prepare_graph(g, cfg));
  return out;
}

GcapsModel::GcapsModel(ModelConfig cfg, std::size_t feature_dim, std::size_t num_classes)
    : cfg_(std::move(cfg)), feature_dim_(feature_dim), num_classes_(num_classes) {
  cfg_.validate();
  if (feature_dim_ == 0) throw ConfigError("model: node features are empty; choose a feature policy");
  if (num_classes_ < 2) throw ConfigError("model: need at least two classes");

  Rng rng(cfg_.seed);
  const std::size_t order = cfg_.capsule_order;
  const std::size_t degree = cfg_.filter_degree;
  std::size_t width = feature_dim_;
  std::size_t concat_width = 0;
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    const std::size_t h = cfg_.hidden_at(l);
    layer_block_offset_.push_back(params_.size());
    auto layer = CapsuleLayerParams::glorot(width, h, order, degree, rng);
    for (std::size_t q = 1; q <= order; ++q) {
      for (std::size_t k = 0; k <= degree; ++k) {
        params_.add("gc" + std::to_string(l + 1) + ".w" + std::to_string(q) + "." +
                        std::to_string(k),
                    std::move(layer.block(q, k)), true);
      }
    }
    stats_.push_back({Tensor({width}), Tensor({width}, 1.0)});
    width = h * order;
    concat_width += width;
  }
  const std::size_t f = cfg_.concat_intermediate ? concat_width : width;
  readout_dim_ = cfg_.readout == ReadoutMode::covariance_with_mean ? covariance_readout_size(f) : f;

  fc_offset_ = params_.size();
  const std::size_t fc = cfg_.fc_width();
  const std::size_t dims[][2] = {{readout_dim_, fc}, {fc, fc}, {fc, num_classes_}};
  const char* names[] = {"fc1", "fc2", "out"};
  for (std::size_t i = 0; i < 3; ++i) {
    auto dense = DenseLayerParams::glorot(dims[i][0], dims[i][1], rng);
    params_.add(std::string(names[i]) + ".w", std::move(dense.weight), true);
    params_.add(std::string(names[i]) + ".b", std::move(dense.bias), false);
  }
}

GcapsModel::Pass GcapsModel::run(Tape& tape, const PreparedGraph& g, bool training, Rng* rng,
                                 std::vector<FeatureStatistics>* observed,
                                 std::span<const Var> bound) const {
  if (g.features.rank() != 2 || g.features.cols() != feature_dim_) {
    throw ShapeError("model: graph features " + shape_to_string(g.features.shape()) +
                     " do not have " + std::to_string(feature_dim_) + " columns");
  }
  if (g.filter_powers.size() != cfg_.filter_degree + 1) {
    throw ShapeError("model: graph was prepared with " + std::to_string(g.filter_powers.size()) +
                     " filter powers, expected " + std::to_string(cfg_.filter_degree + 1));
  }
  const bool drop = training && cfg_.dropout > 0.0;
  if (drop && rng == nullptr) throw ContractError("model: dropout needs a random generator");

  Pass pass;
  if (!bound.empty()) {
    if (bound.size() != params_.size()) {
      throw ShapeError("model: " + std::to_string(bound.size()) + " bound parameters for " +
                       std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < bound.size(); ++i) {
      if (bound[i].shape() != params_.values[i].shape()) {
        throw ShapeError("model: bound parameter " + params_.names[i] + " has shape " +
                         shape_to_string(bound[i].shape()));
      }
    }
    pass.params.assign(bound.begin(), bound.end());
  } else {
    for (const Tensor& p : params_.values) {
      pass.params.push_back(training ? tape.variable(p) : tape.constant(p));
    }
  }
  std::vector<Var> powers;
  for (const Tensor& m : g.filter_powers) powers.push_back(tape.constant(m));

  std::bernoulli_distribution keep(1.0 - cfg_.dropout);
  const double kept_scale = 1.0 / (1.0 - cfg_.dropout);
  auto dropout = [&](Var v) {
    if (!drop) return v;
    Tensor mask(v.shape());
    for (double& m : mask.values()) m = keep(*rng) ? kept_scale : 0.0;
    return mul(v, tape.constant(std::move(mask)));
  };

  const std::size_t terms = cfg_.filter_degree + 1;
  const std::size_t blocks_per_layer = cfg_.capsule_order * terms;
  std::vector<Var> outputs;
  Var h = tape.constant(g.features);
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    Var flat = flatten_nodes(h);
    if (observed) {
      const Tensor& x = flat.value();
      const std::size_t n = x.rows();
      const std::size_t w = x.cols();
      FeatureStatistics s{Tensor({w}), Tensor({w})};
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) s.mean[j] += x(i, j);
      for (std::size_t j = 0; j < w; ++j) s.mean[j] /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double d = x(i, j) - s.mean[j];
          s.variance[j] += d * d;
        }
      for (std::size_t j = 0; j < w; ++j) s.variance[j] /= static_cast<double>(n);
      observed->push_back(std::move(s));
    }
    if (cfg_.standardize) {
      const FeatureStatistics& s = stats_[l];
      Tensor shift = -1.0 * s.mean;
      Tensor inv_std(s.variance.shape());
      for (std::size_t j = 0; j < inv_std.size(); ++j) {
        inv_std[j] = 1.0 / std::sqrt(s.variance[j] + kVarianceEpsilon);
      }
      flat = mul_row(add_row(flat, tape.constant(std::move(shift))),
                     tape.constant(std::move(inv_std)));
    }
    const auto blocks = std::span<const Var>(pass.params).subspan(layer_block_offset_[l],
                                                                  blocks_per_layer);
    Var out = flatten_nodes(graph_capsule_forward(flat, powers, blocks, cfg_.activation));
    out = dropout(out);
    outputs.push_back(out);
    h = out;
  }

  pass.node_representation = cfg_.concat_intermediate ? concat_intermediate(outputs) : outputs.back();
  pass.readout = cfg_.readout == ReadoutMode::covariance_with_mean
                     ? covariance_readout(pass.node_representation)
                     : mean_readout(pass.node_representation);

  const Var* fc = pass.params.data() + fc_offset_;
  Var z = dropout(activate(dense_forward(pass.readout, fc[0], fc[1]), cfg_.activation));
  z = dropout(activate(dense_forward(z, fc[2], fc[3]), cfg_.activation));
  pass.logits = dense_forward(z, fc[4], fc[5]);
  return pass;
}

GcapsModel::Pass GcapsModel::forward(Tape& tape, const PreparedGraph& g, bool training, Rng* rng) {
  if (!training) return run(tape, g, false, nullptr, nullptr);
  std::vector<FeatureStatistics> observed;
  Pass pass = run(tape, g, true, rng, cfg_.standardize ? &observed : nullptr);
  // The first layer keeps the statistics fitted on the training split.
  for (std::size_t l = 1; l < observed.size(); ++l) {
    FeatureStatistics& s = stats_[l];
    for (std::size_t j = 0; j < s.mean.size(); ++j) {
      s.mean[j] += kRunningMomentum * (observed[l].mean[j] - s.mean[j]);
      s.variance[j] += kRunningMomentum * (observed[l].variance[j] - s.variance[j]);
    }
  }
  return pass;
}

GcapsModel::Pass GcapsModel::forward_eval(Tape& tape, const PreparedGraph& g) const {
  return run(tape, g, false, nullptr, nullptr);
}

GcapsModel::Pass GcapsModel::forward_with(Tape& tape, const PreparedGraph& g,
                                          std::span<const Var> params) const {
  if (params.empty()) throw ContractError("model: forward_with needs parameter handles");
  return run(tape, g, false, nullptr, nullptr, params);
}

Tensor GcapsModel::logits(const PreparedGraph& g) const {
  Tape tape;
  return forward_eval(tape, g).logits.value();
}

Tensor GcapsModel::node_representation(const PreparedGraph& g) const {
  Tape tape;
  return forward_eval(tape, g).node_representation.value();
}

void GcapsModel::fit_input_statistics(std::span<const PreparedGraph> graphs,
                                      std::span<const std::size_t> indices) {
  FeatureStatistics s{Tensor({feature_dim_}), Tensor({feature_dim_}, 1.0)};
  std::size_t count = 0;
  Tensor sum({feature_dim_});
  Tensor sum_sq({feature_dim_});
  for (std::size_t idx : indices) {
    const Tensor& x = graphs[idx].features;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < feature_dim_; ++j) sum[j] += x(i, j);
      ++count;
    }
  }
  if (count == 0) return;
  for (std::size_t j = 0; j < feature_dim_; ++j) s.mean[j] = sum[j] / static_cast<double>(count);
  for (std::size_t idx : indices) {
    const Tensor& x = graphs[idx].features;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < feature_dim_; ++j) {
        const double d = x(i, j) - s.mean[j];
        sum_sq[j] += d * d;
      }
  }
  for (std::size_t j = 0; j < feature_dim_; ++j) {
    s.variance[j] = sum_sq[j] / static_cast<double>(count);
  }
  stats_.front() = std::move(s);
}

void GcapsModel::assign_parameters(std::vector<Tensor> values) {
  if (values.size() != params_.size()) {
    throw ShapeError("model: " + std::to_string(values.size()) + " tensors for " +
                     std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_.values[i].shape()) {
      throw ShapeError("model: parameter " + params_.names[i] + " expects " +
                       shape_to_string(params_.values[i].shape()) + ", got " +
                       shape_to_string(values[i].shape()));
    }
  }
  params_.values = std::move(values);
}

Var loss_with_l2(Var logits, std::size_t target, std::span<const Var> weights, double l2) {
  if (!(l2 >= 0.0)) throw ContractError("loss_with_l2: l2 must be non-negative");
  Var loss = softmax_cross_entropy(logits, target);
  if (l2 == 0.0 || weights.empty()) return loss;
  Var penalty;
  for (Var w : weights) {
    Var term = sum_squares(w);
    penalty = penalty.valid() ? add(penalty, term) : term;
  }
  return add(loss, scale(penalty, l2));
}

std::size_t argmax_class(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

namespace {

constexpr char kMagic[4] = {'G', 'C', 'A', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw std::runtime_error("parameter blob: unexpected end of data");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void save_parameters(std::ostream& out, std::span<const Tensor> values) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(values.size()));
  for (const Tensor& t : values) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
  }
  for (const Tensor& t : values) {
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("parameter blob: write failed");
}

std::vector<Tensor> load_parameters(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("parameter blob: bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("parameter blob: unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  std::vector<Shape> shapes(count);
  for (Shape& shape : shapes) {
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 8) throw std::runtime_error("parameter blob: implausible rank");
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(get_le<std::uint64_t>(in)));
    }
  }
  std::vector<Tensor> values;
  values.reserve(count);
  for (Shape& shape : shapes) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    values.push_back(std::move(t));
  }
  return values;
}

}  // namespace gcaps
