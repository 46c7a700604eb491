#include "gcaps/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gcaps {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("var: use of an unbound variable");
  return tape_->value(id_);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), {}, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool tracked = false;
  for (std::size_t in : inputs) tracked = tracked || nodes_.at(in).requires_grad;
  nodes_.push_back(Node{std::move(value), Tensor(), std::move(inputs),
                        tracked ? std::move(backward) : BackwardFn{}, tracked});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.empty() && !node.value.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& delta) {
  Tensor& g = grad_buffer(id);
  if (g.size() != delta.size()) {
    throw ShapeError("backward: gradient " + shape_to_string(delta.shape()) +
                     " does not match value " + shape_to_string(nodes_[id].value.shape()));
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss recorded on another tape");
  const std::size_t root = loss.id();
  if (nodes_.at(root).value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_to_string(nodes_[root].value.shape()));
  }
  // Interior buffers restart; only leaves accumulate across calls.
  for (Node& node : nodes_)
    if (node.backward) node.grad = Tensor();
  grad_buffer(root)[0] += 1.0;
  for (std::size_t id = root + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

void Tape::reset_gradients() {
  for (Node& node : nodes_) node.grad = Tensor();
}

Tensor Tape::gradient(Var v) const {
  const Node& node = nodes_.at(v.id());
  return node.grad.empty() ? Tensor(node.value.shape()) : node.grad;
}

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(Var a, const char* op) {
  if (!a.valid()) throw ContractError(std::string(op) + ": unbound operand");
  return *a.tape();
}

Tape& tape_of(std::span<const Var> parts, const char* op) {
  if (parts.empty()) throw ShapeError(std::string(op) + ": no operands");
  Tape& t = tape_of(parts.front(), op);
  for (Var v : parts) {
    if (v.tape() != &t) throw ContractError(std::string(op) + ": operands live on different tapes");
  }
  return t;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(t.shape()));
  }
}

std::size_t row_length(const Tensor& row, std::size_t cols, const char* op) {
  const bool ok = (row.rank() == 1 && row.dim(0) == cols) ||
                  (row.rank() == 2 && row.dim(0) == 1 && row.dim(1) == cols);
  if (!ok) {
    throw ShapeError(std::string(op) + ": row operand " + shape_to_string(row.shape()) +
                     " does not match " + std::to_string(cols) + " columns");
  }
  return cols;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  Tensor out = matmul(a.value(), b.value());
  return t.record(std::move(out), {a.id(), b.id()}, [](Tape& tp, std::size_t id) {
    const auto in = tp.inputs(id);
    const Tensor& g = tp.upstream(id);
    if (tp.requires_grad(in[0])) tp.accumulate(in[0], matmul(g, tp.value(in[1]).transposed()));
    if (tp.requires_grad(in[1])) tp.accumulate(in[1], matmul(tp.value(in[0]).transposed(), g));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  require_matrix(a.value(), "transpose");
  return t.record(a.value().transposed(), {a.id()}, [](Tape& tp, std::size_t id) {
    tp.accumulate(tp.inputs(id)[0], tp.upstream(id).transposed());
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  return t.record(a.value() + b.value(), {a.id(), b.id()}, [](Tape& tp, std::size_t id) {
    const auto in = tp.inputs(id);
    for (std::size_t k = 0; k < 2; ++k)
      if (tp.requires_grad(in[k])) tp.accumulate(in[k], tp.upstream(id));
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  return t.record(a.value() - b.value(), {a.id(), b.id()}, [](Tape& tp, std::size_t id) {
    const auto in = tp.inputs(id);
    const Tensor& g = tp.upstream(id);
    if (tp.requires_grad(in[0])) tp.accumulate(in[0], g);
    if (tp.requires_grad(in[1])) tp.accumulate(in[1], -1.0 * g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw ShapeError("mul: shape mismatch " + shape_to_string(av.shape()) + " vs " +
                     shape_to_string(bv.shape()));
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return t.record(std::move(out), {a.id(), b.id()}, [](Tape& tp, std::size_t id) {
    const auto in = tp.inputs(id);
    const Tensor& g = tp.upstream(id);
    for (std::size_t k = 0; k < 2; ++k) {
      if (!tp.requires_grad(in[k])) continue;
      const Tensor& other = tp.value(in[1 - k]);
      Tensor& dst = tp.grad_buffer(in[k]);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * other[i];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a, "scale");
  return t.record(s * a.value(), {a.id()}, [s](Tape& tp, std::size_t id) {
    const Tensor& g = tp.upstream(id);
    Tensor& dst = tp.grad_buffer(tp.inputs(id)[0]);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += s * g[i];
  });
}

Var hadamard_power(Var x, int p) {
  Tape& t = tape_of(x, "hadamard_power");
  if (p < 1) {
    throw ContractError("hadamard_power: order must be >= 1, got " + std::to_string(p));
  }
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double acc = xv[i];
    for (int k = 1; k < p; ++k) acc *= xv[i];
    out[i] = acc;
  }
  return t.record(std::move(out), {x.id()}, [p](Tape& tp, std::size_t id) {
    const std::size_t in = tp.inputs(id)[0];
    const Tensor& xv = tp.value(in);
    const Tensor& g = tp.upstream(id);
    Tensor& dst = tp.grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double d = static_cast<double>(p);
      for (int k = 1; k < p; ++k) d *= xv[i];
      dst[i] += g[i] * d;
    }
  });
}

Var activate(Var x, Activation kind) {
  Tape& t = tape_of(x, "activate");
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    switch (kind) {
      case Activation::identity: out[i] = xv[i]; break;
      case Activation::tanh: out[i] = std::tanh(xv[i]); break;
      case Activation::relu: out[i] = xv[i] > 0.0 ? xv[i] : 0.0; break;
    }
  }
  return t.record(std::move(out), {x.id()}, [kind](Tape& tp, std::size_t id) {
    const std::size_t in = tp.inputs(id)[0];
    const Tensor& g = tp.upstream(id);
    const Tensor& y = tp.value(id);
    const Tensor& xv = tp.value(in);
    Tensor& dst = tp.grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (kind) {
        case Activation::identity: dst[i] += g[i]; break;
        case Activation::tanh: dst[i] += g[i] * (1.0 - y[i] * y[i]); break;
        case Activation::relu: dst[i] += xv[i] > 0.0 ? g[i] : 0.0; break;
      }
    }
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row, "add_row");
  const Tensor& av = a.value();
  require_matrix(av, "add_row");
  const std::size_t n = row_length(row.value(), av.cols(), "add_row");
  const std::size_t m = av.rows();
  Tensor out = av;
  const Tensor& rv = row.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += rv[j];
  return t.record(std::move(out), {a.id(), row.id()}, [m, n](Tape& tp, std::size_t id) {
    const auto in = tp.inputs(id);
    const Tensor& g = tp.upstream(id);
    if (tp.requires_grad(in[0])) tp.accumulate(in[0], g);
    if (tp.requires_grad(in[1])) {
      Tensor& dst = tp.grad_buffer(in[1]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dst[j] += g[i * n + j];
    }
  });
}

Var mul_row(Var a, Var row) {
  Tape& t = same_tape(a, row, "mul_row");
  const Tensor& av = a.value();
  require_matrix(av, "mul_row");
  const std::size_t n = row_length(row.value(), av.cols(), "mul_row");
  const std::size_t m = av.rows();
  Tensor out = av;
  const Tensor& rv = row.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) *= rv[j];
  return t.record(std::move(out), {a.id(), row.id()}, [m, n](Tape& tp, std::size_t id) {
    const auto in = tp.inputs(id);
    const Tensor& g = tp.upstream(id);
    const Tensor& av = tp.value(in[0]);
    const Tensor& rv = tp.value(in[1]);
    if (tp.requires_grad(in[0])) {
      Tensor& dst = tp.grad_buffer(in[0]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dst[i * n + j] += g[i * n + j] * rv[j];
    }
    if (tp.requires_grad(in[1])) {
      Tensor& dst = tp.grad_buffer(in[1]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dst[j] += g[i * n + j] * av[i * n + j];
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tape& t = tape_of(x, "reshape");
  return t.record(x.value().reshaped(std::move(shape)), {x.id()}, [](Tape& tp, std::size_t id) {
    tp.accumulate(tp.inputs(id)[0], tp.upstream(id));
  });
}

Var concat_columns(std::span<const Var> parts) {
  Tape& t = tape_of(parts, "concat_columns");
  const std::size_t m = parts.front().value().rank() == 2 ? parts.front().value().rows() : 0;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (Var v : parts) {
    const Tensor& pv = v.value();
    if (pv.rank() != 2 || pv.rows() != m) {
      throw ShapeError("concat_columns: part " + shape_to_string(pv.shape()) +
                       " does not have " + std::to_string(m) + " rows");
    }
    widths.push_back(pv.cols());
    ids.push_back(v.id());
    total += pv.cols();
  }
  Tensor out({m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out(i, offset + j) = pv(i, j);
    offset += widths[k];
  }
  return t.record(std::move(out), std::move(ids), [m, widths, total](Tape& tp, std::size_t id) {
    const auto in = tp.inputs(id);
    const Tensor& g = tp.upstream(id);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      if (tp.requires_grad(in[k])) {
        Tensor& dst = tp.grad_buffer(in[k]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j)
            dst[i * widths[k] + j] += g[i * total + offset + j];
      }
      offset += widths[k];
    }
  });
}

Var concat_flat(std::span<const Var> parts) {
  Tape& t = tape_of(parts, "concat_flat");
  std::vector<double> values;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> sizes;
  for (Var v : parts) {
    const auto pv = v.value().values();
    values.insert(values.end(), pv.begin(), pv.end());
    ids.push_back(v.id());
    sizes.push_back(pv.size());
  }
  const std::size_t total = values.size();
  return t.record(Tensor({total}, std::move(values)), std::move(ids),
                  [sizes](Tape& tp, std::size_t id) {
                    const auto in = tp.inputs(id);
                    const Tensor& g = tp.upstream(id);
                    std::size_t offset = 0;
                    for (std::size_t k = 0; k < in.size(); ++k) {
                      if (tp.requires_grad(in[k])) {
                        Tensor& dst = tp.grad_buffer(in[k]);
                        for (std::size_t i = 0; i < sizes[k]; ++i) dst[i] += g[offset + i];
                      }
                      offset += sizes[k];
                    }
                  });
}

Var stack_last(std::span<const Var> parts) {
  Tape& t = tape_of(parts, "stack_last");
  const Shape base = parts.front().value().shape();
  const std::size_t count = parts.size();
  std::vector<std::size_t> ids;
  for (Var v : parts) {
    if (v.value().shape() != base) {
      throw ShapeError("stack_last: part " + shape_to_string(v.value().shape()) +
                       " differs from " + shape_to_string(base));
    }
    ids.push_back(v.id());
  }
  Shape shape = base;
  shape.push_back(count);
  Tensor out(shape);
  const std::size_t n = shape_size(base);
  for (std::size_t q = 0; q < count; ++q) {
    const Tensor& pv = parts[q].value();
    for (std::size_t i = 0; i < n; ++i) out[i * count + q] = pv[i];
  }
  return t.record(std::move(out), std::move(ids), [n, count](Tape& tp, std::size_t id) {
    const auto in = tp.inputs(id);
    const Tensor& g = tp.upstream(id);
    for (std::size_t q = 0; q < count; ++q) {
      if (!tp.requires_grad(in[q])) continue;
      Tensor& dst = tp.grad_buffer(in[q]);
      for (std::size_t i = 0; i < n; ++i) dst[i] += g[i * count + q];
    }
  });
}

Var gather(Var x, std::vector<std::size_t> indices) {
  Tape& t = tape_of(x, "gather");
  const Tensor& xv = x.value();
  Tensor out({indices.size()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xv.size()) {
      throw ShapeError("gather: index " + std::to_string(indices[i]) + " outside " +
                       shape_to_string(xv.shape()));
    }
    out[i] = xv[indices[i]];
  }
  return t.record(std::move(out), {x.id()},
                  [idx = std::move(indices)](Tape& tp, std::size_t id) {
                    const Tensor& g = tp.upstream(id);
                    Tensor& dst = tp.grad_buffer(tp.inputs(id)[0]);
                    for (std::size_t i = 0; i < idx.size(); ++i) dst[idx[i]] += g[i];
                  });
}

Var column_mean(Var x) {
  Tape& t = tape_of(x, "column_mean");
  const Tensor& xv = x.value();
  require_matrix(xv, "column_mean");
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  if (m == 0) throw ShapeError("column_mean: no rows");
  Tensor out({1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += xv(i, j);
  for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
  return t.record(std::move(out), {x.id()}, [m, n](Tape& tp, std::size_t id) {
    const Tensor& g = tp.upstream(id);
    Tensor& dst = tp.grad_buffer(tp.inputs(id)[0]);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dst[i * n + j] += g[j] * inv;
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x, "sum");
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return t.record(Tensor({1}, {acc}), {x.id()}, [](Tape& tp, std::size_t id) {
    const double g = tp.upstream(id)[0];
    Tensor& dst = tp.grad_buffer(tp.inputs(id)[0]);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g;
  });
}

Var sum_squares(Var x) {
  Tape& t = tape_of(x, "sum_squares");
  double acc = 0.0;
  for (double v : x.value().values()) acc += v * v;
  return t.record(Tensor({1}, {acc}), {x.id()}, [](Tape& tp, std::size_t id) {
    const double g = tp.upstream(id)[0];
    const std::size_t in = tp.inputs(id)[0];
    const Tensor& xv = tp.value(in);
    Tensor& dst = tp.grad_buffer(in);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += 2.0 * xv[i] * g;
  });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

Var softmax_cross_entropy(Var logits, std::size_t target) {
  Tape& t = tape_of(logits, "softmax_cross_entropy");
  const auto z = logits.value().values();
  if (z.size() < 2) throw ShapeError("softmax_cross_entropy: need at least two classes");
  if (target >= z.size()) {
    throw std::out_of_range("softmax_cross_entropy: target " + std::to_string(target) +
                            " outside " + std::to_string(z.size()) + " classes");
  }
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - top);
  const double loss = top + std::log(total) - z[target];
  return t.record(Tensor({1}, {loss}), {logits.id()}, [target](Tape& tp, std::size_t id) {
    const double g = tp.upstream(id)[0];
    const std::size_t in = tp.inputs(id)[0];
    const std::vector<double> p = softmax(tp.value(in).values());
    Tensor& dst = tp.grad_buffer(in);
    for (std::size_t i = 0; i < p.size(); ++i) {
      dst[i] += g * (p[i] - (i == target ? 1.0 : 0.0));
    }
  });
}

GradientCheckReport finite_difference_check(const ScalarBuilder& f,
                                            std::vector<Tensor> params, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_difference_check: eps must be positive");

  auto evaluate = [&](const std::vector<Tensor>& theta) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(theta.size());
    for (const Tensor& p : theta) vars.push_back(tape.constant(p));
    return f(tape, vars).value()[0];
  };

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : params) vars.push_back(tape.variable(p));
    tape.backward(f(tape, vars));
    for (Var v : vars) analytic.push_back(tape.gradient(v));
  }

  GradientCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double saved = params[k][i];
      params[k][i] = saved + eps;
      const double up = evaluate(params);
      params[k][i] = saved - eps;
      const double down = evaluate(params);
      params[k][i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (err > report.max_relative_error || std::isnan(err)) {
        report = {err, k, i, a, numeric};
        if (std::isnan(err)) return report;
      }
    }
  }
  return report;
}

}  // namespace gcaps
