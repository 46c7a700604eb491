#ifndef GCAPS_AUTODIFF_HPP
#define GCAPS_AUTODIFF_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "gcaps/tensor.hpp"

namespace gcaps {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/**
 * Computation record for reverse-mode differentiation.
 *
 * Nodes are appended in evaluation order, so the node list is already a
 * topological order and backward() is a single reverse sweep. A tape belongs
 * to one thread; build a separate tape per forward pass.
 */
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that receives a gradient (a parameter).
  Var variable(Tensor value);
  /// Input that never receives a gradient.
  Var constant(Tensor value);

  /// Records the result of a primitive. `backward` distributes grad(out) onto
  /// the inputs; it is only invoked when some input requires a gradient.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  /// Reverse sweep from a scalar node. Gradients of nodes the loss does not
  /// depend on stay zero. Calling it twice without reset_gradients() adds up.
  void backward(Var loss);
  void reset_gradients();

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& value(Var v) const { return value(v.id()); }
  /// Gradient of the last backward() target with respect to `v`.
  Tensor gradient(Var v) const;

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const std::size_t> inputs(std::size_t id) const { return nodes_[id].inputs; }

  /// Accumulates `delta` into the gradient buffer of node `id`.
  void accumulate(std::size_t id, const Tensor& delta);
  Tensor& grad_buffer(std::size_t id);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

enum class Activation { identity, tanh, relu };

// Differentiable primitives. Every operand must live on the same tape.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// Elementwise p-th power; p = 0 is rejected.
Var hadamard_power(Var x, int p);
Var activate(Var x, Activation kind);
/// a (m×n) plus a row vector (n or 1×n) added to every row.
Var add_row(Var a, Var row);
/// a (m×n) times a row vector (n or 1×n), elementwise per row.
Var mul_row(Var a, Var row);
Var reshape(Var x, Shape shape);
/// Column-wise concatenation of rank-2 tensors sharing a row count.
Var concat_columns(std::span<const Var> parts);
/// Concatenation of flattened values.
Var concat_flat(std::span<const Var> parts);
/// Stacks equally shaped tensors along a new trailing axis.
Var stack_last(std::span<const Var> parts);
/// Picks flat entries by index into a vector.
Var gather(Var x, std::vector<std::size_t> indices);
/// Mean of each column of a rank-2 tensor, as a 1×n row.
Var column_mean(Var x);
Var sum(Var x);
/// Sum of squared entries.
Var sum_squares(Var x);
/// Max-subtracted log-sum-exp cross entropy for one example.
Var softmax_cross_entropy(Var logits, std::size_t target);

std::vector<double> softmax(std::span<const double> logits);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Builds a scalar on the supplied tape from parameter handles.
using ScalarBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/**
 * Compares backward() against central differences for every parameter entry.
 *
 * The relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
 */
GradientCheckReport finite_difference_check(const ScalarBuilder& f,
                                            std::vector<Tensor> params,
                                            double eps = 1e-5);

}  // namespace gcaps

#endif  // GCAPS_AUTODIFF_HPP
