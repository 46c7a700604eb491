#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "gcaps/autodiff.hpp"
#include "gcaps/checks.hpp"

using namespace gcaps;

TEST_CASE("gradient of a sum of squares is twice the input") {
  Tape tape;
  Var x = tape.variable(Tensor::vector({1, -2, 0.5}));
  tape.backward(sum_squares(x));
  CHECK(tape.gradient(x) == Tensor::vector({2, -4, 1}));
}

TEST_CASE("matmul gradients against the closed form") {
  // d/dA sum(A B) = 1 Bᵀ and d/dB sum(A B) = Aᵀ 1.
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  const Tensor b = Tensor::matrix({{1, -1, 2}, {0, 3, 1}});
  Tape tape;
  Var av = tape.variable(a);
  Var bv = tape.variable(b);
  tape.backward(sum(matmul(av, bv)));
  const Tensor ones_ab = Tensor({3, 3}, 1.0);
  CHECK(tape.gradient(av) == matmul(ones_ab, b.transposed()));
  CHECK(tape.gradient(bv) == matmul(a.transposed(), ones_ab));
}

TEST_CASE("hadamard power gradient is p x^(p-1)") {
  Tape tape;
  Var x = tape.variable(Tensor::vector({2, -1}));
  tape.backward(sum(hadamard_power(x, 3)));
  CHECK(tape.gradient(x) == Tensor::vector({12, 3}));
}

TEST_CASE("hadamard power below one is rejected") {
  Tape tape;
  Var x = tape.variable(Tensor::vector({1}));
  CHECK_THROWS_AS(hadamard_power(x, 0), ContractError);
}

TEST_CASE("backward needs a scalar") {
  Tape tape;
  Var x = tape.variable(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(tape.backward(scale(x, 2.0)), ContractError);
}

TEST_CASE("softmax cross entropy on uniform logits") {
  Tape tape;
  Var z = tape.variable(Tensor::matrix({{0, 0}}));
  Var loss = softmax_cross_entropy(z, 0);
  CHECK(loss.value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  tape.backward(loss);
  CHECK(tape.gradient(z) == Tensor::matrix({{-0.5, 0.5}}));
}

TEST_CASE("softmax cross entropy survives large logits") {
  Tape tape;
  Var z = tape.variable(Tensor::matrix({{1000, 0}}));
  CHECK(std::isfinite(softmax_cross_entropy(z, 1).value()[0]));
  CHECK(softmax_cross_entropy(z, 1).value()[0] == doctest::Approx(1000.0));
}

TEST_CASE("softmax cross entropy validates its target") {
  Tape tape;
  Var z = tape.variable(Tensor::matrix({{0, 1, 2}}));
  CHECK_THROWS_AS(softmax_cross_entropy(z, 3), std::out_of_range);
  CHECK_THROWS_AS(softmax_cross_entropy(tape.variable(Tensor::matrix({{1}})), 0), ShapeError);
}

TEST_CASE("unreached variables get zero gradient") {
  Tape tape;
  Var used = tape.variable(Tensor::vector({1}));
  Var unused = tape.variable(Tensor::vector({3, 4}));
  tape.backward(sum_squares(used));
  CHECK(tape.gradient(unused) == Tensor::vector({0, 0}));
}

TEST_CASE("constants are not tracked") {
  Tape tape;
  Var c = tape.constant(Tensor::vector({1, 2}));
  Var d = scale(c, 3.0);
  CHECK_FALSE(tape.requires_grad(d.id()));
}

TEST_CASE("a second backward adds to the first") {
  Tape tape;
  Var x = tape.variable(Tensor::vector({3}));
  Var loss = sum_squares(x);
  tape.backward(loss);
  tape.backward(loss);
  CHECK(tape.gradient(x)[0] == 12.0);
  tape.reset_gradients();
  tape.backward(loss);
  CHECK(tape.gradient(x)[0] == 6.0);
}

TEST_CASE("reshape is a gradient identity") {
  Tape tape;
  Var x = tape.variable(Tensor::matrix({{1, 2, 3}, {4, 5, 6}}));
  tape.backward(sum_squares(reshape(x, {3, 2})));
  CHECK(tape.gradient(x) == 2.0 * x.value());
}

TEST_CASE("column mean and row broadcasting") {
  Tape tape;
  Var x = tape.variable(Tensor::matrix({{1, 2}, {3, 6}}));
  CHECK(column_mean(x).value() == Tensor::matrix({{2, 4}}));
  Var row = tape.variable(Tensor::vector({10, 20}));
  CHECK(add_row(x, row).value() == Tensor::matrix({{11, 22}, {13, 26}}));
  CHECK(mul_row(x, row).value() == Tensor::matrix({{10, 40}, {30, 120}}));
  tape.backward(sum(mul_row(x, row)));
  CHECK(tape.gradient(row) == Tensor::vector({4, 8}));
}

TEST_CASE("stack_last interleaves along a trailing axis") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix({{1, 2}}));
  Var b = tape.constant(Tensor::matrix({{3, 4}}));
  const Var parts[] = {a, b};
  const Tensor s = stack_last(parts).value();
  REQUIRE(s.shape() == Shape{1, 2, 2});
  CHECK(s(0, 0, 0) == 1.0);
  CHECK(s(0, 0, 1) == 3.0);
  CHECK(s(0, 1, 0) == 2.0);
  CHECK(s(0, 1, 1) == 4.0);
}

TEST_CASE("activations and their derivatives") {
  Tape tape;
  Var x = tape.variable(Tensor::vector({-1, 0.5}));
  tape.backward(sum(activate(x, Activation::relu)));
  CHECK(tape.gradient(x) == Tensor::vector({0, 1}));
  Tape t2;
  Var y = t2.variable(Tensor::vector({0.3}));
  t2.backward(sum(activate(y, Activation::tanh)));
  const double th = std::tanh(0.3);
  CHECK(t2.gradient(y)[0] == doctest::Approx(1 - th * th).epsilon(1e-15));
}

TEST_CASE("random compositions pass the central difference check") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    const std::size_t m = 1 + rng() % 6;
    // Small inputs keep tanh away from saturation, where gradients shrink
    // below the roundoff floor of the difference quotient.
    const Tensor x = random_matrix(n, m, rng, 0.5);
    const Tensor w = random_matrix(m, 3, rng, 0.5);
    const Tensor r = random_matrix(1, m, rng, 0.5);
    const auto report = finite_difference_check(
        [](Tape&, std::span<const Var> p) {
          Var h = activate(matmul(hadamard_power(add_row(p[0], p[2]), 2), p[1]), Activation::tanh);
          return add(sum_squares(column_mean(h)), sum(mul(h, h)));
        },
        std::vector<Tensor>{x, w, r});
    INFO("worst ", report.worst_parameter, "[", report.worst_index, "] analytic ", report.analytic, " numeric ", report.numeric);
    CHECK(report.max_relative_error <= 1e-5);
  }
}
