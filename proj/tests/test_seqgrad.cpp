#include "taec/seqgrad.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstring>
#include <random>

using namespace taec;
namespace sg = taec::seqgrad;
using taec::test::central_difference;
using taec::test::max_relative_error;
using taec::test::random_matrix;

namespace {

Matrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

// Kernel with a single non-zero tap for C = 1.
Matrix single_tap(int taps, int which) {
  Matrix w = Matrix::Zero(taps, 1);
  w(which, 0) = 1.0;
  return w;
}

// Builds f(inputs) on a fresh tape and returns (value, analytic gradients).
template <typename Build>
std::pair<double, std::vector<Matrix>> evaluate(const std::vector<Matrix>& inputs, Build build) {
  sg::Tape tape;
  std::vector<sg::Var> vars;
  for (const Matrix& m : inputs) vars.push_back(tape.leaf(m, true));
  sg::Var loss = build(tape, vars);
  tape.backward(loss);
  std::vector<Matrix> grads;
  for (const sg::Var& v : vars) grads.push_back(v.grad());
  return {loss.value()(0, 0), grads};
}

// Checks every input's analytic gradient against central differences.
template <typename Build>
double gradient_check(const std::vector<Matrix>& inputs, Build build) {
  const auto [value, grads] = evaluate(inputs, build);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&](const Matrix& probe) {
      std::vector<Matrix> perturbed = inputs;
      perturbed[i] = probe;
      return evaluate(perturbed, build).first;
    };
    worst = std::max(worst, max_relative_error(grads[i], central_difference(f, inputs[i])));
  }
  return worst;
}

// Weighted sum so that the upstream gradient is not uniform.
sg::Var weighted_sum(sg::Tape& tape, sg::Var x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  sg::Var target = tape.constant(random_matrix(x.rows(), x.cols(), rng));
  return sg::mse(x, target);
}

}  // namespace

TEST_CASE("conv1d_dilated: identity and shifted kernels") {
  sg::Tape tape;
  sg::Var x = tape.leaf(column({1, 2, 3, 4}));
  sg::Var zero_bias = tape.leaf(Matrix::Zero(1, 1));

  sg::Var id = sg::conv1d_dilated(x, tape.leaf(single_tap(3, 1)), zero_bias, 1);
  CHECK(id.value() == column({1, 2, 3, 4}));

  sg::Var left = sg::conv1d_dilated(x, tape.leaf(single_tap(3, 0)), zero_bias, 2);
  CHECK(left.value() == column({0, 0, 1, 2}));

  sg::Var right = sg::conv1d_dilated(x, tape.leaf(single_tap(3, 2)), zero_bias, 1);
  CHECK(right.value() == column({2, 3, 4, 0}));

  // dilation beyond the sequence length sees only padding
  sg::Var far = sg::conv1d_dilated(x, tape.leaf(single_tap(3, 0)), zero_bias, 8);
  CHECK(far.value() == column({0, 0, 0, 0}));
}

TEST_CASE("conv1d_dilated: identity kernel is the identity map for any T and dilation") {
  std::mt19937_64 rng(11);
  for (int frames : {1, 2, 7, 33}) {
    for (int dilation : {1, 2, 4, 64}) {
      for (int taps : {1, 3, 5}) {
        const int channels = 3;
        sg::Tape tape;
        Matrix input = random_matrix(frames, channels, rng);
        Matrix w = Matrix::Zero(taps * channels, channels);
        w.middleRows((taps - 1) / 2 * channels, channels) = Matrix::Identity(channels, channels);
        sg::Var out = sg::conv1d_dilated(tape.leaf(input), tape.leaf(w), tape.leaf(Matrix::Zero(1, channels)), dilation);
        CHECK(out.value() == input);
      }
    }
  }
}

TEST_CASE("conv1d_dilated: shape errors") {
  sg::Tape tape;
  sg::Var x = tape.leaf(Matrix::Zero(5, 2));
  CHECK_THROWS_AS(sg::conv1d_dilated(x, tape.leaf(Matrix::Zero(5, 1)), tape.leaf(Matrix::Zero(1, 1)), 1),
                  std::invalid_argument);
  // even kernel
  CHECK_THROWS_AS(sg::conv1d_dilated(x, tape.leaf(Matrix::Zero(4, 1)), tape.leaf(Matrix::Zero(1, 1)), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(sg::conv1d_dilated(x, tape.leaf(Matrix::Zero(6, 1)), tape.leaf(Matrix::Zero(1, 2)), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(sg::conv1d_dilated(x, tape.leaf(Matrix::Zero(6, 1)), tape.leaf(Matrix::Zero(1, 1)), 0),
                  std::invalid_argument);
}

TEST_CASE("conv1d_dilated: gradients match central differences") {
  std::mt19937_64 rng(1);
  for (int dilation : {1, 2, 4}) {
    const std::vector<Matrix> inputs = {random_matrix(9, 3, rng), random_matrix(3 * 3, 2, rng), random_matrix(1, 2, rng)};
    const double err = gradient_check(inputs, [dilation](sg::Tape& tape, const std::vector<sg::Var>& v) {
      return weighted_sum(tape, sg::conv1d_dilated(v[0], v[1], v[2], dilation), 5);
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("pointwise_conv: forward cases and gradients") {
  sg::Tape tape;
  Matrix x(1, 2);
  x << 1, 2;
  Matrix w(2, 1);
  w << 1, 1;
  Matrix b(1, 1);
  b << 3;
  CHECK(sg::pointwise_conv(tape.leaf(x), tape.leaf(w), tape.leaf(b)).value()(0, 0) == 6.0);

  std::mt19937_64 rng(2);
  Matrix in = random_matrix(4, 3, rng);
  sg::Var id = sg::pointwise_conv(tape.leaf(in), tape.leaf(Matrix::Identity(3, 3)), tape.leaf(Matrix::Zero(1, 3)));
  CHECK(id.value() == in);

  CHECK_THROWS_AS(sg::pointwise_conv(tape.leaf(in), tape.leaf(Matrix::Zero(2, 3)), tape.leaf(Matrix::Zero(1, 3))),
                  std::invalid_argument);

  const std::vector<Matrix> inputs = {random_matrix(6, 4, rng), random_matrix(4, 3, rng), random_matrix(1, 3, rng)};
  const double err = gradient_check(inputs, [](sg::Tape& t, const std::vector<sg::Var>& v) {
    return weighted_sum(t, sg::pointwise_conv(v[0], v[1], v[2]), 7);
  });
  CHECK(err < 1e-4);
}

TEST_CASE("relu: forward, zero subgradient, gradient check away from 0") {
  sg::Tape tape;
  sg::Var x = tape.leaf(column({-1, 0, 2}), true);
  sg::Var y = sg::relu(x);
  CHECK(y.value() == column({0, 0, 2}));
  tape.backward(sg::mse(y, tape.constant(Matrix::Constant(3, 1, -1.0))));
  // d/dy = 2(y + 1) = (2, 2, 6); masked at x <= 0
  CHECK(x.grad() == column({0, 0, 6}));

  sg::Tape neg;
  sg::Var xn = neg.leaf(Matrix::Constant(4, 2, -0.5), true);
  sg::Var yn = sg::relu(xn);
  CHECK(yn.value().isZero());
  neg.backward(sg::mse(yn, neg.constant(Matrix::Ones(4, 2))));
  CHECK(xn.grad().isZero());

  std::mt19937_64 rng(3);
  Matrix in = random_matrix(5, 3, rng);
  in = in.unaryExpr([](double v) { return v >= 0 ? v + 0.1 : v - 0.1; });
  const double err = gradient_check({in}, [](sg::Tape& t, const std::vector<sg::Var>& v) {
    return weighted_sum(t, sg::relu(v[0]), 9);
  });
  CHECK(err < 1e-4);
}

TEST_CASE("concat_channels: order, empty operand, gradient split") {
  sg::Tape tape;
  sg::Var a = tape.leaf(column({1, 2}));
  sg::Var b = tape.leaf(column({3, 4}));
  Matrix expected(2, 2);
  expected << 1, 3, 2, 4;
  CHECK(sg::concat_channels(a, b).value() == expected);
  CHECK(sg::concat_channels(a, tape.leaf(Matrix::Zero(2, 0))).value() == a.value());
  CHECK_THROWS_AS(sg::concat_channels(a, tape.leaf(Matrix::Zero(3, 1))), std::invalid_argument);

  std::mt19937_64 rng(4);
  const double err = gradient_check({random_matrix(5, 2, rng), random_matrix(5, 3, rng)},
                                    [](sg::Tape& t, const std::vector<sg::Var>& v) {
                                      return weighted_sum(t, sg::concat_channels(v[0], v[1]), 10);
                                    });
  CHECK(err < 1e-4);
}

TEST_CASE("mse: sum of squares and gradients") {
  sg::Tape tape;
  sg::Var p = tape.leaf(column({1, 2}));
  CHECK(sg::mse(p, p).value()(0, 0) == 0.0);
  CHECK(sg::mse(p, tape.leaf(column({0, 0}))).value()(0, 0) == 5.0);
  CHECK_THROWS_AS(sg::mse(p, tape.leaf(Matrix::Zero(2, 2))), std::invalid_argument);

  std::mt19937_64 rng(5);
  const double err = gradient_check({random_matrix(4, 3, rng), random_matrix(4, 3, rng)},
                                    [](sg::Tape&, const std::vector<sg::Var>& v) { return sg::mse(v[0], v[1]); });
  CHECK(err < 1e-4);
}

TEST_CASE("backward: scalar example, accumulation, disconnected leaves, errors") {
  sg::Tape tape;
  sg::Var x = tape.leaf(column({3}), true);
  sg::Var unused = tape.leaf(Matrix::Ones(2, 2), true);
  sg::Var loss = sg::mse(x, tape.constant(Matrix::Zero(1, 1)));
  tape.backward(loss);
  CHECK(x.grad()(0, 0) == 6.0);
  CHECK(unused.grad().isZero());

  tape.backward(loss);
  CHECK(x.grad()(0, 0) == 12.0);
  tape.zero_grad();
  CHECK(x.grad()(0, 0) == 0.0);

  CHECK_THROWS_AS(tape.backward(unused), std::invalid_argument);

  sg::Tape other;
  sg::Var foreign = other.leaf(Matrix::Ones(1, 1), true);
  CHECK_THROWS_AS(tape.backward(foreign), std::invalid_argument);
  CHECK_THROWS_AS(sg::add(x, foreign), std::invalid_argument);
}

TEST_CASE("backward: composite conv -> relu -> pointwise -> mse graph") {
  std::mt19937_64 rng(6);
  const std::vector<Matrix> inputs = {random_matrix(8, 2, rng), random_matrix(3 * 2, 3, rng), random_matrix(1, 3, rng),
                                      random_matrix(3, 2, rng), random_matrix(1, 2, rng)};
  const double err = gradient_check(inputs, [](sg::Tape& t, const std::vector<sg::Var>& v) {
    sg::Var h = sg::relu(sg::conv1d_dilated(v[0], v[1], v[2], 2));
    sg::Var y = sg::add(sg::pointwise_conv(h, v[3], v[4]), v[0]);
    return sg::add(weighted_sum(t, y, 12), sg::scale(sg::mse(h, t.constant(Matrix::Zero(8, 3))), 0.3));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("tape is topologically ordered and forward is reproducible") {
  std::mt19937_64 rng(7);
  const Matrix x = random_matrix(10, 3, rng);
  const Matrix w = random_matrix(9, 3, rng);
  const Matrix b = random_matrix(1, 3, rng);
  auto run = [&] {
    sg::Tape tape;
    sg::Var y = sg::relu(sg::conv1d_dilated(tape.leaf(x), tape.leaf(w), tape.leaf(b), 2));
    CHECK(tape.size() == 5);
    return Matrix(y.value());
  };
  const Matrix first = run();
  const Matrix second = run();
  CHECK(std::memcmp(first.data(), second.data(), sizeof(double) * static_cast<std::size_t>(first.size())) == 0);
}
