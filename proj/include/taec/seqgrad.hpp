#pragma once

// Minimal reverse-mode automatic differentiation over frame-by-channel
// matrices. A Tape records every operation applied to its Vars; backward()
// walks the record in reverse and accumulates gradients into the leaves
// that were created with requires_grad.
//
// All values are T x C Eigen matrices (rows = frames, columns = channels).
// Parameters use the same container: a pointwise weight is Cin x Cout, a
// dilated convolution weight is (r * Cin) x Cout where rows
// [j * Cin, (j + 1) * Cin) hold kernel tap j, and a bias is 1 x Cout.

#include "taec/types.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace taec::seqgrad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning Tape is alive.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] const Matrix& grad() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] std::size_t index() const { return index_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  // Propagates the adjoint of a node into the adjoints of its parents.
  // Entries of `parent_grads` are null for parents that need no gradient.
  using BackwardFn =
      std::function<void(const Matrix& out_grad, std::span<Matrix* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  // Records a derived node. Nodes are appended, so the record is always in
  // topological order.
  Var record(Matrix value, std::vector<Var> parents, BackwardFn backward);

  // Accumulates d(loss)/d(leaf) into every requires_grad leaf. Repeated calls
  // without zero_grad() add up. Throws std::invalid_argument for a non-scalar
  // loss or a loss from another tape.
  void backward(Var loss);
  void zero_grad();

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Matrix value;
    Matrix grad;  // zero-initialized for requires_grad leaves, otherwise empty
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;  // references stay valid while recording
};

// out[t, co] = bias[co] + sum_ci sum_j w[j, ci, co] * in[t + (j - (r-1)/2) * dilation, ci]
// with zero padding, so the output keeps the input length.
Var conv1d_dilated(Var input, Var weight, Var bias, int dilation);

// Per-frame affine map: out = in * weight + bias.
Var pointwise_conv(Var input, Var weight, Var bias);

Var relu(Var input);

// [a | b]; b may have zero channels.
Var concat_channels(Var a, Var b);

// Sum of squared differences (not the mean). Returns a 1 x 1 node.
Var mse(Var pred, Var target);

Var add(Var a, Var b);
Var scale(Var input, double factor);

// Elementwise product with a constant mask (used for dropout).
Var mask(Var input, const Matrix& mask);

}  // namespace taec::seqgrad
