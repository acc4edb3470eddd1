#include "taec/seqgrad.hpp"

#include <stdexcept>
#include <string>

namespace taec::seqgrad {

namespace {

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw std::invalid_argument("seqgrad: uninitialized Var");
    if (tape == nullptr) {
      tape = v.tape();
    } else if (tape != v.tape()) {
      throw std::invalid_argument("seqgrad: operands recorded on different tapes");
    }
  }
  return *tape;
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

const Matrix& Var::value() const { return tape_->nodes_.at(index_).value; }
const Matrix& Var::grad() const { return tape_->nodes_.at(index_).grad; }
bool Var::requires_grad() const { return tape_->nodes_.at(index_).requires_grad; }

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node node;
  if (requires_grad) node.grad = Matrix::Zero(value.rows(), value.cols());
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::vector<Var> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.is_leaf = false;
  node.backward = std::move(backward);
  for (const Var& p : parents) {
    if (p.tape() != this) throw std::invalid_argument("seqgrad: parent from another tape");
    node.parents.push_back(p.index());
    node.requires_grad = node.requires_grad || nodes_[p.index()].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  const Node& root = nodes_[loss.index()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(root.value));
  }
  if (!root.requires_grad) return;

  // Adjoints for this pass only; leaves accumulate into their persistent grad.
  std::vector<Matrix> adjoint(loss.index() + 1);
  adjoint[loss.index()] = Matrix::Ones(1, 1);

  std::vector<Matrix*> parent_ptrs;
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || adjoint[i].size() == 0) continue;
    if (node.is_leaf) {
      node.grad += adjoint[i];
      continue;
    }
    parent_ptrs.clear();
    for (std::size_t p : node.parents) {
      if (!nodes_[p].requires_grad) {
        parent_ptrs.push_back(nullptr);
        continue;
      }
      if (adjoint[p].size() == 0) {
        adjoint[p] = Matrix::Zero(nodes_[p].value.rows(), nodes_[p].value.cols());
      }
      parent_ptrs.push_back(&adjoint[p]);
    }
    node.backward(adjoint[i], parent_ptrs);
    adjoint[i].resize(0, 0);
  }
}

void Tape::zero_grad() {
  for (Node& node : nodes_) {
    if (node.is_leaf && node.requires_grad) node.grad.setZero();
  }
}

Var conv1d_dilated(Var input, Var weight, Var bias, int dilation) {
  Tape& tape = tape_of({input, weight, bias});
  const Matrix& x = input.value();
  const Matrix& w = weight.value();
  const Matrix& b = bias.value();
  const Eigen::Index frames = x.rows();
  const Eigen::Index cin = x.cols();
  if (dilation < 1) throw std::invalid_argument("conv1d_dilated: dilation must be >= 1");
  if (cin == 0 || w.rows() % cin != 0) {
    throw std::invalid_argument("conv1d_dilated: weight " + shape_str(w) +
                                " incompatible with " + std::to_string(cin) + " input channels");
  }
  const Eigen::Index taps = w.rows() / cin;
  if (taps % 2 == 0) throw std::invalid_argument("conv1d_dilated: kernel size must be odd");
  const Eigen::Index cout = w.cols();
  if (b.rows() != 1 || b.cols() != cout) {
    throw std::invalid_argument("conv1d_dilated: bias " + shape_str(b) + " does not match " +
                                std::to_string(cout) + " output channels");
  }
  const Eigen::Index half = (taps - 1) / 2;

  // Input frame t + offset contributes to output frame t.
  auto for_each_tap = [=](auto&& fn) {
    for (Eigen::Index j = 0; j < taps; ++j) {
      const Eigen::Index offset = (j - half) * dilation;
      const Eigen::Index span = frames - (offset < 0 ? -offset : offset);
      if (span <= 0) continue;
      const Eigen::Index out_begin = offset < 0 ? -offset : 0;
      const Eigen::Index in_begin = offset < 0 ? 0 : offset;
      fn(j, out_begin, in_begin, span);
    }
  };

  Matrix out = b.replicate(frames, 1);
  for_each_tap([&](Eigen::Index j, Eigen::Index ob, Eigen::Index ib, Eigen::Index n) {
    out.middleRows(ob, n).noalias() += x.middleRows(ib, n) * w.middleRows(j * cin, cin);
  });

  return tape.record(
      std::move(out), {input, weight, bias},
      [input, weight, for_each_tap, cin](const Matrix& g, std::span<Matrix* const> grads) {
        const Matrix& xv = input.value();
        const Matrix& wv = weight.value();
        for_each_tap([&](Eigen::Index j, Eigen::Index ob, Eigen::Index ib, Eigen::Index n) {
          if (grads[0] != nullptr) {
            grads[0]->middleRows(ib, n).noalias() +=
                g.middleRows(ob, n) * wv.middleRows(j * cin, cin).transpose();
          }
          if (grads[1] != nullptr) {
            grads[1]->middleRows(j * cin, cin).noalias() +=
                xv.middleRows(ib, n).transpose() * g.middleRows(ob, n);
          }
        });
        if (grads[2] != nullptr) *grads[2] += g.colwise().sum();
      });
}

Var pointwise_conv(Var input, Var weight, Var bias) {
  Tape& tape = tape_of({input, weight, bias});
  const Matrix& x = input.value();
  const Matrix& w = weight.value();
  const Matrix& b = bias.value();
  if (w.rows() != x.cols()) {
    throw std::invalid_argument("pointwise_conv: weight " + shape_str(w) + " incompatible with input " +
                                shape_str(x));
  }
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw std::invalid_argument("pointwise_conv: bias " + shape_str(b) + " does not match weight " +
                                shape_str(w));
  }
  Matrix out = b.replicate(x.rows(), 1);
  out.noalias() += x * w;
  return tape.record(std::move(out), {input, weight, bias},
                     [input, weight](const Matrix& g, std::span<Matrix* const> grads) {
                       if (grads[0] != nullptr) grads[0]->noalias() += g * weight.value().transpose();
                       if (grads[1] != nullptr) grads[1]->noalias() += input.value().transpose() * g;
                       if (grads[2] != nullptr) *grads[2] += g.colwise().sum();
                     });
}

Var relu(Var input) {
  Tape& tape = tape_of({input});
  Matrix out = input.value().cwiseMax(0.0);
  return tape.record(std::move(out), {input}, [input](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0] == nullptr) return;
    // subgradient 0 at x == 0
    *grads[0] += (input.value().array() > 0.0).select(g.array(), 0.0).matrix();
  });
}

Var concat_channels(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw std::invalid_argument("concat_channels: frame count mismatch " + shape_str(av) + " vs " +
                                shape_str(bv));
  }
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const Eigen::Index ca = av.cols();
  const Eigen::Index cb = bv.cols();
  return tape.record(std::move(out), {a, b}, [ca, cb](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0] != nullptr) *grads[0] += g.leftCols(ca);
    if (grads[1] != nullptr && cb > 0) *grads[1] += g.rightCols(cb);
  });
}

Var mse(Var pred, Var target) {
  Tape& tape = tape_of({pred, target});
  const Matrix& p = pred.value();
  const Matrix& t = target.value();
  if (p.rows() != t.rows() || p.cols() != t.cols()) {
    throw std::invalid_argument("mse: shape mismatch " + shape_str(p) + " vs " + shape_str(t));
  }
  Matrix out(1, 1);
  out(0, 0) = (p - t).squaredNorm();
  return tape.record(std::move(out), {pred, target},
                     [pred, target](const Matrix& g, std::span<Matrix* const> grads) {
                       const Matrix diff = 2.0 * g(0, 0) * (pred.value() - target.value());
                       if (grads[0] != nullptr) *grads[0] += diff;
                       if (grads[1] != nullptr) *grads[1] -= diff;
                     });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.value()) + " vs " +
                                shape_str(b.value()));
  }
  Matrix out = a.value() + b.value();
  return tape.record(std::move(out), {a, b}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0] != nullptr) *grads[0] += g;
    if (grads[1] != nullptr) *grads[1] += g;
  });
}

Var scale(Var input, double factor) {
  Tape& tape = tape_of({input});
  Matrix out = factor * input.value();
  return tape.record(std::move(out), {input}, [factor](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0] != nullptr) *grads[0] += factor * g;
  });
}

Var mask(Var input, const Matrix& mask) {
  Tape& tape = tape_of({input});
  if (mask.rows() != input.rows() || mask.cols() != input.cols()) {
    throw std::invalid_argument("mask: shape mismatch " + shape_str(input.value()) + " vs " +
                                shape_str(mask));
  }
  Matrix out = input.value().cwiseProduct(mask);
  return tape.record(std::move(out), {input}, [mask](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0] != nullptr) *grads[0] += g.cwiseProduct(mask);
  });
}

}  // namespace taec::seqgrad
