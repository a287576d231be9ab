#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "lecb/numerics/parameter.hpp"
#include "lecb/numerics/tensor.hpp"

namespace lecb::num {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
};

/// Reverse-mode tape. Built fresh for every forward pass; nodes are appended
/// in evaluation order so a single reverse sweep is a valid topological order.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; gradients are added to param.grad by backward()
  /// when the parameter is trainable.
  Var param(Parameter& p);

  /// Record an op result. `backward` runs only when the result requires grad.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, const std::vector<Var>& parents, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated (zeros) on first access.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  /// Seed d(loss)/d(loss) = 1 for a 1x1 loss and sweep backwards.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
};

}  // namespace lecb::num
