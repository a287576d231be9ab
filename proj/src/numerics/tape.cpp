#include "lecb/numerics/tape.hpp"

#include "lecb/error.hpp"

namespace lecb::num {

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, p.trainable, {}, p.trainable ? &p : nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& v : parents) needs = needs || requires_grad(v.id);
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{},
                        nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, Backward backward) {
  bool needs = false;
  for (const Var& v : parents) needs = needs || requires_grad(v.id);
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{},
                        nullptr});
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("backward: variable belongs to another tape");
  const Tensor& lv = value(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  if (!requires_grad(loss.id)) return;
  grad(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      Tensor& pg = n.param->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
}

}  // namespace lecb::num
