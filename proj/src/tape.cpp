#include "vxseg/tape.hpp"

#include "vxseg/errors.hpp"

namespace vxseg {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::push(Node node) {
  if (backward_done_) throw ContractError("tape: cannot record after backward()");
  nodes_.push_back(std::move(node));
  Node& back = nodes_.back();
  if (back.owned) back.value = &*back.owned;
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owner(Var v) const {
  if (v.tape() != this) throw ContractError("tape: Var belongs to a different tape");
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::reference(const Tensor& value, bool requires_grad) {
  Node n;
  n.value = &value;
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  n.is_leaf = false;
  for (const Var& in : inputs) {
    check_owner(in);
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.grad) n.grad.emplace(n.value->shape());
  return *n.grad;
}

void Tape::backward(Var loss) {
  check_owner(loss);
  if (backward_done_) throw ContractError("tape: backward() already ran on this tape");
  if (loss.value().size() != 1) {
    throw ContractError("tape: backward() needs a scalar root, got " +
                        shape_string(loss.shape()));
  }
  backward_done_ = true;
  if (nodes_[loss.id()].requires_grad) grad_buffer(loss.id())[0] = 1.0;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.grad || !n.backward) continue;
    n.backward(*this, *n.grad);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].requires_grad && nodes_[id].is_leaf) grad_buffer(id);
  }
}

const Tensor& Tape::grad(Var v) const {
  check_owner(v);
  if (!backward_done_) throw ContractError("tape: grad() requested before backward()");
  const Node& n = nodes_[v.id()];
  if (!n.grad) throw ContractError("tape: node has no gradient (does not require grad)");
  return *n.grad;
}

}  // namespace vxseg
