#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "vxseg/tensor.hpp"

namespace vxseg {

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run record of a forward pass. Nodes are appended in evaluation
// order, so inputs always precede their consumers and a single reverse sweep
// is a valid topological order. One tape serves one forward/backward pass and
// is not shared between threads.
class Tape {
 public:
  // Receives the node's output gradient; must accumulate into the gradient
  // buffers of the node's inputs through grad_buffer().
  using BackwardFn = std::function<void(Tape&, const Tensor&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  /// Non-owning leaf. `value` must outlive the tape.
  Var reference(const Tensor& value, bool requires_grad);
  Var parameter(const Tensor& value) { return reference(value, true); }

  /// Appends an operation result. The backward function is dropped when no
  /// input requires a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Reverse sweep from a single-element root. May run once per tape.
  void backward(Var loss);

  /// Gradient of the root with respect to `v` (zeros if `v` did not
  /// influence the root). Only valid after backward().
  const Tensor& grad(Var v) const;

  /// Mutable accumulation buffer, zero-initialized on first access.
  Tensor& grad_buffer(std::size_t id);

  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

  const Tensor& value(std::size_t id) const { return *nodes_.at(id).value; }

 private:
  struct Node {
    std::optional<Tensor> owned;
    const Tensor* value = nullptr;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = true;
    std::optional<Tensor> grad;
  };

  Var push(Node node);
  void check_owner(Var v) const;

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace vxseg
