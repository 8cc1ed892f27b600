#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tasktcn/autodiff/tensor.hpp"

namespace tasktcn::autodiff {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape that produced it is alive and has not been cleared.
template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of primitive applications. Nodes are appended in
/// evaluation order, so the node list is already topologically sorted.
template <typename T>
class Tape {
 public:
  /// Called during backward with the tape and the node's own index; must
  /// accumulate into `grad_buffer(input)` for every input that requires grad.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = true) {
    nodes_.push_back(Node{"leaf", std::move(value), {}, {}, {}, requires_grad, true});
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  Var<T> record(std::string_view op, Tensor<T> value, std::vector<std::size_t> inputs,
                BackwardFn backward) {
    bool needs_grad = false;
    for (std::size_t in : inputs) {
      needs_grad = needs_grad || nodes_.at(in).requires_grad;
    }
    nodes_.push_back(Node{std::string(op), std::move(value), {}, std::move(inputs),
                          needs_grad ? std::move(backward) : BackwardFn{}, needs_grad, false});
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Runs reverse accumulation from a scalar loss. Every node is visited at
  /// most once, in reverse recording order. Gradients of leaves that the loss
  /// does not reach are zero.
  void backward(const Var<T>& loss);

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::string& op(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  /// Gradient of the last backward() loss w.r.t. `v`; zeros if unreached.
  Tensor<T> grad(const Var<T>& v) const {
    const Node& node = nodes_.at(v.id());
    if (node.grad.numel() == node.value.numel() && node.grad.shape() == node.value.shape()) {
      return node.grad;
    }
    return Tensor<T>(node.value.shape());
  }

  /// Mutable gradient accumulator for node `id`, zero-initialised on first use.
  Tensor<T>& grad_buffer(std::size_t id) {
    Node& node = nodes_[id];
    if (node.grad.shape() != node.value.shape() || node.grad.numel() != node.value.numel()) {
      node.grad = Tensor<T>(node.value.shape());
    }
    return node.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::string op;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  std::vector<Node> nodes_;
};

namespace testing {

/// Name of a primitive whose backward rule should have its sign flipped, or
/// empty. Only used by mutation tests of the gradient checker.
std::string& flipped_backward_op();

/// Flips the sign of one primitive's backward rule for the lifetime of the guard.
class ScopedBackwardSignFlip {
 public:
  explicit ScopedBackwardSignFlip(std::string op) : previous_(flipped_backward_op()) {
    flipped_backward_op() = std::move(op);
  }
  ~ScopedBackwardSignFlip() { flipped_backward_op() = previous_; }
  ScopedBackwardSignFlip(const ScopedBackwardSignFlip&) = delete;
  ScopedBackwardSignFlip& operator=(const ScopedBackwardSignFlip&) = delete;

 private:
  std::string previous_;
};

}  // namespace testing

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (!loss.valid() || &loss.tape() != this) {
    throw ContractViolation("backward: loss is not recorded on this tape");
  }
  const Node& root = nodes_.at(loss.id());
  if (root.value.numel() != 1) {
    throw ContractViolation("backward: loss must be scalar, got shape " +
                            shape_to_string(root.value.shape()));
  }
  for (Node& node : nodes_) {
    node.grad = Tensor<T>();
  }
  grad_buffer(loss.id())[0] = T{1};

  const std::string& flipped = testing::flipped_backward_op();
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.is_leaf || !node.requires_grad || !node.backward || node.grad.empty()) {
      continue;
    }
    if (!flipped.empty() && node.op == flipped) {
      for (T& g : node.grad.values()) g = -g;
    }
    node.backward(*this, id);
  }

  for (std::size_t id = 0; id <= loss.id(); ++id) {
    const Node& node = nodes_[id];
    if (node.is_leaf && node.requires_grad && !node.grad.empty() && !node.grad.all_finite()) {
      throw NumericalFault("backward: non-finite gradient for leaf " + std::to_string(id));
    }
  }
}

}  // namespace tasktcn::autodiff
