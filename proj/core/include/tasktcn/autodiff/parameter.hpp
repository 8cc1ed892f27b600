#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tasktcn/autodiff/tape.hpp"
#include "tasktcn/autodiff/tensor.hpp"

namespace tasktcn::autodiff {

/// Learnable tensor with its accumulated gradient. Parameters are trained in
/// 32-bit precision.
struct Parameter {
  std::string name;
  Tensor<float> value;
  Tensor<float> grad;
  /// Part of a task-embedding table (the only parameters touched by finetuning).
  bool embedding = false;

  Parameter() = default;
  Parameter(std::string n, Tensor<float> v, bool is_embedding = false)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), embedding(is_embedding) {}

  void zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor<float>(value.shape());
    grad.fill(0.0f);
  }
};

/// Registers parameters as leaves on a tape for one forward/backward pass.
/// Each parameter is bound at most once; parameters rejected by the trainable
/// filter become constants and receive no gradient.
class Binding {
 public:
  using Filter = std::function<bool(const Parameter&)>;

  explicit Binding(Tape<float>& tape, Filter trainable = {})
      : tape_(&tape), trainable_(std::move(trainable)) {}

  Tape<float>& tape() const { return *tape_; }

  Var<float> operator()(Parameter& p) {
    for (auto& [param, var] : bound_) {
      if (param == &p) return var;
    }
    const bool train = !trainable_ || trainable_(p);
    Var<float> v = tape_->leaf(p.value, train);
    bound_.emplace_back(&p, v);
    return v;
  }

  /// Adds the tape gradients of every bound trainable parameter into Parameter::grad.
  void accumulate_grads() {
    for (auto& [param, var] : bound_) {
      if (!var.requires_grad()) continue;
      if (param->grad.shape() != param->value.shape()) param->zero_grad();
      const Tensor<float> g = tape_->grad(var);
      for (std::size_t i = 0; i < g.numel(); ++i) param->grad[i] += g[i];
    }
  }

 private:
  Tape<float>* tape_;
  Filter trainable_;
  std::vector<std::pair<Parameter*, Var<float>>> bound_;
};

}  // namespace tasktcn::autodiff
