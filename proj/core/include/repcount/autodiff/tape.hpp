#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "repcount/autodiff/tensor.hpp"

namespace repcount::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records operations in creation order and replays them in reverse for
/// reverse-mode differentiation. Confined to one thread.
class Tape {
 public:
  /// Called during backward with the tape and the id of the node being visited.
  /// It reads grad(self) and accumulates into grad_buffer() of its inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Adds an op node. It requires grad iff any input does; otherwise `fn` is dropped.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);

  /// Clears every gradient, seeds d(loss)/d(loss) = 1, and visits each node once
  /// in reverse topological order.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulated for node `id`; empty when nothing flowed into it.
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
  std::span<const double> grad(Var v) const { return grad(v.id()); }
  /// Mutable gradient buffer, zero-initialized on first access.
  std::span<double> grad_buffer(std::size_t id);
  std::span<double> grad_buffer(Var v) { return grad_buffer(v.id()); }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

}  // namespace repcount::ad
