#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gqcnn/error.hpp"

namespace gqcnn {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename Scalar>
using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

namespace detail {

// One vertex of the reverse-mode graph. `propagate` reads `grad` and adds the
// chain-rule contributions into the grads of `inputs`.
template <typename Scalar>
struct Node {
  Shape shape;
  Storage<Scalar> value;
  Storage<Scalar> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> propagate;

  Storage<Scalar>& grad_buffer() {
    if (grad.size() != value.size()) grad = Storage<Scalar>::Zero(value.size());
    return grad;
  }
};

}  // namespace detail

/// Dense N-dimensional array (row-major) taking part in reverse-mode
/// differentiation. A Tensor is a shared handle: copies alias the same node.
/// Use clone() for an independent copy.
template <typename Scalar>
class Tensor {
 public:
  using scalar_type = Scalar;
  using NodePtr = std::shared_ptr<detail::Node<Scalar>>;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : Tensor(shape, Storage<Scalar>::Zero(numel(shape)), requires_grad) {}

  Tensor(Shape shape, Storage<Scalar> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node<Scalar>>()) {
    for (Index extent : shape) {
      if (extent <= 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
    }
    if (values.size() != numel(shape)) {
      throw DimensionError("tensor of shape " + to_string(shape) + " needs " +
                           std::to_string(numel(shape)) + " elements, got " +
                           std::to_string(values.size()));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values, bool requires_grad = false)
      : Tensor(std::move(shape), from_list(values), requires_grad) {}

  static Tensor full(Shape shape, Scalar value, bool requires_grad = false) {
    Index count = numel(shape);
    return Tensor(std::move(shape), Storage<Scalar>::Constant(count, value), requires_grad);
  }

  /// Result of an operation: participates in the graph only if an input does.
  static Tensor from_op(Shape shape, Storage<Scalar> values, std::vector<NodePtr> inputs,
                        std::function<void(detail::Node<Scalar>&)> propagate) {
    Tensor out(std::move(shape), std::move(values));
    bool any = false;
    for (const auto& in : inputs) any = any || in->requires_grad;
    if (any) {
      out.node_->requires_grad = true;
      out.node_->inputs = std::move(inputs);
      out.node_->propagate = std::move(propagate);
    }
    return out;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  Index dim(int axis) const { return node_->shape.at(static_cast<std::size_t>(axis)); }
  Index size() const { return node_->value.size(); }

  const Storage<Scalar>& values() const { return node_->value; }
  /// In-place access for optimizers and perturbation-based checks.
  Storage<Scalar>& mutable_values() { return node_->value; }
  const Scalar* data() const { return node_->value.data(); }
  Scalar operator[](Index i) const { return node_->value[i]; }

  Scalar item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  const Storage<Scalar>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0); }

  /// Copy of the values, detached from any graph.
  Tensor clone(bool requires_grad = false) const {
    return Tensor(node_->shape, node_->value, requires_grad);
  }

  /// Same values viewed with a new shape; gradients flow back unchanged.
  Tensor reshape(Shape shape) const;

  /// Reverse-mode sweep from this scalar tensor. Gradients accumulate into
  /// every reachable node that requires grad.
  void backward() const;

  const NodePtr& node() const { return node_; }

 private:
  static Storage<Scalar> from_list(std::initializer_list<Scalar> values) {
    Storage<Scalar> s(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) s[i++] = v;
    return s;
  }

  NodePtr node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace gqcnn
