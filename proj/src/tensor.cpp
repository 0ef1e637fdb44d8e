#include "gqcnn/tensor.hpp"

#include <unordered_set>

namespace gqcnn {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::reshape(Shape shape) const {
  if (numel(shape) != size()) {
    throw DimensionError("cannot reshape " + to_string(this->shape()) + " to " + to_string(shape));
  }
  return from_op(std::move(shape), values(), {node_}, [](detail::Node<Scalar>& self) {
    auto& in = *self.inputs[0];
    if (in.requires_grad) in.grad_buffer() += self.grad;
  });
}

template <typename Scalar>
void Tensor<Scalar>::backward() const {
  if (size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + to_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  using NodeT = detail::Node<Scalar>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodeT* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer() += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* node = *it;
    if (node->propagate && node->grad.size() == node->value.size()) node->propagate(*node);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace gqcnn
