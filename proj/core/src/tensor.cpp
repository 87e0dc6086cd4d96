#include "coverdet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "coverdet/error.hpp"

namespace coverdet {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

template <typename T>
T* TensorNode<T>::grad_buffer() {
  if (!requires_grad) return nullptr;
  if (grad.empty()) grad.assign(value.size(), T(0));
  return grad.data();
}

}  // namespace detail

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    fail(ErrorCode::kShapeMismatch, "shape " + shape_string(shape) + " needs " +
                                        std::to_string(shape_size(shape)) + " values, got " +
                                        std::to_string(values.size()));
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_values() {
  if (!node_->parents.empty()) {
    fail(ErrorCode::kInvalidParam, std::string("cannot mutate the output of ") + node_->op);
  }
  return node_->value;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (node_->value.size() != 1) {
    fail(ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_string(node_->shape));
  }
  return node_->value[0];
}

template <typename T>
void BasicTensor<T>::backward(T seed) {
  if (node_->value.size() != 1) {
    fail(ErrorCode::kShapeMismatch,
         "backward() needs a scalar root, got " + shape_string(node_->shape));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  for (Node* node : order) {
    if (!node->parents.empty()) continue;
    for (T g : node->grad) {
      if (!std::isfinite(g)) {
        fail(ErrorCode::kNumericalFault, "non-finite gradient on a leaf of shape " +
                                             shape_string(node->shape));
      }
    }
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach(bool requires_grad) const {
  return BasicTensor(node_->shape, node_->value, requires_grad);
}

template struct detail::TensorNode<float>;
template struct detail::TensorNode<double>;
template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace coverdet
