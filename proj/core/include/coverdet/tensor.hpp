#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace coverdet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient flows in
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backward_fn;

  // Parent gradient buffer, allocated on first use; nullptr when the parent
  // does not take part in differentiation.
  T* grad_buffer();
};

}  // namespace detail

/// Dense row-major array that records the operations producing it, so a
/// scalar result can be differentiated with backward().
///
/// Copies share the underlying node (handle semantics). Only leaves may be
/// mutated in place; interior values belong to the graph.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;
  using Node = detail::TensorNode<T>;

  BasicTensor() = default;
  BasicTensor(Shape shape, std::vector<T> values, bool requires_grad = false);
  explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values();
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Empty span when no gradient has reached this tensor.
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Reverse-mode pass from this scalar, seeding d(this)/d(this) = seed.
  /// Gradients accumulate into every reachable tensor that requires them.
  void backward(T seed = T(1));

  /// Fresh leaf holding a copy of the values.
  BasicTensor detach(bool requires_grad = false) const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template struct detail::TensorNode<float>;
extern template struct detail::TensorNode<double>;
extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace coverdet
