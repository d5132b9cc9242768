#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "bassl/errors.hpp"

namespace bassl {

/// Numeric precision of a computation. All tensors in one graph share one
/// mode; it is selected by instantiating the templates below with float
/// (bits32) or double (bits64).
enum class Precision { bits32, bits64 };

inline const char* precision_name(Precision p) {
  return p == Precision::bits32 ? "32" : "64";
}

template <typename T>
struct TensorNode {
  std::vector<size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backprop;  // pulls this->grad into parents' grads

  size_t size() const {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Value-semantics handle to a node in the computation graph. Copies share
/// the node. Tensors are immutable after creation except for gradient
/// accumulation during backward().
template <typename T>
class Tensor {
 public:
  using Node = TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(count(n->shape), T(0));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor full(std::vector<size_t> shape, T v, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (T& x : t.node_->value) x = v;
    return t;
  }

  static Tensor from(std::vector<size_t> shape, std::vector<T> data, bool requires_grad = false) {
    if (count(shape) != data.size()) {
      throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                       " does not match shape product " + std::to_string(count(shape)));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v) { return from({}, {v}); }

  bool defined() const { return static_cast<bool>(node_); }
  const std::vector<size_t>& shape() const { return node_->shape; }
  size_t rank() const { return node_->shape.size(); }
  size_t size() const { return node_->size(); }
  size_t dim(size_t i) const { return node_->shape[i]; }

  const std::vector<T>& values() const { return node_->value; }
  std::vector<T>& mutable_values() { return node_->value; }

  /// Scalar payload; throws unless rank 0.
  T item() const {
    if (!node_->shape.empty()) {
      throw ShapeError("item: tensor is not scalar, shape " + shape_str(node_->shape));
    }
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<T>& grad() const { return node_->grad; }
  std::vector<T>& ensure_grad() { return node_->ensure_grad(); }

  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), T(0));
  }

  std::shared_ptr<Node> node() const { return node_; }

  static std::string shape_str(const std::vector<size_t>& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(s[i]);
    }
    out += ")";
    return out;
  }

  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  static size_t count(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }

  std::shared_ptr<Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable tensor with requires_grad; repeated calls without zeroing add up.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.rank() != 0) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     Tensor<T>::shape_str(loss.shape()));
  }
  using NodePtr = std::shared_ptr<TensorNode<T>>;

  // Iterative post-order topological sort.
  std::vector<NodePtr> order;
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<std::pair<NodePtr, size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      NodePtr child = node->parents[next_child++];
      if (seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop && (*it)->requires_grad) (*it)->backprop();
  }
}

}  // namespace bassl
