#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "df/error.hpp"

namespace df::tensor {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Thread-local switch for graph recording. Inference wraps forward passes in
// a NoGradGuard so no backward closures or parent links are kept.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

// Dense row-major tensor with reverse-mode autodiff. A Tensor is a shared
// handle to a graph node; ops link result nodes to their inputs and record a
// backward closure. Gradients accumulate into `grad`, which is allocated
// lazily for nodes that require it.
template <class T>
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<T> val;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
      if (grad.size() != val.size()) grad.assign(val.size(), T(0));
    }
  };

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = std::move(shape);
    t.n_->val.assign(shape_numel(t.n_->shape), T(0));
    t.n_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(Shape shape, T v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.n_->val.begin(), t.n_->val.end(), v);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (shape_numel(shape) != data.size())
      throw ValidationError("tensor data size does not match shape " + shape_str(shape));
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = std::move(shape);
    t.n_->val = std::move(data);
    t.n_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return n_->shape; }
  int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  std::size_t size() const { return n_->val.size(); }

  std::vector<T>& data() { return n_->val; }
  const std::vector<T>& data() const { return n_->val; }

  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool rg) { n_->requires_grad = rg; }

  bool has_grad() const { return n_->grad.size() == n_->val.size(); }
  std::vector<T>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  const std::vector<T>& grad() const {
    if (!has_grad()) throw NumericError("gradient not populated");
    return n_->grad;
  }

  void zero_grad() {
    if (has_grad()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
  }

  T item() const {
    if (size() != 1) throw ValidationError("item() on non-scalar tensor " + shape_str(shape()));
    return n_->val[0];
  }

  void assert_finite(const char* what) const {
    for (T v : n_->val)
      if (!std::isfinite(static_cast<double>(v)))
        throw NumericError(std::string("non-finite value in ") + what);
  }

  // Reverse-mode sweep from a scalar root. Seeds d(root)/d(root) = 1 and
  // calls backward closures in reverse topological order.
  void backward() {
    if (size() != 1) throw ValidationError("backward() requires a scalar root");
    if (!n_->requires_grad) throw ValidationError("backward() on a non-grad tensor");
    n_->ensure_grad();
    n_->grad[0] = T(1);

    // Iterative post-order DFS over parent links.
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    std::unordered_set<Node*> seen;
    stack.push_back({n_.get(), 0});
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].get();
        if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (node->backward) node->backward(*node);
    }
  }

  std::shared_ptr<Node> node() const { return n_; }

  // Builds a result node. Parent links and the backward closure are recorded
  // only when grad mode is on and some input requires grad.
  static Tensor make_op(Shape shape, std::vector<Tensor> inputs,
                        std::function<void(Node&)> backward) {
    Tensor t = zeros(std::move(shape));
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (grad_enabled() && any) {
      t.n_->requires_grad = true;
      t.n_->parents.reserve(inputs.size());
      for (auto& in : inputs) t.n_->parents.push_back(in.n_);
      t.n_->backward = std::move(backward);
    }
    return t;
  }

 private:
  std::shared_ptr<Node> n_;
};

}  // namespace df::tensor
