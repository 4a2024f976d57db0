#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dualkd::diff {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_to_string(const Shape& shape);

struct TensorImpl;

// Backward closure of one recorded operation. It reads the output gradient
// from `out.grad` and accumulates into the gradients of `parents`.
using BackwardFn = std::function<void(
    const TensorImpl& out, std::span<const std::shared_ptr<TensorImpl>> parents)>;

struct Node {
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward;
  bool consumed = false;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::shared_ptr<Node> node;  // null for leaves

  void ensure_grad();
};

// Dense row-major array of doubles with an optional gradient slot.
//
// Tensors share their storage on copy. Values are treated as immutable once
// an operation has consumed them; only parameters are updated in place by an
// optimizer, and only between graph constructions.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad();

  // Reverse-mode sweep from this scalar. Throws if the tensor is not a
  // scalar or if the graph was already swept and not reset.
  void backward();
  // Clears the consumed mark and every gradient reachable from this root so
  // that `backward` may run again.
  void reset_graph();

  // Deep copy of values, detached from any graph.
  Tensor detach_copy() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  const TensorImpl& checked() const;
  TensorImpl& checked();

  std::shared_ptr<TensorImpl> impl_;
};

// Gradient recording is on by default; a guard turns it off for the current
// thread (teacher forwards, evaluation).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace dualkd::diff
