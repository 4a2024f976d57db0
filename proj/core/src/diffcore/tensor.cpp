#include "dualkd/diffcore/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "dualkd/errors.hpp"

namespace dualkd::diff {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void TensorImpl::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(numel_of(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive");
  }
  if (values.size() != numel_of(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

const TensorImpl& Tensor::checked() const {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return *impl_;
}

TensorImpl& Tensor::checked() {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("axis out of range");
  return s[axis];
}

std::size_t Tensor::numel() const { return checked().data.size(); }

std::span<const double> Tensor::values() const { return checked().data; }
std::span<double> Tensor::mutable_values() { return checked().data; }

double Tensor::item() const {
  const TensorImpl& t = checked();
  if (t.data.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_to_string(t.shape));
  }
  return t.data[0];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  TensorImpl& t = checked();
  if (t.node && !flag) {
    throw std::logic_error("cannot clear requires_grad on a non-leaf tensor");
  }
  t.requires_grad = flag;
}

bool Tensor::is_leaf() const { return checked().node == nullptr; }

bool Tensor::has_grad() const {
  const TensorImpl& t = checked();
  return !t.grad.empty();
}

std::span<const double> Tensor::grad() const { return checked().grad; }

std::span<double> Tensor::mutable_grad() {
  TensorImpl& t = checked();
  t.ensure_grad();
  return t.grad;
}

void Tensor::zero_grad() {
  TensorImpl& t = checked();
  if (!t.grad.empty()) std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

void Tensor::clear_grad() { checked().grad.clear(); }

namespace {

// Post-order over the recorded graph; the result lists every tensor after
// all of its parents.
std::vector<TensorImpl*> topological_order(TensorImpl* root) {
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next_parent] = stack.back();
    if (node->node && next_parent < node->node->parents.size()) {
      TensorImpl* parent = node->node->parents[next_parent++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  return order;
}

}  // namespace

void Tensor::backward() {
  TensorImpl& root = checked();
  if (root.data.size() != 1) {
    throw ShapeError("backward() requires a scalar root, got shape " +
                     shape_to_string(root.shape));
  }
  if (!root.requires_grad) {
    throw std::logic_error("backward() on a tensor that does not require grad");
  }
  if (root.node) {
    if (root.node->consumed) {
      throw std::logic_error("backward() called twice on the same graph");
    }
    root.node->consumed = true;
  }

  std::vector<TensorImpl*> order = topological_order(&root);
  root.ensure_grad();
  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (!t->node || t->grad.empty()) continue;
    for (const auto& parent : t->node->parents) {
      if (parent->requires_grad) parent->ensure_grad();
    }
    t->node->backward(*t, t->node->parents);
  }
}

void Tensor::reset_graph() {
  TensorImpl& root = checked();
  for (TensorImpl* t : topological_order(&root)) {
    if (t->node) t->node->consumed = false;
    std::fill(t->grad.begin(), t->grad.end(), 0.0);
  }
}

Tensor Tensor::detach_copy() const {
  const TensorImpl& t = checked();
  return from(t.shape, t.data, false);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace dualkd::diff
