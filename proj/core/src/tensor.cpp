#include "rsinet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace rsinet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void fail(const std::string& message) { throw std::runtime_error(message); }

void require(bool condition, const std::string& message) {
  if (!condition) fail(message);
}

std::vector<double>& Tensor::Node::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from_data(shape, std::vector<double>(shape_numel(shape), 0.0),
                   requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return from_data(shape, std::vector<double>(shape_numel(shape), value),
                   requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values,
                         bool requires_grad) {
  require(shape_numel(shape) == values.size(),
          "tensor: data length does not match shape " + shape_str(shape));
  for (std::size_t e : shape)
    require(e > 0, "tensor: zero extent in shape " + shape_str(shape));
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->values = std::move(values);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from_data({n, n}, std::move(v));
}

const Shape& Tensor::shape() const {
  require(defined(), "tensor: undefined handle");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  require(axis < shape().size(), "tensor: axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::ndim() const { return shape().size(); }

std::size_t Tensor::size() const {
  require(defined(), "tensor: undefined handle");
  return node_->values.size();
}

std::vector<double>& Tensor::values() const {
  require(defined(), "tensor: undefined handle");
  return node_->values;
}

double* Tensor::data() const { return values().data(); }

double Tensor::item() const {
  require(size() == 1, "tensor: item() on non-scalar " + shape_str(shape()));
  return node_->values[0];
}

bool Tensor::requires_grad() const {
  require(defined(), "tensor: undefined handle");
  return node_->requires_grad;
}

void Tensor::set_requires_grad(bool rg) {
  require(defined(), "tensor: undefined handle");
  node_->requires_grad = rg;
}

bool Tensor::tracked() const {
  return defined() && (node_->requires_grad || node_->backward_fn);
}

std::vector<double>& Tensor::grad() const {
  require(defined(), "tensor: undefined handle");
  return node_->ensure_grad();
}

bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

void Tensor::zero_grad() const {
  require(defined(), "tensor: undefined handle");
  node_->grad.clear();
}

Tensor Tensor::clone_detached() const {
  require(defined(), "tensor: undefined handle");
  return from_data(node_->shape, node_->values, false);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           std::vector<Tensor> parents,
                           std::function<void(Node&)> backward_fn) {
  Tensor out = from_data(std::move(shape), std::move(values), false);
  bool any_tracked = false;
  for (const Tensor& p : parents) any_tracked = any_tracked || p.tracked();
  if (any_tracked) {
    out.node_->requires_grad = true;
    out.node_->parents = std::move(parents);
    out.node_->backward_fn = std::move(backward_fn);
  }
  return out;
}

namespace {

// Iterative post-order over parent edges; order is deterministic for a
// given graph construction order.
void topo_sort(Tensor::Node* root, std::vector<Tensor::Node*>& order) {
  std::unordered_set<Tensor::Node*> visited;
  std::vector<std::pair<Tensor::Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Tensor::Node* parent = node->parents[next++].node();
      if (parent && !visited.count(parent) &&
          (parent->requires_grad || parent->backward_fn)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void Tensor::backward() {
  require(defined(), "tensor: undefined handle");
  require(size() == 1,
          "backward: loss must be scalar, got " + shape_str(shape()));
  require(node_->requires_grad, "backward: loss does not require grad");
  require(!node_->backward_done,
          "backward: repeated call without a new forward pass");
  node_->backward_done = true;

  std::vector<Node*> order;
  topo_sort(node_.get(), order);
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

void check_finite(const Tensor& t, const char* op_name) {
  for (double v : t.values()) {
    if (!std::isfinite(v))
      fail(std::string(op_name) + ": non-finite value in output");
  }
}

}  // namespace rsinet
