#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rsinet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense 64-bit tensor participating in a dynamic reverse-mode graph.
// Copying a Tensor copies the handle; both copies refer to the same node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t ndim() const;
  std::size_t size() const;

  // Tensor is a shared handle; element access does not propagate the
  // handle's constness to the underlying buffer.
  std::vector<double>& values() const;
  double* data() const;
  double item() const;  // single-element tensors only

  bool requires_grad() const;
  void set_requires_grad(bool rg);
  // True when this node is part of an active differentiation graph.
  bool tracked() const;

  std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad() const;

  // Reverse-mode accumulation from a scalar tensor. Throws on non-scalar
  // input or on a second call for the same forward pass.
  void backward();

  // Returns a graph-detached copy sharing no state with this tensor.
  Tensor clone_detached() const;

  // Internal: builds an op result wired to its parents.
  struct Node;
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents,
                            std::function<void(Node&)> backward_fn);
  Node* node() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
};

struct Tensor::Node {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation
  std::vector<Tensor> parents;
  std::function<void(Node&)> backward_fn;
  bool backward_done = false;

  std::size_t size() const { return values.size(); }
  std::vector<double>& ensure_grad();
};

// Throws if any value is NaN or Inf; every forward op calls this on its
// output (finite-values invariant).
void check_finite(const Tensor& t, const char* op_name);

[[noreturn]] void fail(const std::string& message);
void require(bool condition, const std::string& message);

}  // namespace rsinet
