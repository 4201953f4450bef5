#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hvfa/rng.hpp"

namespace hvfa {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

// One recorded value in the reverse-mode graph. `backward` reads this node's
// grad and accumulates into the grads of `parents`.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return parents.empty(); }
  std::vector<double>& grad_buffer();
};

}  // namespace detail

// Dense row-major float64 array. Copies share the underlying node; values are
// immutable after construction except for leaf parameters (mutable_data) and
// gradient accumulation during backward().
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor eye(std::size_t n, bool requires_grad = false);
  // Entries i.i.d. uniform on (lo, hi).
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Only leaves may be written in place (optimizer steps, gradcheck probes).
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Zeros when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad();

  // Reverse pass from a single-element tensor. Leaf grads accumulate across
  // calls; interior grads are reset at the start of each call.
  void backward() const;

  // Copy of the values with no history; gradients never flow through it.
  Tensor detach() const;
  // Independent leaf copy with the requested grad flag.
  Tensor clone_leaf(bool requires_grad) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

}  // namespace hvfa
