#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "textblend/error.hpp"

namespace textblend {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first touched by backward()
  bool requires_grad = false;

  std::size_t size() const { return values.size(); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major tensor of doubles with an optional gradient slot.
/// Copies are shallow handles to the same storage; training code relies on
/// this to hold parameters both in a model struct and in an optimizer list.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  /// Uniform(lo, hi) fill, e.g. for parameter initialization.
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }

  std::span<const double> data() const;
  std::span<double> data();

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  /// Gradient values; empty span until backward() has touched this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  /// Value of a single-element tensor.
  double item() const;

  double operator()(std::size_t i) const;
  double operator()(std::size_t i, std::size_t j) const;
  double operator()(std::size_t i, std::size_t j, std::size_t k) const;

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::TensorNode> node_;

  friend std::shared_ptr<detail::TensorNode>& unwrap(Tensor& t);
  friend const std::shared_ptr<detail::TensorNode>& unwrap(const Tensor& t);
  friend Tensor wrap(std::shared_ptr<detail::TensorNode> node);
};

std::shared_ptr<detail::TensorNode>& unwrap(Tensor& t);
const std::shared_ptr<detail::TensorNode>& unwrap(const Tensor& t);
Tensor wrap(std::shared_ptr<detail::TensorNode> node);

/// Reverse-mode tape. Constructing a Tape makes it the active tape for the
/// current thread; ops executed while it is active record their backward
/// rules. One training step owns one tape.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Seeds d(output)/d(output) = 1 and replays recorded rules in reverse.
  /// Repeated calls accumulate into leaf gradients.
  void backward(const Tensor& output);

  void record(std::function<void()> rule);
  std::size_t recorded_ops() const { return ops_.size(); }

  static Tape* active();

 private:
  std::vector<std::function<void()>> ops_;
  Tape* prev_ = nullptr;
};

/// Suspends tape recording for its lifetime (inference / evaluation).
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  Tape* saved_ = nullptr;
};

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);            // [m x k] . [k x n]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // x.w^T + b
Tensor linear(const Tensor& x, const Tensor& w);                   // x.w^T

// --- shape ---
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
Tensor reshape(const Tensor& t, Shape shape);
/// Slice [b x L x d] at time t -> [b x d].
Tensor time_slice(const Tensor& t, std::size_t index);

// --- reductions ---
/// Max along `axis`; gradient goes to the lowest-index maximum on ties.
Tensor max_over_axis(const Tensor& t, std::size_t axis);
Tensor sum_all(const Tensor& t);
Tensor mean_all(const Tensor& t);
/// out[i] = t[i, idx[i]] for t of shape [n x K].
Tensor pick(const Tensor& t, std::span<const int> idx);

// --- softmax family ---
/// Row-wise softmax of [n x K] logits, max-subtracted for stability.
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

// --- lookup ---
/// Rows of weights[V x d] selected by ids -> [ids.size() x d]. Gradient is
/// scattered back into the selected rows, except the pad row which stays
/// gradient-free.
Tensor embedding_rows(const Tensor& weights, std::span<const int> ids, int pad_id);

}  // namespace textblend
