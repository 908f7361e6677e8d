#include "textblend/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace textblend {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

NodePtr make_node(Shape shape, std::vector<double> values, bool requires_grad = false) {
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

thread_local Tape* g_active_tape = nullptr;

bool tracking(const NodePtr& a) { return g_active_tape && a->requires_grad; }
bool tracking(const NodePtr& a, const NodePtr& b) {
  return g_active_tape && (a->requires_grad || b->requires_grad);
}

void require_defined(const Tensor& t, const char* what) {
  if (!t.defined()) throw UsageError(std::string(what) + ": tensor is empty");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
  }
}

// Shared skeleton for differentiable elementwise unary ops.
template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd dydx_from_xy) {
  const NodePtr& an = unwrap(a);
  std::vector<double> out(an->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(an->values[i]);
  NodePtr on = make_node(an->shape, std::move(out), tracking(an));
  if (on->requires_grad) {
    g_active_tape->record([an, on, dydx_from_xy] {
      if (on->grad.empty()) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < an->grad.size(); ++i)
        an->grad[i] += on->grad[i] * dydx_from_xy(an->values[i], on->values[i]);
    });
  }
  return wrap(on);
}

}  // namespace

// --- Tensor ---

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape_product(shape);
  return wrap(make_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_product(shape);
  return wrap(make_node(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_product(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " wants " +
                         std::to_string(shape_product(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  return wrap(make_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  std::size_t n = shape_product(shape);
  std::vector<double> values(n);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : values) v = dist(rng);
  return wrap(make_node(std::move(shape), std::move(values)));
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::size() const {
  require_defined(*this, "size");
  return node_->size();
}

std::span<const double> Tensor::data() const {
  require_defined(*this, "data");
  return node_->values;
}

std::span<double> Tensor::data() {
  require_defined(*this, "data");
  return node_->values;
}

bool Tensor::requires_grad() const {
  require_defined(*this, "requires_grad");
  return node_->requires_grad;
}

Tensor& Tensor::set_requires_grad(bool value) {
  require_defined(*this, "set_requires_grad");
  node_->requires_grad = value;
  return *this;
}

std::span<const double> Tensor::grad() const {
  require_defined(*this, "grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  require_defined(*this, "zero_grad");
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) {
    throw UsageError("item: tensor has " + std::to_string(size()) + " elements");
  }
  return node_->values[0];
}

double Tensor::operator()(std::size_t i) const { return node_->values[i]; }

double Tensor::operator()(std::size_t i, std::size_t j) const {
  return node_->values[i * node_->shape[1] + j];
}

double Tensor::operator()(std::size_t i, std::size_t j, std::size_t k) const {
  return node_->values[(i * node_->shape[1] + j) * node_->shape[2] + k];
}

std::shared_ptr<detail::TensorNode>& unwrap(Tensor& t) { return t.node_; }
const std::shared_ptr<detail::TensorNode>& unwrap(const Tensor& t) { return t.node_; }
Tensor wrap(std::shared_ptr<detail::TensorNode> node) { return Tensor(std::move(node)); }

// --- Tape ---

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> rule) { ops_.push_back(std::move(rule)); }

void Tape::backward(const Tensor& output) {
  if (!output.defined() || output.size() != 1) {
    throw UsageError("backward: output must be a scalar tensor");
  }
  const NodePtr& on = unwrap(output);
  on->ensure_grad();
  on->grad[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

NoGrad::NoGrad() : saved_(g_active_tape) { g_active_tape = nullptr; }
NoGrad::~NoGrad() { g_active_tape = saved_; }

// --- elementwise ---

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const NodePtr &an = unwrap(a), &bn = unwrap(b);
  std::vector<double> out(an->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->values[i] + bn->values[i];
  NodePtr on = make_node(an->shape, std::move(out), tracking(an, bn));
  if (on->requires_grad) {
    g_active_tape->record([an, bn, on] {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
      }
    });
  }
  return wrap(on);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const NodePtr &an = unwrap(a), &bn = unwrap(b);
  std::vector<double> out(an->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->values[i] - bn->values[i];
  NodePtr on = make_node(an->shape, std::move(out), tracking(an, bn));
  if (on->requires_grad) {
    g_active_tape->record([an, bn, on] {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
      }
    });
  }
  return wrap(on);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const NodePtr &an = unwrap(a), &bn = unwrap(b);
  std::vector<double> out(an->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->values[i] * bn->values[i];
  NodePtr on = make_node(an->shape, std::move(out), tracking(an, bn));
  if (on->requires_grad) {
    g_active_tape->record([an, bn, on] {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          an->grad[i] += on->grad[i] * bn->values[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          bn->grad[i] += on->grad[i] * an->values[i];
      }
    });
  }
  return wrap(on);
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// --- linear algebra ---

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " do not chain");
  }
  const NodePtr &an = unwrap(a), &bn = unwrap(b);
  const std::size_t m = an->shape[0], k = an->shape[1], n = bn->shape[1];
  std::vector<double> out(m * n, 0.0);
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = an->values.data() + i * k;
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = bn->values.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  NodePtr on = make_node({m, n}, std::move(out), tracking(an, bn));
  if (on->requires_grad) {
    g_active_tape->record([an, bn, on, m, k, n] {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        an->ensure_grad();  // a.grad += g . b^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = on->grad.data() + i * n;
            const double* brow = bn->values.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            an->grad[i * k + p] += acc;
          }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();  // b.grad += a^T . g
        for (std::size_t i = 0; i < m; ++i) {
          const double* arow = an->values.data() + i * k;
          const double* grow = on->grad.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* brow = bn->grad.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
        }
      }
    });
  }
  return wrap(on);
}

namespace {

// Shared forward/backward for x.w^T [+ b]; bias may be null.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor* bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[1]) {
    throw DimensionError("linear: input " + shape_str(x.shape()) +
                         " does not match weight " + shape_str(w.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->shape()[0] != w.shape()[0])) {
    throw DimensionError("linear: bias " + shape_str(bias->shape()) +
                         " does not match weight " + shape_str(w.shape()));
  }
  const NodePtr &xn = unwrap(x), &wn = unwrap(w);
  NodePtr biasn = bias ? unwrap(*bias) : nullptr;
  const std::size_t n = xn->shape[0], in = xn->shape[1], out_dim = wn->shape[0];
  std::vector<double> out(n * out_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xrow = xn->values.data() + i * in;
    double* orow = out.data() + i * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wrow = wn->values.data() + o * in;
      double acc = biasn ? biasn->values[o] : 0.0;
      for (std::size_t p = 0; p < in; ++p) acc += xrow[p] * wrow[p];
      orow[o] = acc;
    }
  }
  bool track = g_active_tape &&
               (xn->requires_grad || wn->requires_grad || (biasn && biasn->requires_grad));
  NodePtr on = make_node({n, out_dim}, std::move(out), track);
  if (track) {
    g_active_tape->record([xn, wn, biasn, on, n, in, out_dim] {
      if (on->grad.empty()) return;
      if (xn->requires_grad) {
        xn->ensure_grad();  // x.grad += g . w
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = on->grad.data() + i * out_dim;
          double* xrow = xn->grad.data() + i * in;
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double gv = grow[o];
            const double* wrow = wn->values.data() + o * in;
            for (std::size_t p = 0; p < in; ++p) xrow[p] += gv * wrow[p];
          }
        }
      }
      if (wn->requires_grad) {
        wn->ensure_grad();  // w.grad += g^T . x
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = on->grad.data() + i * out_dim;
          const double* xrow = xn->values.data() + i * in;
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double gv = grow[o];
            double* wrow = wn->grad.data() + o * in;
            for (std::size_t p = 0; p < in; ++p) wrow[p] += gv * xrow[p];
          }
        }
      }
      if (biasn && biasn->requires_grad) {
        biasn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = on->grad.data() + i * out_dim;
          for (std::size_t o = 0; o < out_dim; ++o) biasn->grad[o] += grow[o];
        }
      }
    });
  }
  return wrap(on);
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return affine(x, w, &b);
}

Tensor linear(const Tensor& x, const Tensor& w) { return affine(x, w, nullptr); }

// --- shape ---

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw UsageError("concat: no tensors given");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) {
      throw DimensionError("concat: rank mismatch between " + shape_str(first) +
                           " and " + shape_str(s));
    }
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        throw DimensionError("concat: shapes " + shape_str(first) + " and " +
                             shape_str(s) + " differ off the concat axis");
      }
    }
    out_shape[axis] += s[axis];
  }

  // outer = product of dims before axis, inner = product after.
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::size_t total = outer * out_shape[axis] * inner;
  std::vector<double> out(total);
  std::vector<NodePtr> nodes;
  nodes.reserve(parts.size());
  bool any_grad = false;
  for (const Tensor& p : parts) {
    nodes.push_back(unwrap(p));
    any_grad = any_grad || nodes.back()->requires_grad;
  }

  std::size_t offset = 0;  // running offset along the concat axis
  std::vector<std::size_t> offsets(parts.size());
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    offsets[pi] = offset;
    const NodePtr& pn = nodes[pi];
    const std::size_t ax = pn->shape[axis];
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = pn->values.data() + o * ax * inner;
      double* dst = out.data() + (o * out_shape[axis] + offset) * inner;
      std::copy(src, src + ax * inner, dst);
    }
    offset += ax;
  }

  NodePtr on = make_node(out_shape, std::move(out), g_active_tape && any_grad);
  if (on->requires_grad) {
    std::size_t out_axis = out_shape[axis];
    g_active_tape->record([nodes, offsets, on, outer, inner, out_axis, axis] {
      if (on->grad.empty()) return;
      for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
        const NodePtr& pn = nodes[pi];
        if (!pn->requires_grad) continue;
        pn->ensure_grad();
        const std::size_t ax = pn->shape[axis];
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = on->grad.data() + (o * out_axis + offsets[pi]) * inner;
          double* dst = pn->grad.data() + o * ax * inner;
          for (std::size_t i = 0; i < ax * inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return wrap(on);
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  const Tensor parts[] = {a, b};
  return concat(std::span<const Tensor>(parts, 2), axis);
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_product(shape) != t.size()) {
    throw DimensionError("reshape: " + shape_str(t.shape()) + " to " +
                         shape_str(shape) + " changes element count");
  }
  const NodePtr& tn = unwrap(t);
  NodePtr on = make_node(std::move(shape), tn->values, tracking(tn));
  if (on->requires_grad) {
    g_active_tape->record([tn, on] {
      if (on->grad.empty()) return;
      tn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) tn->grad[i] += on->grad[i];
    });
  }
  return wrap(on);
}

Tensor time_slice(const Tensor& t, std::size_t index) {
  if (t.rank() != 3) {
    throw DimensionError("time_slice: want rank-3 input, got " + shape_str(t.shape()));
  }
  const NodePtr& tn = unwrap(t);
  const std::size_t b = tn->shape[0], len = tn->shape[1], d = tn->shape[2];
  if (index >= len) {
    throw DimensionError("time_slice: index " + std::to_string(index) +
                         " out of range for " + shape_str(t.shape()));
  }
  std::vector<double> out(b * d);
  for (std::size_t i = 0; i < b; ++i) {
    const double* src = tn->values.data() + (i * len + index) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  NodePtr on = make_node({b, d}, std::move(out), tracking(tn));
  if (on->requires_grad) {
    g_active_tape->record([tn, on, b, len, d, index] {
      if (on->grad.empty()) return;
      tn->ensure_grad();
      for (std::size_t i = 0; i < b; ++i) {
        const double* src = on->grad.data() + i * d;
        double* dst = tn->grad.data() + (i * len + index) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  }
  return wrap(on);
}

// --- reductions ---

Tensor max_over_axis(const Tensor& t, std::size_t axis) {
  if (axis >= t.rank()) {
    throw DimensionError("max_over_axis: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(t.shape()));
  }
  const NodePtr& tn = unwrap(t);
  const Shape& s = tn->shape;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t ax = s[axis];
  if (ax == 0) throw DimensionError("max_over_axis: empty axis");

  Shape out_shape;
  for (std::size_t d = 0; d < s.size(); ++d)
    if (d != axis) out_shape.push_back(s[d]);
  if (out_shape.empty()) out_shape.push_back(1);  // scalar result

  std::vector<double> out(outer * inner);
  std::vector<std::size_t> argmax(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double best = tn->values[(o * ax) * inner + i];
      std::size_t best_k = 0;
      for (std::size_t k = 1; k < ax; ++k) {
        double v = tn->values[(o * ax + k) * inner + i];
        if (v > best) {  // strict: ties keep the lowest index
          best = v;
          best_k = k;
        }
      }
      out[o * inner + i] = best;
      argmax[o * inner + i] = best_k;
    }
  }
  NodePtr on = make_node(out_shape, std::move(out), tracking(tn));
  if (on->requires_grad) {
    g_active_tape->record([tn, on, argmax, outer, inner, ax] {
      if (on->grad.empty()) return;
      tn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          std::size_t k = argmax[o * inner + i];
          tn->grad[(o * ax + k) * inner + i] += on->grad[o * inner + i];
        }
    });
  }
  return wrap(on);
}

Tensor sum_all(const Tensor& t) {
  const NodePtr& tn = unwrap(t);
  double acc = 0.0;
  for (double v : tn->values) acc += v;
  NodePtr on = make_node({1}, {acc}, tracking(tn));
  if (on->requires_grad) {
    g_active_tape->record([tn, on] {
      if (on->grad.empty()) return;
      tn->ensure_grad();
      for (double& g : tn->grad) g += on->grad[0];
    });
  }
  return wrap(on);
}

Tensor mean_all(const Tensor& t) {
  const NodePtr& tn = unwrap(t);
  double acc = 0.0;
  for (double v : tn->values) acc += v;
  const double inv = 1.0 / static_cast<double>(tn->size());
  NodePtr on = make_node({1}, {acc * inv}, tracking(tn));
  if (on->requires_grad) {
    g_active_tape->record([tn, on, inv] {
      if (on->grad.empty()) return;
      tn->ensure_grad();
      for (double& g : tn->grad) g += on->grad[0] * inv;
    });
  }
  return wrap(on);
}

Tensor pick(const Tensor& t, std::span<const int> idx) {
  if (t.rank() != 2) {
    throw DimensionError("pick: want [n x K], got " + shape_str(t.shape()));
  }
  const NodePtr& tn = unwrap(t);
  const std::size_t n = tn->shape[0], k = tn->shape[1];
  if (idx.size() != n) {
    throw DimensionError("pick: " + std::to_string(idx.size()) + " indices for " +
                         std::to_string(n) + " rows");
  }
  std::vector<double> out(n);
  std::vector<std::size_t> flat(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= k) {
      throw InputError("pick: index " + std::to_string(idx[i]) + " out of range 0.." +
                       std::to_string(k - 1));
    }
    flat[i] = i * k + static_cast<std::size_t>(idx[i]);
    out[i] = tn->values[flat[i]];
  }
  NodePtr on = make_node({n}, std::move(out), tracking(tn));
  if (on->requires_grad) {
    g_active_tape->record([tn, on, flat] {
      if (on->grad.empty()) return;
      tn->ensure_grad();
      for (std::size_t i = 0; i < flat.size(); ++i) tn->grad[flat[i]] += on->grad[i];
    });
  }
  return wrap(on);
}

// --- softmax family ---

namespace {

void require_finite_rows(const detail::TensorNode& n, const char* op) {
  for (double v : n.values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite input value");
    }
  }
}

void require_logits(const Tensor& t, const char* op) {
  if (t.rank() != 2 || t.shape()[1] == 0) {
    throw DimensionError(std::string(op) + ": want [n x K] logits, got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  require_logits(logits, "softmax");
  const NodePtr& xn = unwrap(logits);
  require_finite_rows(*xn, "softmax");
  const std::size_t n = xn->shape[0], k = xn->shape[1];
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xn->values.data() + i * k;
    double* orow = out.data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < k; ++j) orow[j] /= sum;
  }
  NodePtr on = make_node({n, k}, std::move(out), tracking(xn));
  if (on->requires_grad) {
    g_active_tape->record([xn, on, n, k] {
      if (on->grad.empty()) return;
      xn->ensure_grad();  // dx = y * (g - sum(g * y)) per row
      for (std::size_t i = 0; i < n; ++i) {
        const double* y = on->values.data() + i * k;
        const double* g = on->grad.data() + i * k;
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += g[j] * y[j];
        double* dx = xn->grad.data() + i * k;
        for (std::size_t j = 0; j < k; ++j) dx[j] += y[j] * (g[j] - dot);
      }
    });
  }
  return wrap(on);
}

Tensor log_softmax(const Tensor& logits) {
  require_logits(logits, "log_softmax");
  const NodePtr& xn = unwrap(logits);
  require_finite_rows(*xn, "log_softmax");
  const std::size_t n = xn->shape[0], k = xn->shape[1];
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xn->values.data() + i * k;
    double* orow = out.data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < k; ++j) orow[j] = row[j] - lse;
  }
  NodePtr on = make_node({n, k}, std::move(out), tracking(xn));
  if (on->requires_grad) {
    g_active_tape->record([xn, on, n, k] {
      if (on->grad.empty()) return;
      xn->ensure_grad();  // dx = g - softmax(x) * sum(g) per row
      for (std::size_t i = 0; i < n; ++i) {
        const double* y = on->values.data() + i * k;
        const double* g = on->grad.data() + i * k;
        double gsum = 0.0;
        for (std::size_t j = 0; j < k; ++j) gsum += g[j];
        double* dx = xn->grad.data() + i * k;
        for (std::size_t j = 0; j < k; ++j) dx[j] += g[j] - std::exp(y[j]) * gsum;
      }
    });
  }
  return wrap(on);
}

// --- lookup ---

Tensor embedding_rows(const Tensor& weights, std::span<const int> ids, int pad_id) {
  if (weights.rank() != 2) {
    throw DimensionError("embedding_rows: want [V x d] table, got " +
                         shape_str(weights.shape()));
  }
  const NodePtr& wn = unwrap(weights);
  const std::size_t vocab = wn->shape[0], d = wn->shape[1];
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw InputError("embedding_rows: token id " + std::to_string(ids[i]) +
                       " outside vocabulary of size " + std::to_string(vocab));
    }
    const double* src = wn->values.data() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  NodePtr on = make_node({ids.size(), d}, std::move(out), tracking(wn));
  if (on->requires_grad) {
    std::vector<int> ids_copy(ids.begin(), ids.end());
    g_active_tape->record([wn, on, ids_copy, d, pad_id] {
      if (on->grad.empty()) return;
      wn->ensure_grad();
      for (std::size_t i = 0; i < ids_copy.size(); ++i) {
        if (ids_copy[i] == pad_id) continue;  // pad row stays frozen
        const double* src = on->grad.data() + i * d;
        double* dst = wn->grad.data() + static_cast<std::size_t>(ids_copy[i]) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  }
  return wrap(on);
}

}  // namespace textblend
