#include "textblend/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace textblend {

namespace {

Tensor uniform_param(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t = Tensor::uniform(std::move(shape), -bound, bound, rng);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

EmbeddingTable make_embedding(std::size_t vocab_size, std::size_t dim, int pad_id,
                              std::mt19937_64& rng) {
  EmbeddingTable table;
  table.vocab_size = vocab_size;
  table.dim = dim;
  table.pad_id = pad_id;
  table.weights = Tensor::uniform({vocab_size, dim}, -0.1, 0.1, rng);
  table.weights.set_requires_grad(true);
  auto row = table.weights.data().subspan(static_cast<std::size_t>(pad_id) * dim, dim);
  std::fill(row.begin(), row.end(), 0.0);
  return table;
}

Tensor embed_batch(const EmbeddingTable& table, std::span<const std::int32_t> ids,
                   std::size_t batch, std::size_t len) {
  if (ids.size() != batch * len) {
    throw DimensionError("embed_batch: " + std::to_string(ids.size()) +
                         " ids for batch " + std::to_string(batch) + " x len " +
                         std::to_string(len));
  }
  std::vector<int> flat(ids.begin(), ids.end());
  Tensor rows = embedding_rows(table.weights, flat, table.pad_id);
  return reshape(rows, {batch, len, table.dim});
}

LstmParams make_lstm(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  const double wb = 1.0 / std::sqrt(static_cast<double>(input));
  const double ub = 1.0 / std::sqrt(static_cast<double>(hidden));
  p.w_f = uniform_param({hidden, input}, wb, rng);
  p.w_i = uniform_param({hidden, input}, wb, rng);
  p.w_o = uniform_param({hidden, input}, wb, rng);
  p.w_c = uniform_param({hidden, input}, wb, rng);
  p.u_f = uniform_param({hidden, hidden}, ub, rng);
  p.u_i = uniform_param({hidden, hidden}, ub, rng);
  p.u_o = uniform_param({hidden, hidden}, ub, rng);
  p.u_c = uniform_param({hidden, hidden}, ub, rng);
  p.b_f = Tensor::full({hidden}, 1.0);  // forget gate starts open
  p.b_i = Tensor::zeros({hidden});
  p.b_o = Tensor::zeros({hidden});
  p.b_c = Tensor::zeros({hidden});
  p.b_f.set_requires_grad(true);
  p.b_i.set_requires_grad(true);
  p.b_o.set_requires_grad(true);
  p.b_c.set_requires_grad(true);
  return p;
}

LstmState lstm_initial_state(std::size_t batch, std::size_t hidden) {
  return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
}

LstmState lstm_cell(const LstmParams& params, const Tensor& x_t, const LstmState& state) {
  if (x_t.rank() != 2 || x_t.shape()[1] != params.input) {
    throw DimensionError("lstm_cell: input " + shape_str(x_t.shape()) +
                         " does not match declared input size " +
                         std::to_string(params.input));
  }
  if (state.h.shape() != Shape{x_t.shape()[0], params.hidden}) {
    throw DimensionError("lstm_cell: state " + shape_str(state.h.shape()) +
                         " does not match batch " + std::to_string(x_t.shape()[0]) +
                         " x hidden " + std::to_string(params.hidden));
  }
  Tensor f = sigmoid(add(linear(x_t, params.w_f, params.b_f), linear(state.h, params.u_f)));
  Tensor i = sigmoid(add(linear(x_t, params.w_i, params.b_i), linear(state.h, params.u_i)));
  Tensor o = sigmoid(add(linear(x_t, params.w_o, params.b_o), linear(state.h, params.u_o)));
  Tensor g = tanh(add(linear(x_t, params.w_c, params.b_c), linear(state.h, params.u_c)));
  Tensor c = add(mul(f, state.c), mul(i, g));
  Tensor h = mul(o, tanh(c));
  return {h, c};
}

namespace {

// 0/1 row masks broadcast over hidden; entry (i, :) is keep ? 1 : 0.
Tensor step_mask(std::span<const std::size_t> lengths, std::size_t t, std::size_t hidden,
                 bool* any_active) {
  std::vector<double> m(lengths.size() * hidden);
  *any_active = false;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double keep = t < lengths[i] ? 1.0 : 0.0;
    if (keep != 0.0) *any_active = true;
    std::fill(m.begin() + static_cast<std::ptrdiff_t>(i * hidden),
              m.begin() + static_cast<std::ptrdiff_t>((i + 1) * hidden), keep);
  }
  return Tensor::from({lengths.size(), hidden}, std::move(m));
}

LstmState masked_step(const LstmParams& params, const Tensor& x_t, const LstmState& prev,
                      const Tensor& mask, const Tensor& inv_mask) {
  LstmState next = lstm_cell(params, x_t, prev);
  Tensor h = add(mul(mask, next.h), mul(inv_mask, prev.h));
  Tensor c = add(mul(mask, next.c), mul(inv_mask, prev.c));
  return {h, c};
}

}  // namespace

Tensor bilstm_encode(const LstmParams& fwd, const LstmParams& bwd, const Tensor& embedded,
                     std::span<const std::size_t> lengths) {
  if (embedded.rank() != 3) {
    throw DimensionError("bilstm_encode: want [batch x len x dim], got " +
                         shape_str(embedded.shape()));
  }
  const std::size_t batch = embedded.shape()[0];
  const std::size_t len = embedded.shape()[1];
  if (lengths.size() != batch) {
    throw DimensionError("bilstm_encode: " + std::to_string(lengths.size()) +
                         " lengths for batch of " + std::to_string(batch));
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0) {
      throw InputError("bilstm_encode: example " + std::to_string(i) +
                       " has zero length");
    }
    if (lengths[i] > len) {
      throw DimensionError("bilstm_encode: length " + std::to_string(lengths[i]) +
                           " exceeds padded width " + std::to_string(len));
    }
  }
  if (fwd.hidden != bwd.hidden) {
    throw DimensionError("bilstm_encode: direction hidden sizes differ");
  }

  struct Step {
    Tensor x;
    Tensor mask, inv_mask;
    bool active;
  };
  std::vector<Step> steps;
  steps.reserve(len);
  Tensor ones = Tensor::full({batch, fwd.hidden}, 1.0);
  for (std::size_t t = 0; t < len; ++t) {
    bool active = false;
    Tensor mask = step_mask(lengths, t, fwd.hidden, &active);
    steps.push_back({time_slice(embedded, t), mask, sub(ones, mask), active});
  }

  LstmState fstate = lstm_initial_state(batch, fwd.hidden);
  for (std::size_t t = 0; t < len; ++t) {
    if (!steps[t].active) break;  // everything beyond here is padding
    fstate = masked_step(fwd, steps[t].x, fstate, steps[t].mask, steps[t].inv_mask);
  }

  LstmState bstate = lstm_initial_state(batch, bwd.hidden);
  for (std::size_t t = len; t-- > 0;) {
    if (!steps[t].active) continue;  // skip all-pad columns at the tail
    bstate = masked_step(bwd, steps[t].x, bstate, steps[t].mask, steps[t].inv_mask);
  }

  return concat(fstate.h, bstate.h, 1);
}

ConvFilterBank make_conv_bank(std::size_t width, std::size_t count, std::size_t dim,
                              std::mt19937_64& rng) {
  if (width == 0) throw ConfigError("conv bank: width must be >= 1");
  ConvFilterBank bank;
  bank.width = width;
  bank.count = count;
  bank.dim = dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(width * dim));
  bank.kernels = uniform_param({count, width, dim}, bound, rng);
  bank.bias = Tensor::zeros({count});
  bank.bias.set_requires_grad(true);
  return bank;
}

Tensor conv_text(const ConvFilterBank& bank, const Tensor& embedded,
                 std::span<const std::size_t> lengths) {
  if (embedded.rank() != 3 || embedded.shape()[2] != bank.dim) {
    throw DimensionError("conv_text: input " + shape_str(embedded.shape()) +
                         " does not match kernel dim " + std::to_string(bank.dim));
  }
  const std::size_t batch = embedded.shape()[0];
  const std::size_t len = embedded.shape()[1];
  const std::size_t dim = bank.dim;
  const std::size_t width = bank.width;
  const std::size_t count = bank.count;
  if (lengths.size() != batch) {
    throw DimensionError("conv_text: " + std::to_string(lengths.size()) +
                         " lengths for batch of " + std::to_string(batch));
  }
  for (std::size_t i = 0; i < batch; ++i) {
    if (lengths[i] < width || lengths[i] > len) {
      throw InternalError("conv_text: example " + std::to_string(i) + " length " +
                          std::to_string(lengths[i]) + " violates the padding " +
                          "contract for filter width " + std::to_string(width));
    }
  }

  auto en = unwrap(embedded);
  auto kn = unwrap(bank.kernels);
  auto bn = unwrap(bank.bias);

  std::vector<double> out(batch * count);
  // Pre-activation argmax per (example, filter); max over ReLU equals
  // ReLU of the max since ReLU is nondecreasing.
  std::vector<std::size_t> argmax(batch * count);
  std::vector<double> best_pre(batch * count);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* ex = en->values.data() + b * len * dim;
    const std::size_t positions = lengths[b] - width + 1;
    for (std::size_t f = 0; f < count; ++f) {
      const double* kernel = kn->values.data() + f * width * dim;
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_p = 0;
      for (std::size_t p = 0; p < positions; ++p) {
        double acc = bn->values[f];
        const double* window = ex + p * dim;
        for (std::size_t r = 0; r < width * dim; ++r) acc += kernel[r] * window[r];
        if (acc > best) {
          best = acc;
          best_p = p;
        }
      }
      best_pre[b * count + f] = best;
      argmax[b * count + f] = best_p;
      out[b * count + f] = best > 0.0 ? best : 0.0;
    }
  }

  bool track = Tape::active() && (en->requires_grad || kn->requires_grad ||
                                  bn->requires_grad);
  auto on = unwrap(Tensor::from({batch, count}, std::move(out)));
  on->requires_grad = track;
  if (track) {
    Tape::active()->record([en, kn, bn, on, argmax, best_pre, batch, count, width, dim,
                            len] {
      if (on->grad.empty()) return;
      if (en->requires_grad) en->ensure_grad();
      if (kn->requires_grad) kn->ensure_grad();
      if (bn->requires_grad) bn->ensure_grad();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t f = 0; f < count; ++f) {
          const std::size_t slot = b * count + f;
          if (best_pre[slot] <= 0.0) continue;  // ReLU clipped this filter
          const double g = on->grad[slot];
          if (g == 0.0) continue;
          const std::size_t p = argmax[slot];
          const double* window = en->values.data() + (b * len + p) * dim;
          const double* kernel = kn->values.data() + f * width * dim;
          if (kn->requires_grad) {
            double* kg = kn->grad.data() + f * width * dim;
            for (std::size_t r = 0; r < width * dim; ++r) kg[r] += g * window[r];
          }
          if (en->requires_grad) {
            double* eg = en->grad.data() + (b * len + p) * dim;
            for (std::size_t r = 0; r < width * dim; ++r) eg[r] += g * kernel[r];
          }
          if (bn->requires_grad) bn->grad[f] += g;
        }
      }
    });
  }
  return wrap(on);
}

Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
  }
  if (!training || rate == 0.0) return x;

  auto xn = unwrap(x);
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(xn->size());
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (double& m : mask) m = dist(rng) < rate ? 0.0 : scale;

  std::vector<double> out(xn->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn->values[i] * mask[i];
  auto on = unwrap(Tensor::from(xn->shape, std::move(out)));
  on->requires_grad = Tape::active() && xn->requires_grad;
  if (on->requires_grad) {
    Tape::active()->record([xn, on, mask = std::move(mask)] {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i)
        xn->grad[i] += on->grad[i] * mask[i];
    });
  }
  return wrap(on);
}

}  // namespace textblend
