#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "textblend/tensor.hpp"

namespace textblend {

/// Token embedding table. The pad row is held at exactly zero: it is
/// initialized to zero, its gradient is masked in embedding_rows, and the
/// loaders never overwrite it.
struct EmbeddingTable {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  int pad_id = 0;
  Tensor weights;  // [vocab_size x dim]
};

EmbeddingTable make_embedding(std::size_t vocab_size, std::size_t dim, int pad_id,
                              std::mt19937_64& rng);

/// Looks up a whole padded id matrix -> [batch x len x dim].
Tensor embed_batch(const EmbeddingTable& table, std::span<const std::int32_t> ids,
                   std::size_t batch, std::size_t len);

/// Per-gate weights of one LSTM direction. Forget-gate bias starts at 1.
struct LstmParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  Tensor w_f, w_i, w_o, w_c;  // [hidden x input]
  Tensor u_f, u_i, u_o, u_c;  // [hidden x hidden]
  Tensor b_f, b_i, b_o, b_c;  // [hidden]
};

LstmParams make_lstm(std::size_t input, std::size_t hidden, std::mt19937_64& rng);

struct LstmState {
  Tensor h;  // [batch x hidden]
  Tensor c;  // [batch x hidden]
};

LstmState lstm_initial_state(std::size_t batch, std::size_t hidden);

/// One recurrence step: gates from x_t and the previous state, then the new
/// (h, c). Sigmoid gates, tanh cell activations.
LstmState lstm_cell(const LstmParams& params, const Tensor& x_t, const LstmState& state);

/// Runs the forward direction to each example's true last token and the
/// backward direction from that token down to the first, then concatenates
/// the two final hidden states -> [batch x 2*hidden]. The state is carried
/// unchanged through positions at or beyond an example's length, so padding
/// never leaks into the result.
Tensor bilstm_encode(const LstmParams& fwd, const LstmParams& bwd,
                     const Tensor& embedded /* [batch x len x dim] */,
                     std::span<const std::size_t> lengths);

/// Bank of same-width text convolution filters over full embedding rows.
struct ConvFilterBank {
  std::size_t width = 0;
  std::size_t count = 0;
  std::size_t dim = 0;
  Tensor kernels;  // [count x width x dim]
  Tensor bias;     // [count]
};

ConvFilterBank make_conv_bank(std::size_t width, std::size_t count, std::size_t dim,
                              std::mt19937_64& rng);

/// Valid correlation along time + bias + ReLU, then max over the window
/// positions that lie entirely within each example's length
/// -> [batch x count]. Ties go to the lowest position. Callers must have
/// raised lengths to at least the filter width (pipeline padding contract).
Tensor conv_text(const ConvFilterBank& bank, const Tensor& embedded,
                 std::span<const std::size_t> lengths);

/// Inverted dropout: training mode zeroes each element with probability
/// `rate` and scales survivors by 1/(1-rate); eval mode is the identity.
Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng);

}  // namespace textblend
