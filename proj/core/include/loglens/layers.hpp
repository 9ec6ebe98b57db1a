#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "loglens/ops.hpp"
#include "loglens/param_set.hpp"

namespace loglens {

struct DenseLayer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  Tensor operator()(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }
};

DenseLayer make_dense(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out);

/// Gate blocks in `w_input`/`w_hidden`/`bias` are ordered input, forget, candidate, output.
struct LstmParams {
  Tensor w_input;   // [in x 4u]
  Tensor w_hidden;  // [u x 4u]
  Tensor bias;      // [4u]
  std::size_t hidden = 0;
};

LstmParams make_lstm(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t hidden);

struct LstmState {
  Tensor h;
  Tensor c;
};

/// One step of the standard gated cell for a batch: x[B x in], h and c [B x u]
/// (or unbatched vectors).
LstmState lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c, const LstmParams& p);

/// Runs the cell over `steps` (each [B x in]) from a zero state and returns
/// the hidden state after every step.
std::vector<Tensor> lstm_unroll(const std::vector<Tensor>& steps, const LstmParams& p);

struct AttentionParams {
  DenseLayer query, key, value, out;
  std::size_t heads = 1;
};

/// Throws ConfigError when `width` is not divisible by `heads`.
AttentionParams make_attention(ParamSet& params, const std::string& prefix, std::size_t width, std::size_t heads);

/// Multi-head self-attention over `x` holding batch stacked sequences of
/// `seq_len` rows each ([batch*seq_len x d]). Heads are concatenated and
/// passed through the output projection.
Tensor multihead_attention(const Tensor& x, std::size_t seq_len, const AttentionParams& p,
                           std::vector<double>* weights_out = nullptr);

/// Fixed sinusoidal position table [seq_len x width].
Tensor sinusoidal_positions(std::size_t seq_len, std::size_t width);

}  // namespace loglens
