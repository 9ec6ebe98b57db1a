#include "loglens/layers.hpp"

#include <cmath>

#include "loglens/errors.hpp"

namespace loglens {

DenseLayer make_dense(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out) {
  DenseLayer layer;
  layer.weight = params.add_uniform(prefix + ".weight", {in, out}, in);
  layer.bias = params.add_uniform(prefix + ".bias", {out}, in);
  return layer;
}

LstmParams make_lstm(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t hidden) {
  LstmParams p;
  p.hidden = hidden;
  p.w_input = params.add_uniform(prefix + ".w_input", {in, 4 * hidden}, hidden);
  p.w_hidden = params.add_uniform(prefix + ".w_hidden", {hidden, 4 * hidden}, hidden);
  p.bias = params.add_uniform(prefix + ".bias", {4 * hidden}, hidden);
  return p;
}

LstmState lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c, const LstmParams& p) {
  const std::size_t u = p.hidden;
  if (p.w_input.rank() != 2 || p.w_input.cols() != 4 * u || p.w_hidden.rows() != u || p.w_hidden.cols() != 4 * u ||
      p.bias.size() != 4 * u) {
    throw DimensionError("lstm_cell: parameter shapes inconsistent with hidden size " + std::to_string(u));
  }
  if (x.cols() != p.w_input.rows()) {
    throw DimensionError("lstm_cell: input " + shape_string(x.shape()) + " does not match weights " +
                         shape_string(p.w_input.shape()));
  }
  if (h.cols() != u || c.shape() != h.shape() || h.rows() != x.rows()) {
    throw DimensionError("lstm_cell: state " + shape_string(h.shape()) + "/" + shape_string(c.shape()) +
                         " does not match input " + shape_string(x.shape()) + " and hidden size " + std::to_string(u));
  }
  const Tensor pre = add_bias(add(matmul(x, p.w_input), matmul(h, p.w_hidden)), p.bias);
  const Tensor in_gate = sigmoid(slice_cols(pre, 0, u));
  const Tensor forget_gate = sigmoid(slice_cols(pre, u, u));
  const Tensor candidate = tanh(slice_cols(pre, 2 * u, u));
  const Tensor out_gate = sigmoid(slice_cols(pre, 3 * u, u));
  Tensor c_next = add(mul(forget_gate, c), mul(in_gate, candidate));
  Tensor h_next = mul(out_gate, tanh(c_next));
  return {h_next, c_next};
}

std::vector<Tensor> lstm_unroll(const std::vector<Tensor>& steps, const LstmParams& p) {
  std::vector<Tensor> hidden;
  if (steps.empty()) return hidden;
  const std::size_t batch = steps.front().rows();
  LstmState state{Tensor::zeros({batch, p.hidden}), Tensor::zeros({batch, p.hidden})};
  hidden.reserve(steps.size());
  for (const auto& x : steps) {
    state = lstm_cell(x, state.h, state.c, p);
    hidden.push_back(state.h);
  }
  return hidden;
}

AttentionParams make_attention(ParamSet& params, const std::string& prefix, std::size_t width, std::size_t heads) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  AttentionParams p;
  p.heads = heads;
  p.query = make_dense(params, prefix + ".query", width, width);
  p.key = make_dense(params, prefix + ".key", width, width);
  p.value = make_dense(params, prefix + ".value", width, width);
  p.out = make_dense(params, prefix + ".out", width, width);
  return p;
}

Tensor multihead_attention(const Tensor& x, std::size_t seq_len, const AttentionParams& p,
                           std::vector<double>* weights_out) {
  if (x.rank() != 2) throw DimensionError("multihead_attention: expected [L x d], got " + shape_string(x.shape()));
  if (p.heads == 0 || x.cols() % p.heads != 0) {
    throw ConfigError("multihead_attention: width " + std::to_string(x.cols()) + " is not divisible by " +
                      std::to_string(p.heads) + " heads");
  }
  if (seq_len == 0 || x.rows() % seq_len != 0) {
    throw DimensionError("multihead_attention: " + std::to_string(x.rows()) + " rows are not a multiple of " +
                         std::to_string(seq_len));
  }
  const std::size_t batch = x.rows() / seq_len;
  const Tensor attended = scaled_dot_attention(p.query(x), p.key(x), p.value(x), batch, seq_len, p.heads, weights_out);
  return p.out(attended);
}

Tensor sinusoidal_positions(std::size_t seq_len, std::size_t width) {
  std::vector<double> table(seq_len * width);
  for (std::size_t pos = 0; pos < seq_len; ++pos)
    for (std::size_t i = 0; i < width; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) / rate;
      table[pos * width + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return Tensor::from({seq_len, width}, std::move(table));
}

}  // namespace loglens
