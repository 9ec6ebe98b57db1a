#include "models.hpp"

#include <algorithm>

#include "loglens/errors.hpp"
#include "loglens/rng.hpp"

namespace loglens::detail {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSemanticStream = 2;

std::vector<std::size_t> column(std::span<const std::size_t> ids, std::size_t batch, std::size_t length,
                                std::size_t t) {
  std::vector<std::size_t> out(batch);
  for (std::size_t b = 0; b < batch; ++b) out[b] = ids[b * length + t];
  return out;
}

}  // namespace

Network::Network(const DetectorConfig& config, std::size_t vocab_size, ParamSet& params)
    : config_(config), vocab_size_(vocab_size) {
  const std::size_t classes = vocab_size + 1;
  const std::size_t u = config.hidden;
  const bool needs_embedding = !config.semantics && config.family != Family::autoencoder;
  if (config.semantics) {
    input_width_ = config.effective_embed_dim();
  } else if (config.family == Family::autoencoder) {
    input_width_ = classes;  // one-hot positions
  } else {
    input_width_ = config.effective_embed_dim();
  }
  if (needs_embedding) embedding_ = params.add_uniform("embedding", {classes, input_width_}, 1);

  switch (config.family) {
    case Family::lstm_forecast:
      for (std::size_t l = 0; l < config.layers; ++l)
        lstm_.push_back(make_lstm(params, "lstm" + std::to_string(l), l == 0 ? input_width_ : u, u));
      output_ = make_dense(params, "output", u, classes);
      break;
    case Family::transformer_forecast: {
      input_proj_ = make_dense(params, "input", input_width_, u);
      for (std::size_t l = 0; l < config.layers; ++l) {
        const std::string p = "block" + std::to_string(l);
        Block b;
        b.attention = make_attention(params, p + ".attention", u, config.heads);
        b.ln1_gain = params.add_constant(p + ".norm1.gain", {u}, 1.0);
        b.ln1_bias = params.add_constant(p + ".norm1.bias", {u}, 0.0);
        b.ffn1 = make_dense(params, p + ".ffn1", u, 2 * u);
        b.ffn2 = make_dense(params, p + ".ffn2", 2 * u, u);
        b.ln2_gain = params.add_constant(p + ".norm2.gain", {u}, 1.0);
        b.ln2_bias = params.add_constant(p + ".norm2.bias", {u}, 0.0);
        blocks_.push_back(std::move(b));
      }
      positions_ = sinusoidal_positions(config.window.window_size, u);
      output_ = make_dense(params, "output", u, classes);
      break;
    }
    case Family::autoencoder: {
      const std::size_t in = (config.window.window_size + 1) * input_width_;
      const std::size_t bottleneck = std::max<std::size_t>(1, u / 4);
      autoencoder_.push_back(make_dense(params, "encoder1", in, u));
      autoencoder_.push_back(make_dense(params, "encoder2", u, bottleneck));
      autoencoder_.push_back(make_dense(params, "decoder1", bottleneck, u));
      autoencoder_.push_back(make_dense(params, "decoder2", u, in));
      break;
    }
    case Family::bilstm_attention:
      for (std::size_t l = 0; l < config.layers; ++l) {
        const std::size_t in = l == 0 ? input_width_ : 2 * u;
        lstm_.push_back(make_lstm(params, "forward" + std::to_string(l), in, u));
        lstm_backward_.push_back(make_lstm(params, "backward" + std::to_string(l), in, u));
      }
      attention_weight_ = params.add_uniform("attention.weight", {config.max_len, 2 * u}, 2 * u);
      output_ = make_dense(params, "output", 2 * u, 2);
      break;
    case Family::cnn:
      filter_heights_ = {3, 4, 5};
      for (auto h : filter_heights_)
        filters_.push_back(make_dense(params, "conv" + std::to_string(h), h * input_width_, u));
      output_ = make_dense(params, "output", filter_heights_.size() * u, 2);
      break;
  }
}

std::size_t Network::output_width() const {
  if (is_forecasting(config_.family)) return vocab_size_ + 1;
  if (is_supervised(config_.family)) return 2;
  return (config_.window.window_size + 1) * input_width_;
}

std::vector<Tensor> Network::time_major_inputs(const Tensor& table, std::span<const std::size_t> ids,
                                               std::size_t batch, std::size_t length) const {
  std::vector<Tensor> steps;
  steps.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    const auto col = column(ids, batch, length, t);
    steps.push_back(embedding_lookup(table, col));
  }
  return steps;
}

Tensor Network::forecast_logits(const Tensor& table, std::span<const std::size_t> ids, std::size_t batch) const {
  const std::size_t m = config_.window.window_size;
  if (ids.size() != batch * m) throw DimensionError("forecast input does not hold batch x window ids");
  if (config_.family == Family::lstm_forecast) {
    std::vector<Tensor> steps = time_major_inputs(table, ids, batch, m);
    for (const auto& layer : lstm_) steps = lstm_unroll(steps, layer);
    return output_(steps.back());
  }
  if (config_.family != Family::transformer_forecast) throw ConfigError("not a forecasting network");

  const std::size_t u = config_.hidden;
  std::vector<double> tiled(batch * m * u);
  for (std::size_t b = 0; b < batch; ++b)
    std::copy(positions_.data().begin(), positions_.data().end(), tiled.begin() + static_cast<std::ptrdiff_t>(b * m * u));
  Tensor x = add(input_proj_(embedding_lookup(table, ids)), Tensor::from({batch * m, u}, std::move(tiled)));
  for (const auto& blk : blocks_) {
    x = layer_norm(add(x, multihead_attention(x, m, blk.attention)), blk.ln1_gain, blk.ln1_bias);
    x = layer_norm(add(x, blk.ffn2(relu(blk.ffn1(x)))), blk.ln2_gain, blk.ln2_bias);
  }
  std::vector<std::size_t> last(batch);
  for (std::size_t b = 0; b < batch; ++b) last[b] = b * m + m - 1;
  return output_(embedding_lookup(x, last));
}

Tensor Network::ae_features(const Tensor& table, std::span<const std::size_t> ids, std::size_t batch) const {
  const std::size_t m = config_.window.window_size + 1;
  if (ids.size() != batch * m) throw DimensionError("autoencoder input does not hold batch x (window + 1) ids");
  NoGradGuard guard;
  if (config_.semantics) return reshape(embedding_lookup(table, ids), {batch, m * input_width_});
  std::vector<double> onehot(batch * m * input_width_, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= input_width_) throw IndexError("event id outside the one-hot width");
    onehot[i * input_width_ + ids[i]] = 1.0;
  }
  return Tensor::from({batch, m * input_width_}, std::move(onehot));
}

Tensor Network::reconstruct(const Tensor& features) const {
  if (config_.family != Family::autoencoder) throw ConfigError("not an autoencoder network");
  Tensor x = features;
  for (std::size_t i = 0; i < autoencoder_.size(); ++i) {
    x = autoencoder_[i](x);
    if (i + 1 < autoencoder_.size()) x = tanh(x);
  }
  return x;
}

Tensor Network::class_logits(const Tensor& table, std::span<const std::size_t> ids, std::size_t batch,
                             std::vector<double>* attention_out) const {
  const std::size_t L = config_.max_len;
  if (ids.size() != batch * L) throw DimensionError("classifier input does not hold batch x max_len ids");

  if (config_.family == Family::bilstm_attention) {
    const std::size_t u2 = 2 * config_.hidden;
    std::vector<Tensor> steps = time_major_inputs(table, ids, batch, L);
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
      const std::vector<Tensor> fwd = lstm_unroll(steps, lstm_[l]);
      std::vector<Tensor> reversed(steps.rbegin(), steps.rend());
      const std::vector<Tensor> bwd = lstm_unroll(reversed, lstm_backward_[l]);
      for (std::size_t t = 0; t < L; ++t) {
        const Tensor parts[] = {fwd[t], bwd[L - 1 - t]};
        steps[t] = concat_cols(parts);
      }
    }
    // a_t = tanh(h_t . w_t) with one weight vector per position; the
    // representation is sum_t a_t h_t.
    if (attention_out) attention_out->assign(batch * L, 0.0);
    Tensor pooled;
    for (std::size_t t = 0; t < L; ++t) {
      const Tensor w = reshape(slice_rows(attention_weight_, t, 1), {u2, 1});
      const Tensor a = tanh(matmul(steps[t], w));
      if (attention_out)
        for (std::size_t b = 0; b < batch; ++b) (*attention_out)[b * L + t] = a.data()[b];
      const Tensor term = mul_rows(a, steps[t]);
      pooled = pooled.defined() ? add(pooled, term) : term;
    }
    return output_(pooled);
  }
  if (config_.family != Family::cnn) throw ConfigError("not a supervised network");

  const Tensor x = embedding_lookup(table, ids);
  std::vector<Tensor> pooled;
  for (std::size_t f = 0; f < filters_.size(); ++f) {
    const std::size_t h = filter_heights_[f];
    const Tensor maps = relu(filters_[f](unfold_rows(x, L, h)));
    pooled.push_back(segment_max(maps, L - h + 1));
  }
  return output_(concat_cols(pooled));
}

Tensor Network::loss(const Tensor& table, std::span<const std::size_t> ids, std::span<const std::size_t> targets,
                     std::size_t batch) const {
  if (is_forecasting(config_.family)) return cross_entropy(forecast_logits(table, ids, batch), targets);
  if (is_supervised(config_.family)) return cross_entropy(class_logits(table, ids, batch), targets);
  const Tensor features = ae_features(table, ids, batch);
  return mse(reconstruct(features), features);
}

std::shared_ptr<Model> Model::create(const DetectorConfig& config, const EventVocabulary& vocabulary) {
  config.validate();
  auto model = std::make_shared<Model>();
  model->config = config;
  model->vocab_size = vocabulary.size();
  model->training_vocabulary = vocabulary;
  model->vocabulary = vocabulary;
  model->params = ParamSet(derive_seed(config.seed, kInitStream));
  model->network = std::make_shared<Network>(config, vocabulary.size(), model->params);
  if (config.semantics) {
    model->encoder = SemanticEncoder::build(vocabulary, config.effective_embed_dim(),
                                            derive_seed(config.seed, kSemanticStream), config.tfidf);
    model->semantic_table = model->encoder->table();
  }
  return model;
}

std::size_t Model::input_row(std::size_t id) const {
  if (config.semantics) return id < vocabulary.size() ? id : vocabulary.size();
  return id < vocab_size ? id : vocab_size;
}

}  // namespace loglens::detail
