#pragma once

// Internal network definitions shared by training, inference, and
// serialization. Not installed.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "loglens/detectors.hpp"
#include "loglens/layers.hpp"
#include "loglens/semantic.hpp"

namespace loglens::detail {

/// The layers of one detector family. Construction registers every parameter
/// in `params` in a fixed order, so the same config and seed reproduce the
/// same initialization.
///
/// Inputs are flattened row-major [batch x length] ids already mapped to rows
/// of the input table.
class Network {
 public:
  Network(const DetectorConfig& config, std::size_t vocab_size, ParamSet& params);

  /// Trainable embedding [(n+1) x e] in index mode; undefined otherwise.
  const Tensor& embedding() const { return embedding_; }
  /// Per-position feature width fed to the first layer.
  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const;

  /// [batch x (n+1)] next-event logits.
  Tensor forecast_logits(const Tensor& table, std::span<const std::size_t> ids, std::size_t batch) const;
  /// [batch x (m+1)*width] autoencoder input features (no gradient). The
  /// autoencoder reads a window's inputs followed by its target.
  Tensor ae_features(const Tensor& table, std::span<const std::size_t> ids, std::size_t batch) const;
  Tensor reconstruct(const Tensor& features) const;
  /// [batch x 2] class logits. When given, `attention_out` receives the
  /// BiLSTM attention scores a_t laid out [batch][t].
  Tensor class_logits(const Tensor& table, std::span<const std::size_t> ids, std::size_t batch,
                      std::vector<double>* attention_out = nullptr) const;

  /// Training objective of the family on one batch. `targets` holds next
  /// events for forecasting and labels for supervised families; it is
  /// ignored by the autoencoder.
  Tensor loss(const Tensor& table, std::span<const std::size_t> ids, std::span<const std::size_t> targets,
              std::size_t batch) const;

 private:
  struct Block {
    AttentionParams attention;
    Tensor ln1_gain, ln1_bias;
    DenseLayer ffn1, ffn2;
    Tensor ln2_gain, ln2_bias;
  };

  std::vector<Tensor> time_major_inputs(const Tensor& table, std::span<const std::size_t> ids, std::size_t batch,
                                        std::size_t length) const;

  DetectorConfig config_;
  std::size_t vocab_size_ = 0;
  std::size_t input_width_ = 0;
  Tensor embedding_;
  // lstm_forecast
  std::vector<LstmParams> lstm_;
  // bilstm_attention
  std::vector<LstmParams> lstm_backward_;
  Tensor attention_weight_;  // [max_len x 2u]
  // transformer_forecast
  DenseLayer input_proj_;
  std::vector<Block> blocks_;
  Tensor positions_;  // [m x hidden]
  // autoencoder
  std::vector<DenseLayer> autoencoder_;
  // cnn
  std::vector<std::size_t> filter_heights_;
  std::vector<DenseLayer> filters_;
  DenseLayer output_;
};

struct Model {
  DetectorConfig config;
  std::size_t vocab_size = 0;
  EventVocabulary training_vocabulary;
  EventVocabulary vocabulary;
  ParamSet params;
  std::shared_ptr<const Network> network;
  std::optional<SemanticEncoder> encoder;
  Tensor semantic_table;
  std::optional<double> threshold;
  double training_seconds = 0.0;
  std::vector<double> epoch_losses;

  /// Registers a fresh architecture for `config` and `vocabulary`.
  static std::shared_ptr<Model> create(const DetectorConfig& config, const EventVocabulary& vocabulary);

  const Tensor& input_table() const { return config.semantics ? semantic_table : network->embedding(); }
  /// Row of the input table used for event `id`.
  std::size_t input_row(std::size_t id) const;
  /// Output class used for target event `id`.
  std::size_t target_class(std::size_t id) const { return id < vocab_size ? id : vocab_size; }
};

}  // namespace loglens::detail
