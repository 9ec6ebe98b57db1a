#include "loglens/detectors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "loglens/errors.hpp"
#include "loglens/rng.hpp"
#include "models.hpp"

namespace loglens {

namespace {

constexpr std::uint64_t kShuffleStream = 100;
constexpr std::uint64_t kValidationStream = 3;
constexpr std::size_t kInferenceBatch = 256;

using detail::Model;

void require_family(const DetectorConfig& config, bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string(what) + " cannot use family " + std::string(family_name(config.family)));
}

const std::vector<std::size_t> kNoTargets;

// Minibatch training over fixed-length examples. `inputs` holds raw event
// ids, mapped to input rows here; `targets` holds one class per example (or
// is empty for the autoencoder).
void fit(Model& model, const std::vector<const std::vector<std::size_t>*>& inputs,
         const std::vector<std::size_t>& targets) {
  const auto& cfg = model.config;
  const auto start_time = std::chrono::steady_clock::now();
  const std::size_t n = inputs.size();
  Optimizer optimizer(OptimizerConfig{cfg.optimizer, cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::size_t> ids, batch_targets;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, kShuffleStream + epoch));
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t batch = std::min(cfg.batch_size, n - begin);
      ids.clear();
      batch_targets.clear();
      for (std::size_t i = begin; i < begin + batch; ++i) {
        for (auto id : *inputs[order[i]]) ids.push_back(model.input_row(id));
        if (!targets.empty()) batch_targets.push_back(targets[order[i]]);
      }
      model.params.zero_grad();
      const Tensor loss = model.network->loss(model.input_table(), ids, batch_targets, batch);
      const double value = loss.item();
      if (!std::isfinite(value)) throw TrainingError("training loss became non-finite in epoch " + std::to_string(epoch));
      loss.backward();
      optimizer.step(model.params);
      total += value * static_cast<double>(batch);
    }
    model.epoch_losses.push_back(total / static_cast<double>(n));
  }
  model.training_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
}

std::vector<std::size_t> window_rows(const Model& model, const std::vector<Window>& windows, std::size_t begin,
                                     std::size_t batch) {
  const std::size_t m = model.config.window.window_size;
  const bool with_target = model.config.family == Family::autoencoder;
  std::vector<std::size_t> ids;
  ids.reserve(batch * (m + 1));
  for (std::size_t i = begin; i < begin + batch; ++i) {
    if (windows[i].inputs.size() != m) {
      throw DimensionError("window holds " + std::to_string(windows[i].inputs.size()) + " events, model expects " +
                           std::to_string(m));
    }
    for (auto id : windows[i].inputs) ids.push_back(model.input_row(id));
    if (with_target) ids.push_back(model.input_row(windows[i].target));
  }
  return ids;
}

std::vector<std::size_t> sequence_rows(const Model& model, const std::vector<EventSequence>& seqs, std::size_t begin,
                                       std::size_t batch) {
  const std::size_t pad = model.input_row(SIZE_MAX);
  std::vector<std::size_t> ids;
  ids.reserve(batch * model.config.max_len);
  for (std::size_t i = begin; i < begin + batch; ++i) {
    std::vector<std::size_t> rows(seqs[i].events.size());
    std::transform(seqs[i].events.begin(), seqs[i].events.end(), rows.begin(),
                   [&](std::size_t id) { return model.input_row(id); });
    const auto fixed = pad_or_truncate(rows, model.config.max_len, pad);
    ids.insert(ids.end(), fixed.begin(), fixed.end());
  }
  return ids;
}

std::vector<double> row_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] - mx);
  for (auto& v : p) v /= z;
  return p;
}

Verdict forecast_verdict(const std::vector<double>& probs, std::size_t target, std::size_t k, std::size_t position) {
  const double pt = probs[target];
  const auto above = static_cast<std::size_t>(std::count_if(probs.begin(), probs.end(), [&](double p) { return p > pt; }));
  const std::size_t rank = above + 1;
  return Verdict{VerdictLevel::window, rank > k, static_cast<double>(rank), position};
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::lstm_forecast:
      return "lstm_forecast";
    case Family::transformer_forecast:
      return "transformer_forecast";
    case Family::autoencoder:
      return "autoencoder";
    case Family::bilstm_attention:
      return "bilstm_attention";
    case Family::cnn:
      return "cnn";
  }
  return "lstm_forecast";
}

Family parse_family(std::string_view name) {
  for (auto f : {Family::lstm_forecast, Family::transformer_forecast, Family::autoencoder, Family::bilstm_attention,
                 Family::cnn})
    if (family_name(f) == name) return f;
  throw ConfigError("unknown detector family '" + std::string(name) + "'");
}

bool is_forecasting(Family family) {
  return family == Family::lstm_forecast || family == Family::transformer_forecast;
}

bool is_supervised(Family family) { return family == Family::bilstm_attention || family == Family::cnn; }

std::size_t DetectorConfig::effective_embed_dim() const {
  if (embed_dim != 0) return embed_dim;
  return semantics ? 32 : 16;
}

void DetectorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (k < 1) fail("k must be at least 1");
  window.validate();
  if (hidden < 1) fail("hidden must be at least 1");
  if (layers < 1) fail("layers must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (clip_norm < 0.0) fail("clip_norm must be nonnegative");
  if (!(threshold_quantile >= 0.0 && threshold_quantile <= 1.0)) fail("threshold_quantile must lie in [0, 1]");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) fail("validation_fraction must lie in (0, 1)");
  if (family == Family::transformer_forecast && (heads < 1 || hidden % heads != 0)) {
    fail("hidden " + std::to_string(hidden) + " is not divisible by heads " + std::to_string(heads));
  }
  if (family == Family::cnn && max_len < 5) fail("cnn needs max_len of at least 5 for filter heights 3, 4, 5");
  if (family == Family::bilstm_attention && max_len < 1) fail("max_len must be at least 1");
}

const detail::Model& TrainedDetector::model() const {
  if (!model_) throw StateError("use of an untrained detector");
  return *model_;
}

const DetectorConfig& TrainedDetector::config() const { return model().config; }
const ParamSet& TrainedDetector::params() const { return model().params; }
std::size_t TrainedDetector::vocab_size() const { return model().vocab_size; }
std::optional<double> TrainedDetector::threshold() const { return model().threshold; }
double TrainedDetector::training_seconds() const { return model().training_seconds; }
const std::vector<double>& TrainedDetector::epoch_losses() const { return model().epoch_losses; }
const EventVocabulary& TrainedDetector::vocabulary() const { return model().vocabulary; }
Tensor TrainedDetector::semantic_table() const { return model().semantic_table; }

std::size_t TrainedDetector::output_classes() const {
  const auto& m = model();
  if (is_forecasting(m.config.family)) return m.vocab_size + 1;
  if (is_supervised(m.config.family)) return 2;
  return 0;
}

TrainedDetector TrainedDetector::with_vocabulary(const EventVocabulary& vocabulary) const {
  const auto& m = model();
  const auto& base = m.training_vocabulary.templates();
  if (vocabulary.size() < base.size() || !std::equal(base.begin(), base.end(), vocabulary.templates().begin())) {
    throw ConfigError("vocabulary does not extend the training vocabulary");
  }
  auto copy = std::make_shared<Model>(m);
  copy->vocabulary = vocabulary;
  if (copy->encoder) {
    *copy->encoder = copy->encoder->extended(vocabulary);
    copy->semantic_table = copy->encoder->table();
  }
  return TrainedDetector(std::move(copy));
}

TrainedDetector TrainedDetector::with_k(std::size_t k) const {
  if (k < 1) throw ConfigError("k must be at least 1");
  auto copy = std::make_shared<Model>(model());
  copy->config.k = k;
  return TrainedDetector(std::move(copy));
}

TrainedDetector TrainedDetector::with_threshold(double threshold) const {
  auto copy = std::make_shared<Model>(model());
  copy->threshold = threshold;
  return TrainedDetector(std::move(copy));
}

TrainedDetector train_forecast(const std::vector<Window>& windows, const DetectorConfig& config,
                               const EventVocabulary& vocabulary) {
  require_family(config, is_forecasting(config.family), "train_forecast");
  if (windows.empty()) throw TrainingError("train_forecast: no training windows");
  auto model = Model::create(config, vocabulary);
  std::vector<const std::vector<std::size_t>*> inputs;
  std::vector<std::size_t> targets;
  inputs.reserve(windows.size());
  targets.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.inputs.size() != config.window.window_size) throw DimensionError("training window has the wrong length");
    inputs.push_back(&w.inputs);
    targets.push_back(model->target_class(w.target));
  }
  fit(*model, inputs, targets);
  return TrainedDetector(std::move(model));
}

std::vector<double> forecast_distribution(const TrainedDetector& det, const std::vector<std::size_t>& inputs) {
  const auto& m = det.model();
  require_family(m.config, is_forecasting(m.config.family), "forecast_distribution");
  const std::vector<Window> one{Window{inputs, 0, 0}};
  NoGradGuard guard;
  const Tensor logits = m.network->forecast_logits(m.input_table(), window_rows(m, one, 0, 1), 1);
  return row_softmax(logits.data());
}

std::vector<Verdict> detect_forecast(const TrainedDetector& det, const std::vector<Window>& windows) {
  const auto& m = det.model();
  require_family(m.config, is_forecasting(m.config.family), "detect_forecast");
  NoGradGuard guard;
  std::vector<Verdict> out;
  out.reserve(windows.size());
  const std::size_t classes = m.vocab_size + 1;
  for (std::size_t begin = 0; begin < windows.size(); begin += kInferenceBatch) {
    const std::size_t batch = std::min(kInferenceBatch, windows.size() - begin);
    const Tensor logits = m.network->forecast_logits(m.input_table(), window_rows(m, windows, begin, batch), batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto probs = row_softmax(logits.data().subspan(b * classes, classes));
      const auto& w = windows[begin + b];
      out.push_back(forecast_verdict(probs, m.target_class(w.target), m.config.k, w.position));
    }
  }
  return out;
}

Verdict detect_forecast(const TrainedDetector& det, const Window& window) {
  return detect_forecast(det, std::vector<Window>{window}).front();
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()) - 1e-12));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

std::vector<double> reconstruction_errors(const TrainedDetector& det, const std::vector<Window>& windows) {
  const auto& m = det.model();
  require_family(m.config, m.config.family == Family::autoencoder, "reconstruction_error");
  NoGradGuard guard;
  std::vector<double> out;
  out.reserve(windows.size());
  for (std::size_t begin = 0; begin < windows.size(); begin += kInferenceBatch) {
    const std::size_t batch = std::min(kInferenceBatch, windows.size() - begin);
    const Tensor features = m.network->ae_features(m.input_table(), window_rows(m, windows, begin, batch), batch);
    const Tensor recon = m.network->reconstruct(features);
    const std::size_t width = features.cols();
    for (std::size_t b = 0; b < batch; ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        const double d = recon.data()[b * width + j] - features.data()[b * width + j];
        s += d * d;
      }
      out.push_back(s / static_cast<double>(width));
    }
  }
  return out;
}

double reconstruction_error(const TrainedDetector& det, const Window& window) {
  return reconstruction_errors(det, std::vector<Window>{window}).front();
}

std::vector<Verdict> detect_reconstruct(const TrainedDetector& det, const std::vector<Window>& windows) {
  const auto threshold = det.threshold();
  if (!threshold) throw StateError("autoencoder has no threshold");
  const auto errors = reconstruction_errors(det, windows);
  std::vector<Verdict> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i)
    out.push_back(Verdict{VerdictLevel::window, errors[i] > *threshold, errors[i], windows[i].position});
  return out;
}

Verdict detect_reconstruct(const TrainedDetector& det, const Window& window) {
  return detect_reconstruct(det, std::vector<Window>{window}).front();
}

TrainedDetector train_autoencoder(const std::vector<Window>& windows, const std::vector<Window>& validation,
                                  const DetectorConfig& config, const EventVocabulary& vocabulary) {
  require_family(config, config.family == Family::autoencoder, "train_autoencoder");
  if (windows.empty()) throw TrainingError("train_autoencoder: no training windows");
  if (validation.empty()) throw TrainingError("train_autoencoder: validation slice is empty");
  auto model = Model::create(config, vocabulary);
  std::vector<std::vector<std::size_t>> spans;
  spans.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.inputs.size() != config.window.window_size) throw DimensionError("training window has the wrong length");
    spans.push_back(w.inputs);
    spans.back().push_back(w.target);
  }
  std::vector<const std::vector<std::size_t>*> inputs;
  inputs.reserve(spans.size());
  for (const auto& s : spans) inputs.push_back(&s);
  fit(*model, inputs, kNoTargets);
  TrainedDetector det(model);
  model->threshold = nearest_rank_quantile(reconstruction_errors(det, validation), config.threshold_quantile);
  return det;
}

TrainedDetector train_supervised(const std::vector<EventSequence>& sequences, const DetectorConfig& config,
                                 const EventVocabulary& vocabulary) {
  require_family(config, is_supervised(config.family), "train_supervised");
  const auto anomalies = std::count_if(sequences.begin(), sequences.end(),
                                       [](const EventSequence& s) { return s.label == Label::anomaly; });
  if (anomalies == 0 || static_cast<std::size_t>(anomalies) == sequences.size()) {
    throw TrainingError("train_supervised: training data must contain both normal and anomalous sequences");
  }
  auto model = Model::create(config, vocabulary);
  // Padding is applied on raw ids: the unknown id maps to the unknown row.
  std::vector<std::vector<std::size_t>> padded;
  padded.reserve(sequences.size());
  std::vector<std::size_t> targets;
  for (const auto& s : sequences) {
    padded.push_back(pad_or_truncate(s.events, config.max_len, SIZE_MAX));
    targets.push_back(s.label == Label::anomaly ? 1 : 0);
  }
  std::vector<const std::vector<std::size_t>*> inputs;
  for (const auto& p : padded) inputs.push_back(&p);
  fit(*model, inputs, targets);
  return TrainedDetector(std::move(model));
}

std::vector<Verdict> classify(const TrainedDetector& det, const std::vector<EventSequence>& sequences) {
  const auto& m = det.model();
  require_family(m.config, is_supervised(m.config.family), "classify");
  NoGradGuard guard;
  std::vector<Verdict> out;
  out.reserve(sequences.size());
  for (std::size_t begin = 0; begin < sequences.size(); begin += kInferenceBatch) {
    const std::size_t batch = std::min(kInferenceBatch, sequences.size() - begin);
    const Tensor logits = m.network->class_logits(m.input_table(), sequence_rows(m, sequences, begin, batch), batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const double score = row_softmax(logits.data().subspan(2 * b, 2))[1];
      out.push_back(Verdict{VerdictLevel::sequence, score > 0.5, score, std::nullopt});
    }
  }
  return out;
}

Verdict classify(const TrainedDetector& det, const EventSequence& sequence) {
  return classify(det, std::vector<EventSequence>{sequence}).front();
}

Verdict sequence_verdict(const std::vector<Verdict>& window_verdicts) {
  Verdict out{VerdictLevel::sequence, false, 0.0, std::nullopt};
  for (std::size_t i = 0; i < window_verdicts.size(); ++i) {
    const auto& v = window_verdicts[i];
    out.score = i == 0 ? v.score : std::max(out.score, v.score);
    if (v.anomalous && !out.anomalous) {
      out.anomalous = true;
      out.position = v.position;
    }
  }
  return out;
}

std::pair<std::vector<EventSequence>, std::vector<EventSequence>> holdout(
    const std::vector<EventSequence>& sequences, double fraction, std::uint64_t seed) {
  if (sequences.size() < 2) throw TrainingError("hold-out needs at least two sequences");
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kValidationStream));
  rng.shuffle(order);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size()))), 1, order.size() - 1);
  // Both parts keep input order so the hold-out does not reorder training data.
  std::vector<bool> is_val(sequences.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  std::pair<std::vector<EventSequence>, std::vector<EventSequence>> out;
  for (std::size_t i = 0; i < sequences.size(); ++i) (is_val[i] ? out.second : out.first).push_back(sequences[i]);
  return out;
}

TrainedDetector train_detector(const std::vector<EventSequence>& sequences, const DetectorConfig& config,
                               const EventVocabulary& vocabulary, const std::vector<EventSequence>* validation) {
  config.validate();
  if (is_supervised(config.family)) return train_supervised(sequences, config, vocabulary);

  auto windows_of = [&](const std::vector<EventSequence>& seqs) {
    std::vector<Window> out;
    for (const auto& s : seqs) {
      auto w = make_windows(s, config.window);
      out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
    return out;
  };
  if (is_forecasting(config.family)) return train_forecast(windows_of(sequences), config, vocabulary);
  if (validation) return train_autoencoder(windows_of(sequences), windows_of(*validation), config, vocabulary);
  const auto [fit_part, val_part] = holdout(sequences, config.validation_fraction, config.seed);
  return train_autoencoder(windows_of(fit_part), windows_of(val_part), config, vocabulary);
}

std::vector<Verdict> detect_sequences(const TrainedDetector& det, const std::vector<EventSequence>& sequences) {
  const auto& cfg = det.config();
  if (is_supervised(cfg.family)) return classify(det, sequences);

  std::vector<Window> windows;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    auto w = make_windows(sequences[i], cfg.window);
    owner.insert(owner.end(), w.size(), i);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  const auto window_verdicts =
      is_forecasting(cfg.family) ? detect_forecast(det, windows) : detect_reconstruct(det, windows);
  std::vector<std::vector<Verdict>> grouped(sequences.size());
  for (std::size_t j = 0; j < windows.size(); ++j) grouped[owner[j]].push_back(window_verdicts[j]);
  std::vector<Verdict> out;
  out.reserve(sequences.size());
  for (const auto& g : grouped) out.push_back(sequence_verdict(g));
  return out;
}

}  // namespace loglens
