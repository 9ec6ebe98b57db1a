#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loglens/log_ingest.hpp"
#include "loglens/optim.hpp"
#include "loglens/param_set.hpp"
#include "loglens/sequencing.hpp"

namespace loglens {

enum class Family { lstm_forecast, transformer_forecast, autoencoder, bilstm_attention, cnn };

std::string_view family_name(Family family);
/// Throws ConfigError for unknown names.
Family parse_family(std::string_view name);
bool is_forecasting(Family family);
bool is_supervised(Family family);

struct DetectorConfig {
  Family family = Family::lstm_forecast;
  bool semantics = false;
  std::size_t k = 10;
  WindowSpec window;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t embed_dim = 0;  // 0 picks 16 for index input, 32 for semantic input
  std::size_t max_len = 50;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double clip_norm = 0.0;
  std::uint64_t seed = 0;
  double threshold_quantile = 0.98;
  /// Share of normal training sequences held out to fit the autoencoder threshold.
  double validation_fraction = 0.1;
  /// IDF-weighted template vectors instead of the plain mean.
  bool tfidf = false;

  std::size_t effective_embed_dim() const;
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  bool operator==(const DetectorConfig&) const = default;
};

/// JSON object with every field. Parsing starts from the defaults, rejects
/// unknown keys, and reports problems as ConfigError messages prefixed by
/// `pointer` (a JSON pointer to the object).
std::string config_to_json(const DetectorConfig& config);
DetectorConfig config_from_json(std::string_view json_text, const std::string& pointer = "");

enum class VerdictLevel { window, sequence };

struct Verdict {
  VerdictLevel level = VerdictLevel::window;
  bool anomalous = false;
  double score = 0.0;
  std::optional<std::size_t> position;

  bool operator==(const Verdict&) const = default;
};

namespace detail {
struct Model;
}

/// Immutable trained model. Copies share parameters; inference is safe from
/// many threads at once.
class TrainedDetector {
 public:
  TrainedDetector() = default;

  const DetectorConfig& config() const;
  const ParamSet& params() const;
  /// Number of known events n at training time. Ids >= n are unknown.
  std::size_t vocab_size() const;
  /// Classes of the output softmax: n + 1 for forecasting (the reserved
  /// unknown id included), 2 for supervised, 0 for the autoencoder.
  std::size_t output_classes() const;
  std::optional<double> threshold() const;
  double training_seconds() const;
  const std::vector<double>& epoch_losses() const;
  /// Vocabulary currently mapped to inputs; starts as the training vocabulary.
  const EventVocabulary& vocabulary() const;
  /// Frozen semantic input table [(|vocabulary|+1) x d]; undefined in index mode.
  Tensor semantic_table() const;

  /// Same model reading events of `vocabulary`, which must extend the
  /// training vocabulary. Semantics mode embeds the new templates; index
  /// mode maps them to the unknown id. Throws ConfigError otherwise.
  TrainedDetector with_vocabulary(const EventVocabulary& vocabulary) const;
  TrainedDetector with_k(std::size_t k) const;
  TrainedDetector with_threshold(double threshold) const;

  /// Writes the parameter container to `path` and a JSON sidecar to
  /// `path` + ".json".
  void save(const std::filesystem::path& path) const;
  /// Throws IoError, FormatError, or ConfigError when the parameters do not
  /// fit the architecture described by the sidecar.
  static TrainedDetector load(const std::filesystem::path& path);

  const detail::Model& model() const;
  explicit TrainedDetector(std::shared_ptr<const detail::Model> model) : model_(std::move(model)) {}

 private:
  std::shared_ptr<const detail::Model> model_;
};

/// Next-event model over windows from normal sequences. Throws TrainingError
/// for an empty window set and ConfigError for a non-forecasting family.
TrainedDetector train_forecast(const std::vector<Window>& windows, const DetectorConfig& config,
                               const EventVocabulary& vocabulary);
/// Probability of each of the n + 1 output ids given the inputs.
std::vector<double> forecast_distribution(const TrainedDetector& det, const std::vector<std::size_t>& inputs);
/// Anomalous when more than k-1 ids are strictly more probable than the
/// target; score is the target's rank (1 = most probable).
Verdict detect_forecast(const TrainedDetector& det, const Window& window);
std::vector<Verdict> detect_forecast(const TrainedDetector& det, const std::vector<Window>& windows);

/// Fits on `windows` and sets the threshold from the errors on `validation`.
/// Each window is reconstructed as its m inputs followed by its target, so
/// every event of a sequence longer than m is covered.
/// Throws TrainingError when either set is empty.
TrainedDetector train_autoencoder(const std::vector<Window>& windows, const std::vector<Window>& validation,
                                  const DetectorConfig& config, const EventVocabulary& vocabulary);
/// Mean squared difference between a window's features and their reconstruction.
double reconstruction_error(const TrainedDetector& det, const Window& window);
std::vector<double> reconstruction_errors(const TrainedDetector& det, const std::vector<Window>& windows);
/// Anomalous when the error exceeds the threshold. Throws StateError when
/// the detector has no threshold.
Verdict detect_reconstruct(const TrainedDetector& det, const Window& window);
std::vector<Verdict> detect_reconstruct(const TrainedDetector& det, const std::vector<Window>& windows);
/// Nearest-rank quantile: the ceil(q*N)-th smallest value (the smallest for q = 0).
double nearest_rank_quantile(std::vector<double> values, double q);

/// Sequence classifier. Throws TrainingError unless both labels occur.
TrainedDetector train_supervised(const std::vector<EventSequence>& sequences, const DetectorConfig& config,
                                 const EventVocabulary& vocabulary);
/// Score is the anomaly-class probability; anomalous when greater than 0.5.
Verdict classify(const TrainedDetector& det, const EventSequence& sequence);
std::vector<Verdict> classify(const TrainedDetector& det, const std::vector<EventSequence>& sequences);

/// OR over window verdicts, max score, position of the first anomalous
/// window. No windows gives a normal verdict.
Verdict sequence_verdict(const std::vector<Verdict>& window_verdicts);

/// Trains the configured family from sequences. Forecasting families use the
/// windows of every given sequence; the autoencoder first moves a seeded
/// validation_fraction of them aside for its threshold; supervised families
/// use the labels. A given `validation` set replaces the autoencoder's own
/// hold-out.
TrainedDetector train_detector(const std::vector<EventSequence>& sequences, const DetectorConfig& config,
                               const EventVocabulary& vocabulary,
                               const std::vector<EventSequence>* validation = nullptr);

/// The autoencoder's seeded hold-out: (fit, validation), with
/// round(fraction*N) sequences, at least one, set aside. Needs N >= 2.
std::pair<std::vector<EventSequence>, std::vector<EventSequence>> holdout(
    const std::vector<EventSequence>& sequences, double fraction, std::uint64_t seed);
/// One sequence-level verdict per input, whatever the family.
std::vector<Verdict> detect_sequences(const TrainedDetector& det, const std::vector<EventSequence>& sequences);

}  // namespace loglens
