#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loglens/detectors.hpp"
#include "loglens/log_ingest.hpp"
#include "loglens/rng.hpp"
#include "loglens/sequencing.hpp"

namespace loglens {

// ---- splitting and contamination -------------------------------------------

struct Split {
  std::vector<EventSequence> train;
  std::vector<EventSequence> test;
};

/// Seeded shuffle at sequence level, then the first round(f*N) sequences
/// train. Throws ConfigError for N < 2 or f outside (0, 1).
Split split(const std::vector<EventSequence>& sequences, double train_fraction, std::uint64_t seed);

struct Stripped {
  std::vector<EventSequence> normal;
  std::vector<EventSequence> anomalies;
};
Stripped strip_anomalies(const std::vector<EventSequence>& sequences);

/// round(r*|normal|/(1-r)): anomalies to add so they make up share r.
std::size_t contamination_count(std::size_t normal_count, double ratio);
/// Appends contamination_count randomly chosen anomalies to `normal`.
/// Throws ConfigError when fewer anomalies are available than required.
std::vector<EventSequence> contaminate(const std::vector<EventSequence>& normal,
                                       const std::vector<EventSequence>& anomalies, double ratio,
                                       std::uint64_t seed);

// ---- noise injection --------------------------------------------------------

enum class NoiseStrategy { pseudo_event, delete_run, shuffle_run, duplicate_run };
std::string_view strategy_name(NoiseStrategy strategy);
/// Accepts pseudo_event, delete, shuffle, duplicate.
NoiseStrategy parse_strategy(std::string_view name);

/// Word pairs usable in either direction.
using SynonymTable = std::vector<std::pair<std::string, std::string>>;
/// Tab-separated pairs, one per line; '#' starts a comment line.
SynonymTable parse_synonyms(std::string_view tsv);
SynonymTable load_synonyms(const std::filesystem::path& path);
const SynonymTable& builtin_synonyms();

struct NoiseSpec {
  double ratio = 0.0;
  std::vector<NoiseStrategy> strategies{NoiseStrategy::pseudo_event, NoiseStrategy::delete_run,
                                        NoiseStrategy::shuffle_run, NoiseStrategy::duplicate_run};
  SynonymTable synonyms = builtin_synonyms();
  std::uint64_t seed = 0;
};

struct NoisyData {
  /// The originals unchanged, followed by the synthetic sequences.
  std::vector<EventSequence> sequences;
  /// Input vocabulary extended with the pseudo templates.
  EventVocabulary vocabulary;
  std::size_t injected = 0;
};

/// Appends round(ratio*N) mutated copies of randomly drawn sequences. Each
/// copy gets one strategy: a pseudo event whose template differs from the
/// original by one added word, one removed word, or one synonym; or the
/// deletion, local shuffle, or duplication of a run of 1-3 events. Copies
/// keep their source label.
NoisyData inject_noise(const std::vector<EventSequence>& sequences, const NoiseSpec& spec,
                       const EventVocabulary& vocabulary);
/// The template text a pseudo event would get; exposed for tests.
std::string perturb_template(const std::string& text, const SynonymTable& synonyms, Rng& rng);

// ---- metrics ----------------------------------------------------------------

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators give 0. Throws ConfigError on a length mismatch.
Metrics compute_metrics(const std::vector<bool>& predicted, const std::vector<Label>& labels);
Metrics compute_metrics(const std::vector<Verdict>& verdicts, const std::vector<EventSequence>& sequences);
Metrics metrics_from_counts(const ConfusionCounts& counts);

// ---- reports ----------------------------------------------------------------

struct ReportRow {
  std::string detector;
  bool semantics = false;
  std::string experiment;
  std::string setting;
  std::string run;  // run index, "best", or "mean"
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::optional<double> train_s, test_s;
  std::uint64_t seed = 0;
};

struct BenchReport {
  std::vector<ReportRow> rows;

  /// Columns detector, semantics, experiment, setting, run, precision,
  /// recall, f1, train_s, test_s, seed. With include_timings false the timing
  /// cells stay empty, so the file depends only on config and seed.
  void write_csv(std::ostream& out, bool include_timings) const;
  void write_csv(const std::filesystem::path& path, bool include_timings) const;
  /// Per-run wall-clock seconds.
  void write_timings(const std::filesystem::path& path) const;
  /// Best-run precision / recall / F1 per detector, index and semantic
  /// variants side by side, one table per experiment setting.
  std::string markdown() const;
};

BenchReport read_report_csv(const std::filesystem::path& path);

// ---- experiments ------------------------------------------------------------

enum class ExperimentKind { accuracy, contamination_sweep, noise_sweep, efficiency };
std::string_view experiment_name(ExperimentKind kind);
ExperimentKind parse_experiment(std::string_view name);

struct Dataset {
  std::vector<EventSequence> sequences;
  EventVocabulary vocabulary;
};

struct NamedDetector {
  std::string name;  // report label; the family name when empty
  DetectorConfig config;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::accuracy;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  /// Contamination or noise ratios; empty picks the defaults of the sweep.
  std::vector<double> ratios;
  std::vector<NoiseStrategy> strategies{NoiseStrategy::pseudo_event, NoiseStrategy::delete_run,
                                        NoiseStrategy::shuffle_run, NoiseStrategy::duplicate_run};
  SynonymTable synonyms = builtin_synonyms();
  /// Timing cells in report rows; defaults to on for the efficiency experiment only.
  std::optional<bool> record_timings;
  /// Parallel (detector, run) units.
  std::size_t jobs = 1;

  std::vector<double> effective_ratios() const;
  bool timings_in_report() const { return record_timings.value_or(kind == ExperimentKind::efficiency); }
};

/// Runs the protocol for every detector and repeat (run seed = seed + i) and
/// appends best and mean summary rows per (detector, setting).
BenchReport run_experiment(const Dataset& dataset, const std::vector<NamedDetector>& detectors,
                           const ExperimentSpec& spec);

}  // namespace loglens
