#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "loglens/detectors.hpp"
#include "loglens/eval.hpp"
#include "loglens/log_ingest.hpp"
#include "loglens/sequencing.hpp"
#include "loglens/syngen.hpp"

namespace loglens::cli {

enum class DatasetFormat { parsed, raw, sequences, syngen };

struct DatasetSection {
  std::filesystem::path path;
  DatasetFormat format = DatasetFormat::parsed;
  std::optional<FormatSpec> format_spec;  // raw
  double similarity_threshold = 0.5;      // raw
  PartitionSpec partition;
  std::optional<GeneratorSpec> generator;  // syngen
  /// Template texts, one per line, for sequence files. Without it every id
  /// gets a placeholder template "E<id>".
  std::filesystem::path vocabulary_path;
};

struct RunConfig {
  DatasetSection dataset;
  WindowSpec window;
  std::vector<NamedDetector> detectors;
  ExperimentSpec experiment;
  std::filesystem::path output_dir = "loglens-out";
  std::filesystem::path synonyms_path;  // empty: built-in table
};

/// Validates `json_text` and fills defaults. Every problem raises ConfigError
/// whose message starts with the JSON pointer of the offending value.
/// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// The configuration with every default spelled out.
std::string resolved_json(const RunConfig& config);

/// Honors LOGLENS_SEED when set to an unsigned integer.
void apply_seed_override(RunConfig& config);

/// Loads and partitions the dataset section.
Dataset load_dataset(const DatasetSection& section);

}  // namespace loglens::cli
