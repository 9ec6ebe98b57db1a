#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "loglens/log_ingest.hpp"

namespace loglens {

/// Relative weights of the three anomaly manifestations.
struct MutationMix {
  double insert = 0.6;    // an error event appears
  double swap = 0.3;      // two adjacent events trade places
  double truncate = 0.1;  // the sequence stops early

  bool operator==(const MutationMix&) const = default;
};

struct GeneratorSpec {
  std::size_t n_templates = 50;
  std::size_t n_sequences = 1000;
  double anomaly_rate = 0.05;
  std::size_t mean_length = 20;
  std::size_t automaton_branching = 3;
  std::uint64_t seed = 0;
  /// Detector window size the data is meant for: normal walks are longer
  /// than window_hint + 1, insertions and swaps land at index >= window_hint,
  /// and truncation leaves fewer than window_hint events.
  std::size_t window_hint = 10;
  MutationMix mix;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
  /// Rejects unknown keys; missing keys keep their defaults.
  static GeneratorSpec from_json(std::string_view json_text, const std::string& pointer = "");
  std::string to_json() const;
};

struct Transition {
  std::size_t from = 0;
  std::size_t to = 0;
  double probability = 0.0;
};

/// First-order automaton over template states. The last state is the error
/// template, which no normal walk visits.
struct Automaton {
  std::vector<std::string> templates;  // by state
  std::size_t start = 0;
  std::size_t error_state = 0;
  std::vector<Transition> transitions;  // sorted by (from, to)

  bool has_transition(std::size_t from, std::size_t to) const;
  /// True when the states form a walk from the start state.
  bool is_walk(const std::vector<std::size_t>& states) const;
  /// Maps event ids of `vocabulary` to states; unknown templates become SIZE_MAX.
  std::vector<std::size_t> states_of(const std::vector<std::size_t>& events, const EventVocabulary& vocabulary) const;

  std::string to_json() const;
  static Automaton from_json(std::string_view json_text);
};

enum class Mutation { none, insert, swap, truncate };
std::string_view mutation_name(Mutation mutation);

struct GeneratedSequence {
  std::string identifier;
  std::vector<std::size_t> states;
  Label label = Label::normal;
  Mutation mutation = Mutation::none;
};

struct GeneratedLog {
  /// Records in timestamp order, with identifiers, labels, and event ids of
  /// `vocabulary` (ids by first appearance, as read_parsed assigns them).
  std::vector<LogRecord> records;
  EventVocabulary vocabulary;
  Automaton automaton;
  std::vector<GeneratedSequence> sequences;
};

GeneratedLog generate(const GeneratorSpec& spec);

/// Writes the parsed-log CSV to `csv_path` and the automaton to
/// `csv_path` + ".automaton.json".
void write_generated(const GeneratedLog& log, const std::filesystem::path& csv_path);

}  // namespace loglens
