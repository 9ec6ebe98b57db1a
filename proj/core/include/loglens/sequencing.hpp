#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "loglens/log_ingest.hpp"

namespace loglens {

enum class PartitionMode { fixed, sliding, identifier };

std::string_view partition_mode_name(PartitionMode mode);
/// Throws ConfigError for unknown names.
PartitionMode parse_partition_mode(std::string_view name);

struct PartitionSpec {
  PartitionMode mode = PartitionMode::identifier;
  std::int64_t partition_size = 0;  // seconds, fixed and sliding
  std::int64_t stride = 0;          // seconds, sliding only

  /// Throws ConfigError when sizes are out of range for the mode.
  void validate() const;
};

struct EventSequence {
  std::vector<std::size_t> events;
  Label label = Label::normal;
  std::string origin;

  bool operator==(const EventSequence&) const = default;
};

/// Groups records into event sequences.
///
/// Time-based modes lay intervals [t0 + j*stride, t0 + j*stride + size) from
/// the earliest timestamp t0 (stride equals size in fixed mode) up to and
/// including the first interval that reaches past the last timestamp; empty
/// intervals are dropped and the origin is the interval index j. Identifier
/// mode emits one sequence per identifier in order of first appearance and
/// ignores records without one. Members are ordered by (timestamp, line_no).
/// Every record must carry an event id.
std::vector<EventSequence> partition(const std::vector<LogRecord>& records, const PartitionSpec& spec);

/// JSON lines, one {origin, label, events} object per sequence.
void write_sequences(const std::filesystem::path& path, const std::vector<EventSequence>& sequences);
void write_sequences(std::ostream& out, const std::vector<EventSequence>& sequences);
std::vector<EventSequence> read_sequences(const std::filesystem::path& path);
std::vector<EventSequence> read_sequences(std::istream& in);

struct WindowSpec {
  std::size_t window_size = 10;
  std::size_t step_size = 1;

  void validate() const;
  bool operator==(const WindowSpec&) const = default;
};

struct Window {
  std::vector<std::size_t> inputs;
  std::size_t target = 0;
  std::size_t position = 0;  // index of the first input event in its sequence

  bool operator==(const Window&) const = default;
};

/// Windows ending at targets t = m, m+s, m+2s, ... < length.
std::vector<Window> make_windows(const std::vector<std::size_t>& events, const WindowSpec& spec);
inline std::vector<Window> make_windows(const EventSequence& seq, const WindowSpec& spec) {
  return make_windows(seq.events, spec);
}
/// A sequence of at most m events yields no window.
inline bool is_short(const EventSequence& seq, const WindowSpec& spec) {
  return seq.events.size() <= spec.window_size;
}

/// Maps ids outside [0, vocab_size) to the reserved unknown id vocab_size.
std::vector<std::size_t> encode_indices(const std::vector<std::size_t>& events, std::size_t vocab_size);

/// Keeps the first `length` events, right-padding shorter inputs with pad_id.
std::vector<std::size_t> pad_or_truncate(const std::vector<std::size_t>& events, std::size_t length,
                                         std::size_t pad_id);

}  // namespace loglens
