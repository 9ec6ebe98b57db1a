#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace loglens {

enum class Label { normal, anomaly };

std::string_view label_name(Label label);
/// Accepts normal/anomaly in any case, Loghub's "-" for normal, and empty for no label.
/// Throws FormatError for anything else.
std::optional<Label> parse_label(std::string_view text);

/// One log line after collection.
struct LogRecord {
  std::size_t line_no = 0;
  std::int64_t timestamp = 0;  // epoch seconds
  std::optional<std::string> identifier;
  std::string content;
  std::optional<std::size_t> event_id;
  std::optional<Label> label;

  bool operator==(const LogRecord&) const = default;
};

/// Distinct log templates with dense ids 0..n-1. Id n is reserved for events
/// that are unknown to the vocabulary.
class EventVocabulary {
 public:
  EventVocabulary() = default;
  explicit EventVocabulary(std::vector<std::string> templates);

  std::size_t size() const { return templates_.size(); }
  std::size_t unknown_id() const { return templates_.size(); }
  const std::string& template_text(std::size_t id) const;
  const std::vector<std::string>& templates() const { return templates_; }
  std::optional<std::size_t> find(std::string_view text) const;
  /// Returns the id of `text`, appending it when new.
  std::size_t intern(const std::string& text);

  bool operator==(const EventVocabulary& other) const { return templates_ == other.templates_; }

 private:
  std::vector<std::string> templates_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// How to read a raw log line.
///
/// `timestamp_regex` is matched against the whole line: capture group 1 holds
/// the timestamp text and group `content_group` the free-text message.
/// `timestamp_format` is a strptime pattern, or "epoch" for integer seconds.
/// `identifier_regex` is searched within the content; its first capture group
/// (or the whole match when it has none) becomes the identifier.
struct FormatSpec {
  std::string timestamp_regex;
  std::string timestamp_format;
  std::optional<std::string> identifier_regex;
  std::size_t content_group = 2;

  static FormatSpec from_json(std::string_view json_text);
  static FormatSpec load(const std::filesystem::path& path);
  std::string to_json() const;
};

struct Reject {
  std::size_t line_no = 0;
  std::string text;
  std::string reason;
};

struct RawLog {
  std::vector<LogRecord> records;
  std::vector<Reject> rejects;
};

/// Throws IoError when the file cannot be opened. Lines that do not match the
/// format are collected as rejects.
RawLog read_raw(const std::filesystem::path& path, const FormatSpec& spec);
RawLog read_raw(std::istream& in, const FormatSpec& spec);
/// Writes "line_no<TAB>reason<TAB>text" lines.
void write_rejects(const std::filesystem::path& path, const std::vector<Reject>& rejects);

struct ParsedLog {
  std::vector<LogRecord> records;
  EventVocabulary vocabulary;
};

/// Reads a structured CSV with columns LineId, Timestamp, Identifier,
/// EventTemplate and Label (Content optional). Throws FormatError naming a
/// missing column.
ParsedLog read_parsed(const std::filesystem::path& path);
ParsedLog read_parsed(std::istream& in);
void write_parsed(const std::filesystem::path& path, const std::vector<LogRecord>& records,
                  const EventVocabulary& vocabulary);
void write_parsed(std::ostream& out, const std::vector<LogRecord>& records, const EventVocabulary& vocabulary);

/// Replaces parameter-like tokens (numbers, hex, paths and addresses,
/// prefix-number identifiers such as blk_789) by "<*>".
std::string mask_token(std::string_view token);

/// Token-similarity template extraction. A record joins the most similar
/// template with the same token count when the fraction of equal positions
/// reaches `similarity_threshold`; differing positions become "<*>".
ParsedLog parse_templates(std::vector<LogRecord> records, double similarity_threshold = 0.5);

/// Lowercase words of a template, split on non-alphanumerics and camelCase;
/// placeholders and pure digits are dropped.
std::vector<std::string> tokenize_template(std::string_view text);

}  // namespace loglens
