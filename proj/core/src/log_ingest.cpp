#include "loglens/log_ingest.hpp"

#include <time.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "loglens/errors.hpp"

namespace loglens {

namespace {

constexpr std::string_view kWildcard = "<*>";

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::int64_t parse_timestamp(const std::string& text, const std::string& format) {
  if (format == "epoch") {
    std::int64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw FormatError("bad epoch timestamp '" + text + "'");
    return v;
  }
  std::tm tm{};
  const char* rest = ::strptime(text.c_str(), format.c_str(), &tm);
  if (rest == nullptr) throw FormatError("timestamp '" + text + "' does not match format '" + format + "'");
  // Trailing characters (sub-second fractions) are dropped.
  return static_cast<std::int64_t>(::timegm(&tm));
}

}  // namespace

std::string_view label_name(Label label) { return label == Label::anomaly ? "anomaly" : "normal"; }

std::optional<Label> parse_label(std::string_view text) {
  if (text.empty()) return std::nullopt;
  const std::string t = lower(text);
  if (t == "normal" || t == "-" || t == "0") return Label::normal;
  if (t == "anomaly" || t == "abnormal" || t == "1") return Label::anomaly;
  throw FormatError("unrecognized label '" + std::string(text) + "'");
}

EventVocabulary::EventVocabulary(std::vector<std::string> templates) {
  for (auto& t : templates) intern(t);
}

const std::string& EventVocabulary::template_text(std::size_t id) const {
  if (id >= templates_.size()) {
    throw IndexError("event id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
  }
  return templates_[id];
}

std::optional<std::size_t> EventVocabulary::find(std::string_view text) const {
  auto it = ids_.find(std::string(text));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t EventVocabulary::intern(const std::string& text) {
  auto [it, inserted] = ids_.emplace(text, templates_.size());
  if (inserted) templates_.push_back(text);
  return it->second;
}

FormatSpec FormatSpec::from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("format spec: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("format spec: expected a JSON object");
  FormatSpec spec;
  for (auto& [key, value] : j.items()) {
    try {
      if (key == "timestamp_regex") {
        spec.timestamp_regex = value.get<std::string>();
      } else if (key == "timestamp_format") {
        spec.timestamp_format = value.get<std::string>();
      } else if (key == "identifier_regex") {
        if (!value.is_null()) spec.identifier_regex = value.get<std::string>();
      } else if (key == "content_group") {
        spec.content_group = value.get<std::size_t>();
      } else {
        throw FormatError("format spec: unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::exception&) {
      throw FormatError("format spec: wrong type for '" + key + "'");
    }
  }
  if (spec.timestamp_regex.empty()) throw FormatError("format spec: missing timestamp_regex");
  if (spec.timestamp_format.empty()) throw FormatError("format spec: missing timestamp_format");
  return spec;
}

FormatSpec FormatSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read format spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string FormatSpec::to_json() const {
  nlohmann::json j{{"timestamp_regex", timestamp_regex},
                   {"timestamp_format", timestamp_format},
                   {"content_group", content_group}};
  if (identifier_regex) j["identifier_regex"] = *identifier_regex;
  return j.dump();
}

RawLog read_raw(const std::filesystem::path& path, const FormatSpec& spec) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_raw(in, spec);
}

RawLog read_raw(std::istream& in, const FormatSpec& spec) {
  std::regex line_re, id_re;
  try {
    line_re = std::regex(spec.timestamp_regex);
    if (spec.identifier_regex) id_re = std::regex(*spec.identifier_regex);
  } catch (const std::regex_error& e) {
    throw FormatError(std::string("format spec: invalid regex: ") + e.what());
  }
  if (spec.content_group == 0 || spec.content_group > line_re.mark_count()) {
    throw FormatError("format spec: content_group " + std::to_string(spec.content_group) +
                      " is not a capture group of timestamp_regex");
  }

  RawLog out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) {
      out.rejects.push_back({line_no, line, "line does not match timestamp_regex"});
      continue;
    }
    LogRecord rec;
    rec.line_no = line_no;
    try {
      rec.timestamp = parse_timestamp(m[1].str(), spec.timestamp_format);
    } catch (const FormatError& e) {
      out.rejects.push_back({line_no, line, e.what()});
      continue;
    }
    rec.content = m[spec.content_group].str();
    if (spec.identifier_regex) {
      std::smatch idm;
      if (std::regex_search(rec.content, idm, id_re)) rec.identifier = idm.size() > 1 ? idm[1].str() : idm[0].str();
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

void write_rejects(const std::filesystem::path& path, const std::vector<Reject>& rejects) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : rejects) out << r.line_no << '\t' << r.reason << '\t' << r.text << '\n';
}

ParsedLog read_parsed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_parsed(in);
}

ParsedLog read_parsed(std::istream& in) {
  ParsedLog out;
  auto header = csv::read_row(in);
  if (!header) return out;
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) header->front().erase(0, 3);

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
  auto need = [&](const char* name) {
    auto it = col.find(name);
    if (it == col.end()) throw FormatError(std::string("parsed log: missing required column '") + name + "'");
    return it->second;
  };
  const std::size_t c_line = need("LineId"), c_time = need("Timestamp"), c_id = need("Identifier"),
                    c_tmpl = need("EventTemplate"), c_label = need("Label");
  const std::optional<std::size_t> c_content =
      col.count("Content") ? std::optional<std::size_t>(col["Content"]) : std::nullopt;

  std::size_t row_no = 1;
  while (auto row = csv::read_row(in)) {
    ++row_no;
    if (row->size() == 1 && row->front().empty()) continue;
    if (row->size() != header->size()) {
      throw FormatError("parsed log: row " + std::to_string(row_no) + " has " + std::to_string(row->size()) +
                        " fields, header has " + std::to_string(header->size()));
    }
    const auto& r = *row;
    LogRecord rec;
    auto to_int = [&](const std::string& s, const char* what) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError("parsed log: row " + std::to_string(row_no) + " has non-integer " + what + " '" + s + "'");
      }
      return v;
    };
    rec.line_no = static_cast<std::size_t>(to_int(r[c_line], "LineId"));
    rec.timestamp = to_int(r[c_time], "Timestamp");
    if (!r[c_id].empty()) rec.identifier = r[c_id];
    rec.event_id = out.vocabulary.intern(r[c_tmpl]);
    rec.label = parse_label(r[c_label]);
    rec.content = c_content ? r[*c_content] : r[c_tmpl];
    out.records.push_back(std::move(rec));
  }
  return out;
}

void write_parsed(const std::filesystem::path& path, const std::vector<LogRecord>& records,
                  const EventVocabulary& vocabulary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_parsed(out, records, vocabulary);
}

void write_parsed(std::ostream& out, const std::vector<LogRecord>& records, const EventVocabulary& vocabulary) {
  csv::write_row(out, {"LineId", "Timestamp", "Identifier", "EventTemplate", "Label", "Content"});
  for (const auto& r : records) {
    if (!r.event_id) throw StateError("write_parsed: record " + std::to_string(r.line_no) + " has no event id");
    csv::write_row(out, {std::to_string(r.line_no), std::to_string(r.timestamp), r.identifier.value_or(""),
                         vocabulary.template_text(*r.event_id), r.label ? std::string(label_name(*r.label)) : "",
                         r.content});
  }
}

std::string mask_token(std::string_view token) {
  if (token == kWildcard) return std::string(token);
  // Paths and URLs.
  if (token.find('/') != std::string_view::npos || token.find('\\') != std::string_view::npos) {
    return std::string(kWildcard);
  }
  // Hex literal.
  if (token.size() > 2 && token[0] == '0' && (token[1] == 'x' || token[1] == 'X') &&
      std::all_of(token.begin() + 2, token.end(), is_hex)) {
    return std::string(kWildcard);
  }
  // Numbers, decimals, IP addresses, host:port, times: digits plus separators.
  const bool has_digit = std::any_of(token.begin(), token.end(), is_digit);
  if (has_digit && std::all_of(token.begin(), token.end(), [](char c) {
        return is_digit(c) || c == '.' || c == ':' || c == '-' || c == '+' || c == ',';
      })) {
    return std::string(kWildcard);
  }
  // Long hex strings such as hashes.
  if (token.size() >= 8 && has_digit && std::all_of(token.begin(), token.end(), is_hex)) {
    return std::string(kWildcard);
  }
  // Prefix-number identifiers: blk_789, blk_-1608999687919862906, job-42.
  std::size_t i = 0;
  while (i < token.size() && is_alpha(token[i])) ++i;
  if (i > 0 && i < token.size() && (token[i] == '_' || token[i] == '-')) {
    std::size_t j = i + 1;
    if (j < token.size() && token[j] == '-') ++j;
    if (j < token.size() && std::all_of(token.begin() + static_cast<std::ptrdiff_t>(j), token.end(), is_digit)) {
      return std::string(kWildcard);
    }
  }
  return std::string(token);
}

ParsedLog parse_templates(std::vector<LogRecord> records, double similarity_threshold) {
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw ConfigError("similarity threshold must lie in (0, 1], got " + std::to_string(similarity_threshold));
  }
  std::vector<std::vector<std::string>> clusters;
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  std::vector<std::size_t> assignment(records.size());

  for (std::size_t r = 0; r < records.size(); ++r) {
    std::vector<std::string> tokens = split_whitespace(records[r].content);
    for (auto& t : tokens) t = mask_token(t);

    std::size_t best = SIZE_MAX;
    double best_sim = -1.0;
    for (std::size_t c : by_length[tokens.size()]) {
      const auto& tmpl = clusters[c];
      std::size_t equal = 0;
      for (std::size_t i = 0; i < tokens.size(); ++i) equal += tmpl[i] == tokens[i];
      const double sim = tokens.empty() ? 1.0 : static_cast<double>(equal) / static_cast<double>(tokens.size());
      if (sim > best_sim) {
        best_sim = sim;
        best = c;
      }
    }
    if (best != SIZE_MAX && best_sim >= similarity_threshold) {
      auto& tmpl = clusters[best];
      for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tmpl[i] != tokens[i]) tmpl[i] = std::string(kWildcard);
      assignment[r] = best;
    } else {
      assignment[r] = clusters.size();
      by_length[tokens.size()].push_back(clusters.size());
      clusters.push_back(std::move(tokens));
    }
  }

  // Clusters may converge to the same text; ids follow first appearance of the final text.
  ParsedLog out;
  std::vector<std::size_t> cluster_id(clusters.size(), SIZE_MAX);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const std::size_t c = assignment[r];
    if (cluster_id[c] == SIZE_MAX) cluster_id[c] = out.vocabulary.intern(join(clusters[c]));
    records[r].event_id = cluster_id[c];
  }
  out.records = std::move(records);
  return out;
}

std::vector<std::string> tokenize_template(std::string_view text) {
  std::vector<std::string> words;
  auto flush = [&](std::string_view w) {
    if (w.empty() || std::all_of(w.begin(), w.end(), is_digit)) return;
    words.push_back(lower(w));
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    // Split the alphanumeric run at camelCase boundaries, keeping acronyms
    // together ("HTTPServer" -> http, server).
    std::size_t start = i;
    for (std::size_t k = i + 1; k < j; ++k) {
      const bool lower_to_upper = is_lower(text[k - 1]) && is_upper(text[k]);
      const bool acronym_end = is_upper(text[k - 1]) && is_upper(text[k]) && k + 1 < j && is_lower(text[k + 1]);
      if (lower_to_upper || acronym_end) {
        flush(text.substr(start, k - start));
        start = k;
      }
    }
    flush(text.substr(start, j - start));
    i = j;
  }
  return words;
}

}  // namespace loglens
