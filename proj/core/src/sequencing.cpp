#include "loglens/sequencing.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "loglens/errors.hpp"

namespace loglens {

std::string_view partition_mode_name(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::fixed:
      return "fixed";
    case PartitionMode::sliding:
      return "sliding";
    case PartitionMode::identifier:
      return "identifier";
  }
  return "identifier";
}

PartitionMode parse_partition_mode(std::string_view name) {
  if (name == "fixed") return PartitionMode::fixed;
  if (name == "sliding") return PartitionMode::sliding;
  if (name == "identifier") return PartitionMode::identifier;
  throw ConfigError("unknown partition mode '" + std::string(name) + "'");
}

void PartitionSpec::validate() const {
  if (mode == PartitionMode::identifier) return;
  if (partition_size <= 0) throw ConfigError("partition_size must be positive");
  if (mode == PartitionMode::sliding && (stride <= 0 || stride > partition_size)) {
    throw ConfigError("sliding stride must lie in (0, partition_size], got " + std::to_string(stride));
  }
}

void WindowSpec::validate() const {
  if (window_size < 1) throw ConfigError("window_size must be at least 1");
  if (step_size < 1) throw ConfigError("step_size must be at least 1");
}

namespace {

std::size_t event_of(const LogRecord& r) {
  if (!r.event_id) throw StateError("record at line " + std::to_string(r.line_no) + " has no event id");
  return *r.event_id;
}

bool chronological(const LogRecord* a, const LogRecord* b) {
  if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
  return a->line_no < b->line_no;
}

std::vector<EventSequence> partition_by_identifier(const std::vector<LogRecord>& records) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<const LogRecord*>> groups;
  std::vector<std::string> origins;
  for (const auto& r : records) {
    if (!r.identifier) continue;
    auto [it, inserted] = index.emplace(*r.identifier, groups.size());
    if (inserted) {
      groups.emplace_back();
      origins.push_back(*r.identifier);
    }
    groups[it->second].push_back(&r);
  }
  if (groups.empty()) throw ConfigError("identifier partitioning: no record carries an identifier");

  std::vector<EventSequence> out;
  out.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& members = groups[g];
    std::stable_sort(members.begin(), members.end(), chronological);
    EventSequence seq;
    seq.origin = origins[g];
    seq.events.reserve(members.size());
    for (const auto* r : members) {
      seq.events.push_back(event_of(*r));
      if (r->label == Label::anomaly) seq.label = Label::anomaly;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<EventSequence> partition_by_time(const std::vector<LogRecord>& records, std::int64_t size,
                                             std::int64_t stride) {
  std::vector<const LogRecord*> sorted(records.size());
  std::transform(records.begin(), records.end(), sorted.begin(), [](const LogRecord& r) { return &r; });
  std::sort(sorted.begin(), sorted.end(), chronological);

  std::vector<EventSequence> out;
  if (sorted.empty()) return out;
  const std::int64_t t0 = sorted.front()->timestamp;
  const std::int64_t last = sorted.back()->timestamp;

  std::size_t lo = 0;
  for (std::int64_t j = 0;; ++j) {
    const std::int64_t start = t0 + j * stride;
    const std::int64_t end = start + size;
    while (lo < sorted.size() && sorted[lo]->timestamp < start) ++lo;
    EventSequence seq;
    for (std::size_t i = lo; i < sorted.size() && sorted[i]->timestamp < end; ++i) {
      seq.events.push_back(event_of(*sorted[i]));
      if (sorted[i]->label == Label::anomaly) seq.label = Label::anomaly;
    }
    if (!seq.events.empty()) {
      seq.origin = std::to_string(j);
      out.push_back(std::move(seq));
    }
    if (end > last) break;
  }
  return out;
}

}  // namespace

std::vector<EventSequence> partition(const std::vector<LogRecord>& records, const PartitionSpec& spec) {
  spec.validate();
  switch (spec.mode) {
    case PartitionMode::identifier:
      return partition_by_identifier(records);
    case PartitionMode::fixed:
      return partition_by_time(records, spec.partition_size, spec.partition_size);
    case PartitionMode::sliding:
      return partition_by_time(records, spec.partition_size, spec.stride);
  }
  return {};
}

void write_sequences(const std::filesystem::path& path, const std::vector<EventSequence>& sequences) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_sequences(out, sequences);
}

void write_sequences(std::ostream& out, const std::vector<EventSequence>& sequences) {
  for (const auto& s : sequences) {
    nlohmann::ordered_json j;
    j["origin"] = s.origin;
    j["label"] = std::string(label_name(s.label));
    j["events"] = s.events;
    out << j.dump() << '\n';
  }
}

std::vector<EventSequence> read_sequences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_sequences(in);
}

std::vector<EventSequence> read_sequences(std::istream& in) {
  std::vector<EventSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EventSequence s;
      s.origin = j.at("origin").get<std::string>();
      s.label = parse_label(j.at("label").get<std::string>()).value_or(Label::normal);
      s.events = j.at("events").get<std::vector<std::size_t>>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("sequence file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Window> make_windows(const std::vector<std::size_t>& events, const WindowSpec& spec) {
  spec.validate();
  const std::size_t m = spec.window_size;
  std::vector<Window> out;
  if (events.size() <= m) return out;
  out.reserve((events.size() - m + spec.step_size - 1) / spec.step_size);
  for (std::size_t t = m; t < events.size(); t += spec.step_size) {
    Window w;
    w.inputs.assign(events.begin() + static_cast<std::ptrdiff_t>(t - m), events.begin() + static_cast<std::ptrdiff_t>(t));
    w.target = events[t];
    w.position = t - m;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::size_t> encode_indices(const std::vector<std::size_t>& events, std::size_t vocab_size) {
  std::vector<std::size_t> out(events);
  for (auto& e : out) e = std::min(e, vocab_size);
  return out;
}

std::vector<std::size_t> pad_or_truncate(const std::vector<std::size_t>& events, std::size_t length,
                                         std::size_t pad_id) {
  if (length < 1) throw ConfigError("pad_or_truncate: target length must be at least 1");
  std::vector<std::size_t> out(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(std::min(length, events.size())));
  out.resize(length, pad_id);
  return out;
}

}  // namespace loglens
