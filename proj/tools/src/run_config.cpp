#include "run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "loglens/errors.hpp"

namespace loglens::cli {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
  throw ConfigError((pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

void only_keys(const json& obj, const std::string& pointer, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(pointer, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) fail(pointer + "/" + it.key(), "unknown key");
  }
}

std::string get_string(const json& v, const std::string& p) {
  if (!v.is_string()) fail(p, "expected a string");
  return v.get<std::string>();
}

double get_number(const json& v, const std::string& p) {
  if (!v.is_number()) fail(p, "expected a number");
  return v.get<double>();
}

std::uint64_t get_count(const json& v, const std::string& p) {
  if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))) {
    fail(p, "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const json& v, const std::string& p) {
  if (!v.is_boolean()) fail(p, "expected a boolean");
  return v.get<bool>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// Runs `f`, re-raising a bare ConfigError with `pointer` in front.
template <typename F>
auto at_pointer(const std::string& pointer, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(pointer, 0) == 0) throw;
    fail(pointer, what);
  } catch (const FormatError& e) {
    fail(pointer, e.what());
  }
}

const char* format_name(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::parsed:
      return "parsed";
    case DatasetFormat::raw:
      return "raw";
    case DatasetFormat::sequences:
      return "sequences";
    case DatasetFormat::syngen:
      return "syngen";
  }
  return "parsed";
}

PartitionSpec parse_partition(const json& j, const std::string& p) {
  only_keys(j, p, {"mode", "partition_size", "stride"});
  PartitionSpec spec;
  if (j.contains("mode")) {
    spec.mode = at_pointer(p + "/mode", [&] { return parse_partition_mode(get_string(j["mode"], p + "/mode")); });
  }
  if (j.contains("partition_size")) {
    spec.partition_size = static_cast<std::int64_t>(get_count(j["partition_size"], p + "/partition_size"));
  }
  if (j.contains("stride")) spec.stride = static_cast<std::int64_t>(get_count(j["stride"], p + "/stride"));
  if (spec.mode == PartitionMode::fixed) spec.stride = spec.partition_size;
  at_pointer(p, [&] {
    spec.validate();
    return 0;
  });
  return spec;
}

DatasetSection parse_dataset(const json& j, const std::filesystem::path& base) {
  const std::string p = "/dataset";
  only_keys(j, p,
            {"path", "format", "format_spec", "similarity_threshold", "partition", "generator", "vocabulary"});
  DatasetSection d;
  if (j.contains("format")) {
    const auto name = get_string(j["format"], p + "/format");
    if (name == "parsed") {
      d.format = DatasetFormat::parsed;
    } else if (name == "raw") {
      d.format = DatasetFormat::raw;
    } else if (name == "sequences") {
      d.format = DatasetFormat::sequences;
    } else if (name == "syngen") {
      d.format = DatasetFormat::syngen;
    } else {
      fail(p + "/format", "expected one of parsed, raw, sequences, syngen");
    }
  }
  if (d.format == DatasetFormat::syngen) {
    if (j.contains("path")) fail(p + "/path", "not used by the syngen format");
  } else {
    if (!j.contains("path")) fail(p + "/path", std::string("required for format ") + format_name(d.format));
    d.path = resolve(base, get_string(j["path"], p + "/path"));
  }
  if (j.contains("format_spec")) {
    if (d.format != DatasetFormat::raw) fail(p + "/format_spec", "only used by the raw format");
    const auto& fs = j["format_spec"];
    d.format_spec = at_pointer(p + "/format_spec", [&] {
      return fs.is_string() ? FormatSpec::load(resolve(base, fs.get<std::string>())) : FormatSpec::from_json(fs.dump());
    });
  } else if (d.format == DatasetFormat::raw) {
    fail(p + "/format_spec", "required for the raw format");
  }
  if (j.contains("similarity_threshold")) {
    d.similarity_threshold = get_number(j["similarity_threshold"], p + "/similarity_threshold");
    if (!(d.similarity_threshold > 0.0 && d.similarity_threshold <= 1.0)) {
      fail(p + "/similarity_threshold", "must lie in (0, 1]");
    }
  }
  if (j.contains("partition")) d.partition = parse_partition(j["partition"], p + "/partition");
  if (j.contains("generator")) {
    if (d.format != DatasetFormat::syngen) fail(p + "/generator", "only used by the syngen format");
    d.generator = GeneratorSpec::from_json(j["generator"].dump(), p + "/generator");
  } else if (d.format == DatasetFormat::syngen) {
    d.generator = GeneratorSpec{};
  }
  if (j.contains("vocabulary")) {
    if (d.format != DatasetFormat::sequences) fail(p + "/vocabulary", "only used by the sequences format");
    d.vocabulary_path = resolve(base, get_string(j["vocabulary"], p + "/vocabulary"));
  }
  return d;
}

WindowSpec parse_window(const json& j, const std::string& p) {
  only_keys(j, p, {"window_size", "step_size"});
  WindowSpec w;
  if (j.contains("window_size")) w.window_size = get_count(j["window_size"], p + "/window_size");
  if (j.contains("step_size")) w.step_size = get_count(j["step_size"], p + "/step_size");
  at_pointer(p, [&] {
    w.validate();
    return 0;
  });
  return w;
}

NamedDetector parse_detector(json j, const std::string& p, const WindowSpec& window, std::uint64_t seed) {
  if (!j.is_object()) fail(p, "expected an object");
  NamedDetector d;
  if (j.contains("name")) {
    d.name = get_string(j["name"], p + "/name");
    j.erase("name");
  }
  if (!j.contains("family")) fail(p + "/family", "required");
  if (!j.contains("window_size")) j["window_size"] = window.window_size;
  if (!j.contains("step_size")) j["step_size"] = window.step_size;
  if (!j.contains("seed")) j["seed"] = seed;
  d.config = config_from_json(j.dump(), p);
  at_pointer(p, [&] {
    d.config.validate();
    return 0;
  });
  return d;
}

void parse_experiment_object(const json& j, const std::string& p, const std::filesystem::path& base,
                             RunConfig& cfg) {
  auto& e = cfg.experiment;
  if (j.is_string()) {
    e.kind = at_pointer(p, [&] { return parse_experiment(j.get<std::string>()); });
    return;
  }
  only_keys(j, p, {"kind", "ratios", "strategies", "synonyms", "train_fraction", "record_timings"});
  if (!j.contains("kind")) fail(p + "/kind", "required");
  e.kind = at_pointer(p + "/kind", [&] { return parse_experiment(get_string(j["kind"], p + "/kind")); });
  if (j.contains("ratios")) {
    const auto& r = j["ratios"];
    if (!r.is_array() || r.empty()) fail(p + "/ratios", "expected a non-empty array of numbers");
    e.ratios.clear();
    for (std::size_t i = 0; i < r.size(); ++i) {
      const std::string rp = p + "/ratios/" + std::to_string(i);
      const double v = get_number(r[i], rp);
      if (e.kind == ExperimentKind::contamination_sweep && !(v >= 0.0 && v < 1.0)) fail(rp, "must lie in [0, 1)");
      if (!(v >= 0.0)) fail(rp, "must be nonnegative");
      e.ratios.push_back(v);
    }
    if (e.kind == ExperimentKind::accuracy || e.kind == ExperimentKind::efficiency) {
      fail(p + "/ratios", "only used by the sweep experiments");
    }
  }
  if (j.contains("strategies")) {
    const auto& s = j["strategies"];
    if (!s.is_array() || s.empty()) fail(p + "/strategies", "expected a non-empty array of names");
    e.strategies.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string sp = p + "/strategies/" + std::to_string(i);
      e.strategies.push_back(at_pointer(sp, [&] { return parse_strategy(get_string(s[i], sp)); }));
    }
  }
  if (j.contains("synonyms")) {
    cfg.synonyms_path = resolve(base, get_string(j["synonyms"], p + "/synonyms"));
    e.synonyms = at_pointer(p + "/synonyms", [&] { return load_synonyms(cfg.synonyms_path); });
  }
  if (j.contains("train_fraction")) {
    e.train_fraction = get_number(j["train_fraction"], p + "/train_fraction");
    if (!(e.train_fraction > 0.0 && e.train_fraction < 1.0)) fail(p + "/train_fraction", "must lie in (0, 1)");
  }
  if (j.contains("record_timings")) e.record_timings = get_bool(j["record_timings"], p + "/record_timings");
}

json partition_json(const PartitionSpec& s) {
  json j;
  j["mode"] = partition_mode_name(s.mode);
  if (s.mode != PartitionMode::identifier) j["partition_size"] = s.partition_size;
  if (s.mode == PartitionMode::sliding) j["stride"] = s.stride;
  return j;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("/: invalid JSON: ") + e.what());
  }
  only_keys(doc, "", {"dataset", "window", "detectors", "experiment", "repeats", "seed", "output_dir", "jobs"});
  RunConfig cfg;
  if (!doc.contains("dataset")) fail("/dataset", "required");
  cfg.dataset = parse_dataset(doc["dataset"], base_dir);
  if (doc.contains("window")) cfg.window = parse_window(doc["window"], "/window");
  if (doc.contains("seed")) cfg.experiment.seed = get_count(doc["seed"], "/seed");
  if (doc.contains("repeats")) {
    cfg.experiment.repeats = get_count(doc["repeats"], "/repeats");
    if (cfg.experiment.repeats < 1) fail("/repeats", "must be at least 1");
  }
  if (doc.contains("jobs")) {
    cfg.experiment.jobs = get_count(doc["jobs"], "/jobs");
    if (cfg.experiment.jobs < 1) fail("/jobs", "must be at least 1");
  }
  if (doc.contains("experiment")) parse_experiment_object(doc["experiment"], "/experiment", base_dir, cfg);
  if (!doc.contains("detectors")) fail("/detectors", "required");
  const auto& dets = doc["detectors"];
  if (!dets.is_array() || dets.empty()) fail("/detectors", "expected a non-empty array");
  for (std::size_t i = 0; i < dets.size(); ++i) {
    cfg.detectors.push_back(
        parse_detector(dets[i], "/detectors/" + std::to_string(i), cfg.window, cfg.experiment.seed));
  }
  if (doc.contains("output_dir")) cfg.output_dir = resolve(base_dir, get_string(doc["output_dir"], "/output_dir"));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string resolved_json(const RunConfig& cfg) {
  json doc;
  const auto& d = cfg.dataset;
  json ds;
  ds["format"] = format_name(d.format);
  if (d.format != DatasetFormat::syngen) ds["path"] = d.path.string();
  if (d.format_spec) ds["format_spec"] = json::parse(d.format_spec->to_json());
  if (d.format == DatasetFormat::raw) ds["similarity_threshold"] = d.similarity_threshold;
  ds["partition"] = partition_json(d.partition);
  if (d.generator) ds["generator"] = json::parse(d.generator->to_json());
  if (!d.vocabulary_path.empty()) ds["vocabulary"] = d.vocabulary_path.string();
  doc["dataset"] = ds;
  doc["window"] = {{"window_size", cfg.window.window_size}, {"step_size", cfg.window.step_size}};
  json dets = json::array();
  for (const auto& nd : cfg.detectors) {
    json one;
    one["name"] = nd.name.empty() ? std::string(family_name(nd.config.family)) : nd.name;
    const json fields = json::parse(config_to_json(nd.config));
    for (const auto& [k, v] : fields.items()) one[k] = v;
    dets.push_back(one);
  }
  doc["detectors"] = dets;
  const auto& e = cfg.experiment;
  json ex;
  ex["kind"] = experiment_name(e.kind);
  if (e.kind == ExperimentKind::contamination_sweep || e.kind == ExperimentKind::noise_sweep) {
    ex["ratios"] = e.effective_ratios();
  }
  if (e.kind == ExperimentKind::noise_sweep) {
    json st = json::array();
    for (auto s : e.strategies) st.push_back(strategy_name(s));
    ex["strategies"] = st;
    if (!cfg.synonyms_path.empty()) ex["synonyms"] = cfg.synonyms_path.string();
  }
  ex["train_fraction"] = e.train_fraction;
  ex["record_timings"] = e.timings_in_report();
  doc["experiment"] = ex;
  doc["repeats"] = e.repeats;
  doc["seed"] = e.seed;
  doc["jobs"] = e.jobs;
  doc["output_dir"] = cfg.output_dir.string();
  return doc.dump(2) + "\n";
}

void apply_seed_override(RunConfig& cfg) {
  const char* env = std::getenv("LOGLENS_SEED");
  if (!env || !*env) return;
  const std::string_view text(env);
  std::uint64_t seed = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("LOGLENS_SEED must be an unsigned integer, got '" + std::string(text) + "'");
  }
  cfg.experiment.seed = seed;
  for (auto& d : cfg.detectors) d.config.seed = seed;
}

Dataset load_dataset(const DatasetSection& section) {
  Dataset out;
  switch (section.format) {
    case DatasetFormat::parsed: {
      auto log = read_parsed(section.path);
      out.sequences = partition(log.records, section.partition);
      out.vocabulary = std::move(log.vocabulary);
      break;
    }
    case DatasetFormat::raw: {
      auto raw = read_raw(section.path, *section.format_spec);
      auto log = parse_templates(std::move(raw.records), section.similarity_threshold);
      out.sequences = partition(log.records, section.partition);
      out.vocabulary = std::move(log.vocabulary);
      break;
    }
    case DatasetFormat::sequences: {
      out.sequences = read_sequences(section.path);
      if (!section.vocabulary_path.empty()) {
        std::ifstream in(section.vocabulary_path);
        if (!in) throw IoError("cannot read vocabulary " + section.vocabulary_path.string());
        for (std::string line; std::getline(in, line);) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          out.vocabulary.intern(line);
        }
      } else {
        std::size_t n = 0;
        for (const auto& s : out.sequences)
          for (auto e : s.events) n = std::max(n, e + 1);
        for (std::size_t i = 0; i < n; ++i) out.vocabulary.intern("E" + std::to_string(i));
      }
      break;
    }
    case DatasetFormat::syngen: {
      auto log = generate(section.generator.value_or(GeneratorSpec{}));
      out.sequences = partition(log.records, section.partition);
      out.vocabulary = std::move(log.vocabulary);
      break;
    }
  }
  return out;
}

}  // namespace loglens::cli
