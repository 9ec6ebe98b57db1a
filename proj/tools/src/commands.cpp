#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "loglens/detectors.hpp"
#include "loglens/errors.hpp"
#include "loglens/eval.hpp"
#include "loglens/log_ingest.hpp"
#include "loglens/sequencing.hpp"
#include "loglens/syngen.hpp"
#include "run_config.hpp"

namespace loglens::cli {

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

struct PartitionArgs {
  std::string mode = "identifier";
  std::int64_t size = 0;
  std::int64_t stride = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "identifier, fixed, or sliding")->capture_default_str();
    cmd->add_option("--size", size, "Partition size in seconds (fixed, sliding)");
    cmd->add_option("--stride", stride, "Stride in seconds (sliding)");
  }

  PartitionSpec spec() const {
    PartitionSpec s;
    s.mode = parse_partition_mode(mode);
    s.partition_size = size;
    s.stride = s.mode == PartitionMode::fixed ? size : stride;
    s.validate();
    return s;
  }
};

const NamedDetector& pick_detector(const RunConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.detectors.front();
  for (const auto& d : cfg.detectors) {
    const std::string label = d.name.empty() ? std::string(family_name(d.config.family)) : d.name;
    if (label == name) return d;
  }
  throw ConfigError("no detector named '" + name + "' in the config");
}

// Rewrites event ids of a parsed log into the model's id space, appending
// templates the model has not seen.
std::vector<EventSequence> remap(std::vector<EventSequence> seqs, const EventVocabulary& from, EventVocabulary& to) {
  std::vector<std::size_t> map(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) map[i] = to.intern(from.template_text(i));
  for (auto& s : seqs)
    for (auto& e : s.events) e = map.at(e);
  return seqs;
}

void write_verdicts(const fs::path& path, const std::vector<EventSequence>& seqs, const std::vector<Verdict>& verdicts) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    nlohmann::ordered_json j;
    j["origin"] = seqs[i].origin;
    j["anomalous"] = verdicts[i].anomalous;
    j["score"] = verdicts[i].score;
    j["position"] = verdicts[i].position ? nlohmann::ordered_json(*verdicts[i].position) : nullptr;
    out << j.dump() << '\n';
  }
}

int cmd_parse(const fs::path& input, const fs::path& format, const fs::path& out_path, fs::path rejects,
              double threshold, std::ostream& out) {
  const auto spec = FormatSpec::load(format);
  auto raw = read_raw(input, spec);
  const std::size_t rejected = raw.rejects.size();
  if (rejects.empty()) rejects = out_path.string() + ".rejects";
  auto parsed = parse_templates(std::move(raw.records), threshold);
  ensure_parent(out_path);
  write_parsed(out_path, parsed.records, parsed.vocabulary);
  write_rejects(rejects, raw.rejects);
  out << parsed.records.size() << " lines parsed into " << parsed.vocabulary.size() << " templates, " << rejected
      << " rejected\n";
  return kExitOk;
}

int cmd_partition(const fs::path& input, const PartitionArgs& args, const fs::path& out_path, std::ostream& out) {
  const auto spec = args.spec();
  const auto log = read_parsed(input);
  const auto seqs = partition(log.records, spec);
  ensure_parent(out_path);
  write_sequences(out_path, seqs);
  out << seqs.size() << " sequences\n";
  return kExitOk;
}

int cmd_syngen(const fs::path& spec_path, const fs::path& out_path, std::ostream& out) {
  const GeneratorSpec spec = spec_path.empty() ? GeneratorSpec{} : GeneratorSpec::from_json(read_file(spec_path));
  spec.validate();
  const auto log = generate(spec);
  ensure_parent(out_path);
  write_generated(log, out_path);
  std::size_t anomalies = 0;
  for (const auto& s : log.sequences) anomalies += s.label == Label::anomaly;
  out << log.sequences.size() << " sequences (" << anomalies << " anomalous), " << log.records.size() << " lines, "
      << log.vocabulary.size() << " templates\n";
  return kExitOk;
}

int cmd_train(const fs::path& config_path, const std::string& detector, const fs::path& model_out,
              std::ostream& out) {
  auto cfg = load_run_config(config_path);
  apply_seed_override(cfg);
  const auto& nd = pick_detector(cfg, detector);
  const auto data = load_dataset(cfg.dataset);
  const auto train = is_supervised(nd.config.family) ? data.sequences : strip_anomalies(data.sequences).normal;
  const auto det = train_detector(train, nd.config, data.vocabulary);
  ensure_parent(model_out);
  det.save(model_out);
  fs::create_directories(cfg.output_dir);
  write_file(cfg.output_dir / "resolved-config.json", resolved_json(cfg));
  out << family_name(nd.config.family) << " trained on " << train.size() << " sequences in "
      << det.training_seconds() << " s";
  if (!det.epoch_losses().empty()) out << ", final loss " << det.epoch_losses().back();
  out << "\n";
  return kExitOk;
}

int cmd_detect(const fs::path& model_path, const fs::path& input, const fs::path& out_path,
               std::optional<std::size_t> k, const fs::path& config_path, const std::string& detector,
               const PartitionArgs& args, std::ostream& out) {
  auto det = TrainedDetector::load(model_path);
  if (!config_path.empty()) {
    const auto cfg = load_run_config(config_path);
    const auto& nd = pick_detector(cfg, detector);
    if (nd.config.family != det.config().family) {
      throw ConfigError("model family " + std::string(family_name(det.config().family)) +
                        " does not match configured family " + std::string(family_name(nd.config.family)));
    }
  }
  if (k) det = det.with_k(*k);

  std::vector<EventSequence> seqs;
  if (input.extension() == ".csv") {
    const auto log = read_parsed(input);
    EventVocabulary vocab = det.vocabulary();
    seqs = remap(partition(log.records, args.spec()), log.vocabulary, vocab);
    if (vocab.size() != det.vocabulary().size()) det = det.with_vocabulary(vocab);
  } else {
    seqs = read_sequences(input);
  }
  const auto verdicts = detect_sequences(det, seqs);
  write_verdicts(out_path, seqs, verdicts);
  std::size_t flagged = 0;
  for (const auto& v : verdicts) flagged += v.anomalous;
  out << flagged << " of " << seqs.size() << " sequences anomalous\n";
  return kExitOk;
}

int cmd_bench(const fs::path& config_path, std::optional<std::size_t> jobs, const fs::path& output_dir,
              std::ostream& out) {
  auto cfg = load_run_config(config_path);
  apply_seed_override(cfg);
  if (jobs) {
    if (*jobs < 1) throw ConfigError("--jobs must be at least 1");
    cfg.experiment.jobs = *jobs;
  }
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  fs::create_directories(cfg.output_dir);
  // Written before any work so a failed run still shows what it tried.
  write_file(cfg.output_dir / "resolved-config.json", resolved_json(cfg));
  const auto data = load_dataset(cfg.dataset);
  const auto report = run_experiment(data, cfg.detectors, cfg.experiment);
  report.write_csv(cfg.output_dir / "report.csv", cfg.experiment.timings_in_report());
  report.write_timings(cfg.output_dir / "timings.csv");
  const auto md = report.markdown();
  write_file(cfg.output_dir / "report.md", md);
  out << md;
  return kExitOk;
}

int cmd_report(const fs::path& input, const fs::path& out_path, std::ostream& out) {
  const auto md = read_report_csv(input).markdown();
  if (!out_path.empty()) {
    ensure_parent(out_path);
    write_file(out_path, md);
  }
  out << md;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Log anomaly detection toolkit", "loglens"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "loglens 0.1.0");

  fs::path input, output, format, rejects, spec, config, model, output_dir;
  std::string detector;
  double threshold = 0.5;
  std::optional<std::size_t> k, jobs;
  PartitionArgs part;

  auto* parse = app.add_subcommand("parse", "Extract templates from a raw log into a parsed CSV");
  parse->add_option("--input", input, "Raw log file")->required();
  parse->add_option("--format", format, "Format spec JSON")->required();
  parse->add_option("--out", output, "Parsed CSV to write")->required();
  parse->add_option("--rejects", rejects, "Rejected lines (default: <out>.rejects)");
  parse->add_option("--threshold", threshold, "Template similarity threshold")->capture_default_str();

  auto* partition_cmd = app.add_subcommand("partition", "Group a parsed CSV into event sequences");
  partition_cmd->add_option("--input", input, "Parsed CSV")->required();
  partition_cmd->add_option("--out", output, "Sequences JSONL to write")->required();
  part.add_to(partition_cmd);

  auto* syngen = app.add_subcommand("syngen", "Generate a synthetic labelled log");
  syngen->add_option("--spec", spec, "Generator spec JSON (defaults when omitted)");
  syngen->add_option("--out", output, "Parsed CSV to write")->required();

  auto* train = app.add_subcommand("train", "Train one detector of a run config on its whole dataset");
  train->add_option("--config", config, "Run config JSON")->required();
  train->add_option("--model-out", model, "Model file to write")->required();
  train->add_option("--detector", detector, "Detector name (default: the first)");

  auto* detect = app.add_subcommand("detect", "Score sequences with a trained model");
  detect->add_option("--model", model, "Model file")->required();
  detect->add_option("--input", input, "Sequences JSONL, or a parsed CSV")->required();
  detect->add_option("--out", output, "Verdicts JSONL to write")->required();
  detect->add_option("--k", k, "Override the top-k cut-off");
  detect->add_option("--config", config, "Run config to check the model family against");
  detect->add_option("--detector", detector, "Detector name in --config (default: the first)");
  part.add_to(detect);

  auto* bench = app.add_subcommand("bench", "Run an experiment and write the report files");
  bench->add_option("--config", config, "Run config JSON")->required();
  bench->add_option("--jobs", jobs, "Parallel detector runs");
  bench->add_option("--output-dir", output_dir, "Override output_dir");

  auto* report = app.add_subcommand("report", "Render a report CSV as markdown tables");
  report->add_option("--input", input, "report.csv")->required();
  report->add_option("--out", output, "Markdown file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (parse->parsed()) return cmd_parse(input, format, output, rejects, threshold, out);
    if (partition_cmd->parsed()) return cmd_partition(input, part, output, out);
    if (syngen->parsed()) return cmd_syngen(spec, output, out);
    if (train->parsed()) return cmd_train(config, detector, model, out);
    if (detect->parsed()) return cmd_detect(model, input, output, k, config, detector, part, out);
    if (bench->parsed()) return cmd_bench(config, jobs, output_dir, out);
    if (report->parsed()) return cmd_report(input, output, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace loglens::cli
