#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "csv.hpp"
#include "loglens/errors.hpp"
#include "loglens/eval.hpp"

namespace loglens {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? fixed(*v, 3) : ""; }

const char* const kColumns[] = {"detector", "semantics", "experiment", "setting", "run", "precision",
                                "recall",   "f1",        "train_s",    "test_s",  "seed"};

}  // namespace

void BenchReport::write_csv(std::ostream& out, bool include_timings) const {
  csv::write_row(out, std::vector<std::string>(std::begin(kColumns), std::end(kColumns)));
  for (const auto& r : rows) {
    csv::write_row(out, {r.detector, r.semantics ? "true" : "false", r.experiment, r.setting, r.run,
                         fixed(r.precision, 6), fixed(r.recall, 6), fixed(r.f1, 6),
                         include_timings ? cell(r.train_s) : "", include_timings ? cell(r.test_s) : "",
                         std::to_string(r.seed)});
  }
}

void BenchReport::write_csv(const std::filesystem::path& path, bool include_timings) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_csv(out, include_timings);
}

void BenchReport::write_timings(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, {"detector", "semantics", "experiment", "setting", "run", "train_s", "test_s"});
  for (const auto& r : rows) {
    if (r.run == "best" || r.run == "mean") continue;
    csv::write_row(out, {r.detector, r.semantics ? "true" : "false", r.experiment, r.setting, r.run, cell(r.train_s),
                         cell(r.test_s)});
  }
}

std::string BenchReport::markdown() const {
  struct Pair {
    const ReportRow* without = nullptr;
    const ReportRow* with = nullptr;
  };
  std::vector<std::pair<std::string, std::string>> groups;
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<std::string, Pair>>> table;
  for (const auto& r : rows) {
    if (r.run != "best") continue;
    const auto key = std::make_pair(r.experiment, r.setting);
    auto& entries = table[key];
    if (entries.empty()) groups.push_back(key);
    auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == r.detector; });
    if (it == entries.end()) {
      entries.emplace_back(r.detector, Pair{});
      it = entries.end() - 1;
    }
    (r.semantics ? it->second.with : it->second.without) = &r;
  }

  auto pair_cell = [](const Pair& p, double ReportRow::*field) {
    const std::string a = p.without ? fixed(p.without->*field, 3) : "-";
    const std::string b = p.with ? fixed(p.with->*field, 3) : "-";
    return a + " / " + b;
  };
  std::ostringstream out;
  for (const auto& key : groups) {
    out << "### " << key.first << " (" << key.second << ")\n\n";
    out << "| Detector | Precision (w/o / w/ semantics) | Recall (w/o / w/ semantics) | F1 (w/o / w/ semantics) |\n";
    out << "|---|---|---|---|\n";
    for (const auto& [name, p] : table[key]) {
      out << "| " << name << " | " << pair_cell(p, &ReportRow::precision) << " | " << pair_cell(p, &ReportRow::recall)
          << " | " << pair_cell(p, &ReportRow::f1) << " |\n";
    }
    out << "\n";
  }
  return out.str();
}

BenchReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  auto header = csv::read_row(in);
  if (!header || header->size() != std::size(kColumns)) throw FormatError(path.string() + ": not a report file");
  BenchReport report;
  auto num = [&](const std::string& s) -> double {
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad number '" + s + "'");
    }
  };
  while (auto row = csv::read_row(in)) {
    if (row->size() == 1 && row->front().empty()) continue;
    const auto& r = *row;
    if (r.size() != std::size(kColumns)) throw FormatError(path.string() + ": ragged row");
    ReportRow rr;
    rr.detector = r[0];
    rr.semantics = r[1] == "true";
    rr.experiment = r[2];
    rr.setting = r[3];
    rr.run = r[4];
    rr.precision = num(r[5]);
    rr.recall = num(r[6]);
    rr.f1 = num(r[7]);
    if (!r[8].empty()) rr.train_s = num(r[8]);
    if (!r[9].empty()) rr.test_s = num(r[9]);
    rr.seed = static_cast<std::uint64_t>(std::stoull(r[10]));
    report.rows.push_back(std::move(rr));
  }
  return report;
}

}  // namespace loglens
