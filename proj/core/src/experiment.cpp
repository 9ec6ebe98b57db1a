#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

#include "loglens/errors.hpp"
#include "loglens/eval.hpp"

namespace loglens {

namespace {

constexpr std::uint64_t kSplitStream = 11;
constexpr std::uint64_t kPoolStream = 12;
constexpr std::uint64_t kContaminateStream = 13;
constexpr std::uint64_t kNoiseStream = 40;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string setting_label(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", ratio);
  return buf;
}

struct RunContext {
  const Dataset& data;
  const NamedDetector& detector;
  const ExperimentSpec& spec;
  std::size_t run;
  std::uint64_t run_seed;
  DetectorConfig config;
  std::string name;
};

ReportRow make_row(const RunContext& ctx, const std::string& setting, const Metrics& m, double train_s,
                   double test_s) {
  ReportRow r;
  r.detector = ctx.name;
  r.semantics = ctx.config.semantics;
  r.experiment = std::string(experiment_name(ctx.spec.kind));
  r.setting = setting;
  r.run = std::to_string(ctx.run);
  r.precision = m.precision;
  r.recall = m.recall;
  r.f1 = m.f1;
  r.train_s = train_s;
  r.test_s = test_s;
  r.seed = ctx.run_seed;
  return r;
}

std::vector<EventSequence> training_set(const DetectorConfig& config, const std::vector<EventSequence>& train) {
  return is_supervised(config.family) ? train : strip_anomalies(train).normal;
}

std::vector<ReportRow> run_unit(const RunContext& ctx) {
  const auto parts = split(ctx.data.sequences, ctx.spec.train_fraction, derive_seed(ctx.run_seed, kSplitStream));
  const auto& vocab = ctx.data.vocabulary;
  std::vector<ReportRow> rows;

  switch (ctx.spec.kind) {
    case ExperimentKind::accuracy:
    case ExperimentKind::efficiency: {
      auto t0 = Clock::now();
      const auto det = train_detector(training_set(ctx.config, parts.train), ctx.config, vocab);
      const double train_s = seconds_since(t0);
      t0 = Clock::now();
      const auto verdicts = detect_sequences(det, parts.test);
      const double test_s = seconds_since(t0);
      const char* setting = ctx.spec.kind == ExperimentKind::accuracy ? "clean" : "timing";
      rows.push_back(make_row(ctx, setting, compute_metrics(verdicts, parts.test), train_s, test_s));
      break;
    }
    case ExperimentKind::contamination_sweep: {
      // Only unsupervised detectors train on data that is meant to be normal.
      if (is_supervised(ctx.config.family)) break;
      auto [normal, anomalies] = strip_anomalies(parts.train);
      std::vector<EventSequence> validation;
      if (ctx.config.family == Family::autoencoder) {
        auto [fit_part, val_part] = holdout(normal, ctx.config.validation_fraction, ctx.config.seed);
        normal = std::move(fit_part);
        validation = std::move(val_part);
      }
      const auto ratios = ctx.spec.effective_ratios();
      const double r_max = *std::max_element(ratios.begin(), ratios.end());
      if (r_max > 0.0 && contamination_count(normal.size(), r_max) > anomalies.size()) {
        // Too few anomalies for the largest ratio: shrink the normal pool once
        // so every ratio is reachable over the same pool.
        const auto pool = static_cast<std::size_t>(
            std::floor(static_cast<double>(anomalies.size()) * (1.0 - r_max) / r_max));
        Rng rng(derive_seed(ctx.run_seed, kPoolStream));
        rng.shuffle(normal);
        normal.resize(std::min(pool, normal.size()));
      }
      for (std::size_t i = 0; i < ratios.size(); ++i) {
        const auto train = contaminate(normal, anomalies, ratios[i], derive_seed(ctx.run_seed, kContaminateStream + i));
        auto t0 = Clock::now();
        const auto det = train_detector(train, ctx.config, vocab, validation.empty() ? nullptr : &validation);
        const double train_s = seconds_since(t0);
        t0 = Clock::now();
        const auto verdicts = detect_sequences(det, parts.test);
        const double test_s = seconds_since(t0);
        rows.push_back(make_row(ctx, setting_label(ratios[i]), compute_metrics(verdicts, parts.test), train_s, test_s));
      }
      break;
    }
    case ExperimentKind::noise_sweep: {
      auto t0 = Clock::now();
      const auto det = train_detector(training_set(ctx.config, parts.train), ctx.config, vocab);
      const double train_s = seconds_since(t0);
      const auto ratios = ctx.spec.effective_ratios();
      for (std::size_t i = 0; i < ratios.size(); ++i) {
        NoiseSpec ns;
        ns.ratio = ratios[i];
        ns.strategies = ctx.spec.strategies;
        ns.synonyms = ctx.spec.synonyms;
        ns.seed = derive_seed(ctx.run_seed, kNoiseStream + i);
        const auto noisy = inject_noise(parts.test, ns, vocab);
        t0 = Clock::now();
        const auto verdicts = detect_sequences(det.with_vocabulary(noisy.vocabulary), noisy.sequences);
        const double test_s = seconds_since(t0);
        rows.push_back(
            make_row(ctx, setting_label(ratios[i]), compute_metrics(verdicts, noisy.sequences), train_s, test_s));
      }
      break;
    }
  }
  return rows;
}

std::optional<double> mean_of(const std::vector<const ReportRow*>& rows, std::optional<double> ReportRow::*field) {
  double s = 0.0;
  for (const auto* r : rows) {
    if (!(r->*field)) return std::nullopt;
    s += *(r->*field);
  }
  return s / static_cast<double>(rows.size());
}

}  // namespace

std::string_view experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::accuracy:
      return "accuracy";
    case ExperimentKind::contamination_sweep:
      return "contamination_sweep";
    case ExperimentKind::noise_sweep:
      return "noise_sweep";
    case ExperimentKind::efficiency:
      return "efficiency";
  }
  return "accuracy";
}

ExperimentKind parse_experiment(std::string_view name) {
  for (auto k : {ExperimentKind::accuracy, ExperimentKind::contamination_sweep, ExperimentKind::noise_sweep,
                 ExperimentKind::efficiency})
    if (experiment_name(k) == name) return k;
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

std::vector<double> ExperimentSpec::effective_ratios() const {
  if (!ratios.empty()) return ratios;
  if (kind == ExperimentKind::contamination_sweep) return {0.01, 0.03, 0.05, 0.10};
  if (kind == ExperimentKind::noise_sweep) return {0.05, 0.10, 0.15, 0.20};
  return {};
}

BenchReport run_experiment(const Dataset& dataset, const std::vector<NamedDetector>& detectors,
                           const ExperimentSpec& spec) {
  if (spec.repeats < 1) throw ConfigError("repeats must be at least 1");
  for (double r : spec.effective_ratios()) {
    if (spec.kind == ExperimentKind::contamination_sweep && !(r >= 0.0 && r < 1.0)) {
      throw ConfigError("contamination ratios must lie in [0, 1)");
    }
    if (spec.kind == ExperimentKind::noise_sweep && !(r >= 0.0)) throw ConfigError("noise ratios must be nonnegative");
  }
  for (const auto& d : detectors) d.config.validate();

  const std::size_t units = detectors.size() * spec.repeats;
  std::vector<std::vector<ReportRow>> results(units);
  std::vector<std::exception_ptr> errors(units);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u; (u = next.fetch_add(1)) < units;) {
      const auto& det = detectors[u / spec.repeats];
      const std::size_t run = u % spec.repeats;
      RunContext ctx{dataset, det, spec, run, spec.seed + run, det.config,
                     det.name.empty() ? std::string(family_name(det.config.family)) : det.name};
      ctx.config.seed = ctx.run_seed;
      try {
        results[u] = run_unit(ctx);
      } catch (...) {
        errors[u] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(spec.jobs, 1, std::max<std::size_t>(units, 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  BenchReport report;
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    const std::size_t settings = results[d * spec.repeats].size();
    for (std::size_t s = 0; s < settings; ++s) {
      std::vector<const ReportRow*> runs;
      for (std::size_t run = 0; run < spec.repeats; ++run) {
        runs.push_back(&results[d * spec.repeats + run][s]);
        report.rows.push_back(*runs.back());
      }
      const ReportRow* best = runs.front();
      for (const auto* r : runs)
        if (r->f1 > best->f1) best = r;
      ReportRow best_row = *best;
      best_row.run = "best";
      best_row.seed = spec.seed;
      ReportRow mean_row = *best;
      mean_row.run = "mean";
      mean_row.seed = spec.seed;
      mean_row.precision = mean_row.recall = mean_row.f1 = 0.0;
      for (const auto* r : runs) {
        mean_row.precision += r->precision / static_cast<double>(runs.size());
        mean_row.recall += r->recall / static_cast<double>(runs.size());
        mean_row.f1 += r->f1 / static_cast<double>(runs.size());
      }
      mean_row.train_s = mean_of(runs, &ReportRow::train_s);
      mean_row.test_s = mean_of(runs, &ReportRow::test_s);
      report.rows.push_back(std::move(best_row));
      report.rows.push_back(std::move(mean_row));
    }
  }
  return report;
}

}  // namespace loglens
