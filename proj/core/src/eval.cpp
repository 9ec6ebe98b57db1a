#include <algorithm>
#include <cmath>
#include <numeric>

#include "loglens/errors.hpp"
#include "loglens/eval.hpp"

namespace loglens {

Split split(const std::vector<EventSequence>& sequences, double train_fraction, std::uint64_t seed) {
  if (sequences.size() < 2) {
    throw ConfigError("split needs at least 2 sequences, got " + std::to_string(sequences.size()));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  Split out;
  out.train.reserve(n_train);
  out.test.reserve(order.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? out.train : out.test).push_back(sequences[order[i]]);
  return out;
}

Stripped strip_anomalies(const std::vector<EventSequence>& sequences) {
  Stripped out;
  for (const auto& s : sequences) (s.label == Label::anomaly ? out.anomalies : out.normal).push_back(s);
  return out;
}

std::size_t contamination_count(std::size_t normal_count, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("contamination ratio must lie in [0, 1)");
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(normal_count) / (1.0 - ratio)));
}

std::vector<EventSequence> contaminate(const std::vector<EventSequence>& normal,
                                       const std::vector<EventSequence>& anomalies, double ratio,
                                       std::uint64_t seed) {
  const std::size_t need = contamination_count(normal.size(), ratio);
  if (need > anomalies.size()) {
    throw ConfigError("contamination ratio " + std::to_string(ratio) + " over " + std::to_string(normal.size()) +
                      " normal sequences requires " + std::to_string(need) + " anomalies, only " +
                      std::to_string(anomalies.size()) + " available");
  }
  std::vector<std::size_t> order(anomalies.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<EventSequence> out(normal);
  out.reserve(normal.size() + need);
  for (std::size_t i = 0; i < need; ++i) out.push_back(anomalies[order[i]]);
  return out;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.counts = c;
  m.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

Metrics compute_metrics(const std::vector<bool>& predicted, const std::vector<Label>& labels) {
  if (predicted.size() != labels.size()) {
    throw ConfigError("compute_metrics: " + std::to_string(predicted.size()) + " predictions for " +
                      std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == Label::anomaly;
    if (predicted[i]) {
      ++(actual ? c.tp : c.fp);
    } else {
      ++(actual ? c.fn : c.tn);
    }
  }
  return metrics_from_counts(c);
}

Metrics compute_metrics(const std::vector<Verdict>& verdicts, const std::vector<EventSequence>& sequences) {
  std::vector<bool> predicted(verdicts.size());
  std::transform(verdicts.begin(), verdicts.end(), predicted.begin(), [](const Verdict& v) { return v.anomalous; });
  std::vector<Label> labels(sequences.size());
  std::transform(sequences.begin(), sequences.end(), labels.begin(), [](const EventSequence& s) { return s.label; });
  return compute_metrics(predicted, labels);
}

}  // namespace loglens
