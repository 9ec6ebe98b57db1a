#include <benchmark/benchmark.h>

#include "loglens/detectors.hpp"
#include "loglens/eval.hpp"
#include "loglens/log_ingest.hpp"
#include "loglens/ops.hpp"
#include "loglens/sequencing.hpp"
#include "loglens/syngen.hpp"

namespace {

using namespace loglens;

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor::from({r, c}, std::move(v));
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    sum(matmul(a, b)).backward();
    benchmark::DoNotOptimize(a.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(128);

const GeneratedLog& corpus() {
  static const GeneratedLog log = [] {
    GeneratorSpec g;
    g.n_sequences = 600;
    g.seed = 2;
    return generate(g);
  }();
  return log;
}

void BM_ParseTemplates(benchmark::State& state) {
  std::vector<LogRecord> records;
  for (std::size_t i = 0; i < 2000; ++i) {
    LogRecord r;
    r.line_no = i + 1;
    r.content = "Received block blk_" + std::to_string(i) + " of size " + std::to_string(i * 31) + " from /10.0.0." +
                std::to_string(i % 255);
    if (i % 3 == 0) r.content = "PacketResponder " + std::to_string(i % 4) + " for block blk_" + std::to_string(i) + " terminating";
    records.push_back(std::move(r));
  }
  for (auto _ : state) benchmark::DoNotOptimize(parse_templates(records));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_ParseTemplates);

void BM_PartitionAndWindow(benchmark::State& state) {
  const auto& log = corpus();
  for (auto _ : state) {
    std::size_t n = 0;
    for (const auto& s : partition(log.records, PartitionSpec{})) n += make_windows(s, WindowSpec{}).size();
    benchmark::DoNotOptimize(n);
  }
}
BENCHMARK(BM_PartitionAndWindow);

void BM_TrainOneEpoch(benchmark::State& state) {
  const auto family = static_cast<Family>(state.range(0));
  const auto& log = corpus();
  const auto seqs = partition(log.records, PartitionSpec{});
  DetectorConfig cfg;
  cfg.family = family;
  cfg.hidden = 32;
  cfg.layers = 1;
  cfg.epochs = 1;
  cfg.heads = 2;
  const auto train = is_supervised(family) ? seqs : strip_anomalies(seqs).normal;
  for (auto _ : state) benchmark::DoNotOptimize(train_detector(train, cfg, log.vocabulary));
  state.SetLabel(std::string(family_name(family)));
}
BENCHMARK(BM_TrainOneEpoch)
    ->DenseRange(0, 4)
    ->Unit(benchmark::kMillisecond)
    ->Iterations(1);

void BM_DetectForecast(benchmark::State& state) {
  const auto& log = corpus();
  const auto seqs = partition(log.records, PartitionSpec{});
  DetectorConfig cfg;
  cfg.hidden = 32;
  cfg.layers = 1;
  cfg.epochs = 1;
  const auto det = train_detector(strip_anomalies(seqs).normal, cfg, log.vocabulary);
  for (auto _ : state) benchmark::DoNotOptimize(detect_sequences(det, seqs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(seqs.size()));
}
BENCHMARK(BM_DetectForecast)->Unit(benchmark::kMillisecond);

}  // namespace

// The packaged benchmark_main archive carries LTO bytecode from another
// compiler release, so the entry point is defined here.
BENCHMARK_MAIN();
