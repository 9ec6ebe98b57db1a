#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "loglens/errors.hpp"
#include "loglens/sequencing.hpp"
#include "loglens/syngen.hpp"

namespace loglens {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

GeneratorSpec spec_with(std::size_t n, double rate, std::uint64_t seed) {
  GeneratorSpec g;
  g.n_sequences = n;
  g.anomaly_rate = rate;
  g.seed = seed;
  return g;
}

TEST(Syngen, ExactAnomalyCount) {
  const auto log = generate(spec_with(1000, 0.05, 1));
  std::size_t anomalies = 0;
  for (auto& s : log.sequences) anomalies += s.label == Label::anomaly;
  EXPECT_EQ(anomalies, 50u);
  EXPECT_EQ(log.sequences.size(), 1000u);
  for (double rate : {0.013, 0.2, 0.5}) {
    const auto l = generate(spec_with(333, rate, 2));
    std::size_t a = 0;
    for (auto& s : l.sequences) a += s.label == Label::anomaly;
    EXPECT_EQ(a, static_cast<std::size_t>(std::llround(rate * 333))) << rate;
  }
}

TEST(Syngen, RateZeroIsAllNormal) {
  const auto log = generate(spec_with(200, 0.0, 3));
  for (auto& r : log.records) EXPECT_EQ(r.label, Label::normal);
}

TEST(Syngen, SameSpecSameFiles) {
  const auto dir = fs::temp_directory_path() / "loglens_syngen_test";
  fs::create_directories(dir);
  const auto g = spec_with(300, 0.1, 17);
  write_generated(generate(g), dir / "a.csv");
  write_generated(generate(g), dir / "b.csv");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.csv.automaton.json"), slurp(dir / "b.csv.automaton.json"));
  write_generated(generate(spec_with(300, 0.1, 18)), dir / "c.csv");
  EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
  fs::remove_all(dir);
}

TEST(Syngen, NormalSequencesAreWalksAndAnomaliesOneMutationAway) {
  auto g = spec_with(600, 0.2, 5);
  g.automaton_branching = 2;
  const auto log = generate(g);
  const auto& a = log.automaton;
  for (std::size_t s = 0; s < a.templates.size(); ++s) {
    std::size_t out = 0;
    double total = 0.0;
    for (auto& t : a.transitions)
      if (t.from == s) {
        ++out;
        total += t.probability;
        EXPECT_NE(t.to, a.error_state);
      }
    EXPECT_LE(out, g.automaton_branching);
    if (out) EXPECT_NEAR(total, 1.0, 1e-9);
  }
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& seq : log.sequences) {
    ++counts[static_cast<int>(seq.mutation)];
    const auto& st = seq.states;
    switch (seq.mutation) {
      case Mutation::none:
        EXPECT_TRUE(a.is_walk(st)) << seq.identifier;
        EXPECT_GT(st.size(), g.window_hint + 1);
        EXPECT_EQ(seq.label, Label::normal);
        break;
      case Mutation::insert: {
        std::size_t pos = 0, n_err = 0;
        for (std::size_t i = 0; i < st.size(); ++i)
          if (st[i] == a.error_state) pos = i, ++n_err;
        ASSERT_EQ(n_err, 1u);
        EXPECT_GE(pos, g.window_hint);
        auto walk = st;
        walk.erase(walk.begin() + static_cast<std::ptrdiff_t>(pos));
        EXPECT_TRUE(a.is_walk(walk));
        break;
      }
      case Mutation::swap: {
        EXPECT_FALSE(a.is_walk(st));
        bool some = false;
        for (std::size_t i = g.window_hint; i + 1 < st.size() && !some; ++i) {
          auto w = st;
          std::swap(w[i], w[i + 1]);
          some = a.is_walk(w);
        }
        EXPECT_TRUE(some) << seq.identifier;
        break;
      }
      case Mutation::truncate:
        EXPECT_TRUE(a.is_walk(st));
        EXPECT_LT(st.size(), g.window_hint);
        break;
    }
    if (seq.mutation != Mutation::none) EXPECT_EQ(seq.label, Label::anomaly);
  }
  EXPECT_EQ(counts[1] + counts[2] + counts[3], 120u);
  EXPECT_GT(counts[1], 0u);
  EXPECT_GT(counts[2], 0u);
  EXPECT_GT(counts[3], 0u);
}

TEST(Syngen, SidecarDescribesTheEmittedWalks) {
  const auto dir = fs::temp_directory_path() / "loglens_syngen_sidecar";
  fs::create_directories(dir);
  const auto log = generate(spec_with(150, 0.0, 8));
  write_generated(log, dir / "d.csv");
  const auto automaton = Automaton::from_json(slurp(dir / "d.csv.automaton.json"));
  const auto parsed = read_parsed(dir / "d.csv");
  for (const auto& seq : partition(parsed.records, PartitionSpec{}))
    EXPECT_TRUE(automaton.is_walk(automaton.states_of(seq.events, parsed.vocabulary))) << seq.origin;
  fs::remove_all(dir);
}

TEST(Syngen, CsvRoundTripIsLossless) {
  const auto dir = fs::temp_directory_path() / "loglens_syngen_roundtrip";
  fs::create_directories(dir);
  const auto log = generate(spec_with(120, 0.1, 9));
  write_generated(log, dir / "r.csv");
  const auto parsed = read_parsed(dir / "r.csv");
  EXPECT_EQ(parsed.records, log.records);
  EXPECT_EQ(parsed.vocabulary, log.vocabulary);
  fs::remove_all(dir);
}

TEST(Syngen, PartitionedLabelsMatchGroundTruth) {
  const auto log = generate(spec_with(200, 0.1, 10));
  const auto seqs = partition(log.records, PartitionSpec{});
  ASSERT_EQ(seqs.size(), log.sequences.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    EXPECT_EQ(seqs[i].origin, log.sequences[i].identifier);
    EXPECT_EQ(seqs[i].label, log.sequences[i].label);
    EXPECT_EQ(seqs[i].events.size(), log.sequences[i].states.size());
  }
}

TEST(Syngen, SpecValidationAndJson) {
  GeneratorSpec g;
  g.n_templates = 2;
  EXPECT_THROW(g.validate(), ConfigError);
  g = GeneratorSpec{};
  g.anomaly_rate = 1.0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = spec_with(42, 0.1, 99);
  g.automaton_branching = 4;
  const auto back = GeneratorSpec::from_json(g.to_json());
  EXPECT_EQ(back.n_sequences, 42u);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.automaton_branching, 4u);
  EXPECT_EQ(back.mix, g.mix);
  EXPECT_THROW(GeneratorSpec::from_json(R"({"n_sequence":3})"), ConfigError);
}

}  // namespace
}  // namespace loglens
