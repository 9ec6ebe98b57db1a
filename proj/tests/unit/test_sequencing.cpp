#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "loglens/errors.hpp"
#include "loglens/rng.hpp"
#include "loglens/semantic.hpp"
#include "loglens/sequencing.hpp"

namespace loglens {
namespace {

LogRecord timed(std::size_t line, std::int64_t ts, std::size_t event, std::optional<std::string> id = std::nullopt,
                std::optional<Label> label = std::nullopt) {
  LogRecord r;
  r.line_no = line;
  r.timestamp = ts;
  r.identifier = std::move(id);
  r.event_id = event;
  r.label = label;
  return r;
}

std::vector<LogRecord> dense_timestamps(std::size_t n) {
  std::vector<LogRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(timed(i + 1, static_cast<std::int64_t>(i), i));
  return out;
}

PartitionSpec time_spec(PartitionMode mode, std::int64_t size, std::int64_t stride = 0) {
  PartitionSpec s;
  s.mode = mode;
  s.partition_size = size;
  s.stride = mode == PartitionMode::fixed ? size : stride;
  return s;
}

using Events = std::vector<std::size_t>;

TEST(Partition, FixedIntervals) {
  const auto seqs = partition(dense_timestamps(6), time_spec(PartitionMode::fixed, 2));
  ASSERT_EQ(seqs.size(), 3u);
  EXPECT_EQ(seqs[0].events, (Events{0, 1}));
  EXPECT_EQ(seqs[1].events, (Events{2, 3}));
  EXPECT_EQ(seqs[2].events, (Events{4, 5}));
  EXPECT_EQ(seqs[2].origin, "2");
}

TEST(Partition, SlidingIntervals) {
  const auto seqs = partition(dense_timestamps(6), time_spec(PartitionMode::sliding, 2, 1));
  ASSERT_EQ(seqs.size(), 5u);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(seqs[j].events, (Events{j, j + 1}));
}

TEST(Partition, SlidingWithStrideEqualToSizeIsFixed) {
  Rng rng(3);
  std::vector<LogRecord> records;
  for (std::size_t i = 0; i < 60; ++i) records.push_back(timed(i + 1, static_cast<std::int64_t>(rng.below(40)), i));
  EXPECT_EQ(partition(records, time_spec(PartitionMode::sliding, 7, 7)),
            partition(records, time_spec(PartitionMode::fixed, 7)));
}

TEST(Partition, IdentifierGroupsInterleavedRecords) {
  std::vector<LogRecord> records{timed(1, 5, 0, "blk_789"), timed(2, 1, 1, "blk_1"), timed(3, 6, 2, "blk_789"),
                                 timed(4, 2, 3),            timed(5, 3, 4, "blk_789", Label::anomaly),
                                 timed(6, 3, 5, "blk_1")};
  PartitionSpec spec;
  const auto seqs = partition(records, spec);
  ASSERT_EQ(seqs.size(), 2u);
  EXPECT_EQ(seqs[0].origin, "blk_789");
  EXPECT_EQ(seqs[0].events, (Events{4, 0, 2}));
  EXPECT_EQ(seqs[0].label, Label::anomaly);
  EXPECT_EQ(seqs[1].events, (Events{1, 5}));
  EXPECT_EQ(seqs[1].label, Label::normal);
}

TEST(Partition, IdentifierModeWithoutIdentifiersIsAConfigError) {
  EXPECT_THROW(partition(dense_timestamps(3), PartitionSpec{}), ConfigError);
}

TEST(Partition, TiesBrokenByLineNumber) {
  std::vector<LogRecord> records{timed(3, 0, 7), timed(1, 0, 8), timed(2, 0, 9)};
  const auto seqs = partition(records, time_spec(PartitionMode::fixed, 10));
  ASSERT_EQ(seqs.size(), 1u);
  EXPECT_EQ(seqs[0].events, (Events{8, 9, 7}));
}

TEST(Partition, SpecValidation) {
  EXPECT_THROW(time_spec(PartitionMode::fixed, 0).validate(), ConfigError);
  EXPECT_THROW(time_spec(PartitionMode::sliding, 2, 3).validate(), ConfigError);
  EXPECT_THROW(time_spec(PartitionMode::sliding, 2, 0).validate(), ConfigError);
  EXPECT_NO_THROW(time_spec(PartitionMode::sliding, 2, 2).validate());
  EXPECT_THROW(parse_partition_mode("session"), ConfigError);
}

// Interval starts by the boundary rule: keep laying intervals until one
// reaches past the last timestamp.
std::vector<std::int64_t> brute_starts(std::int64_t t0, std::int64_t last, std::int64_t size, std::int64_t stride) {
  std::vector<std::int64_t> starts;
  for (std::int64_t start = t0;; start += stride) {
    starts.push_back(start);
    if (start + size > last) break;
  }
  return starts;
}

TEST(Partition, MatchesBruteForceEnumeration) {
  Rng rng(11);
  for (std::int64_t span = 1; span <= 50; ++span) {
    for (std::int64_t size = 1; size <= 20; ++size) {
      for (std::int64_t stride = 1; stride <= std::min<std::int64_t>(5, size); ++stride) {
        std::vector<LogRecord> records;
        const std::size_t n = 1 + rng.below(static_cast<std::uint64_t>(span));
        for (std::size_t i = 0; i < n; ++i)
          records.push_back(timed(i + 1, static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span))), i));
        std::int64_t t0 = records[0].timestamp, last = t0;
        for (auto& r : records) {
          t0 = std::min(t0, r.timestamp);
          last = std::max(last, r.timestamp);
        }
        std::vector<Events> expected;
        for (auto start : brute_starts(t0, last, size, stride)) {
          std::vector<std::pair<std::pair<std::int64_t, std::size_t>, std::size_t>> members;
          for (auto& r : records)
            if (r.timestamp >= start && r.timestamp < start + size) members.push_back({{r.timestamp, r.line_no}, *r.event_id});
          if (members.empty()) continue;
          std::sort(members.begin(), members.end());
          Events ev;
          for (auto& m : members) ev.push_back(m.second);
          expected.push_back(ev);
        }
        const auto mode = stride == size ? PartitionMode::fixed : PartitionMode::sliding;
        const auto seqs = partition(records, time_spec(mode, size, stride));
        ASSERT_EQ(seqs.size(), expected.size()) << "span " << span << " size " << size << " stride " << stride;
        for (std::size_t i = 0; i < seqs.size(); ++i) ASSERT_EQ(seqs[i].events, expected[i]);
      }
    }
  }
}

TEST(Partition, FixedPartitionsCoverEveryRecordOnce) {
  Rng rng(5);
  std::vector<LogRecord> records;
  for (std::size_t i = 0; i < 200; ++i) records.push_back(timed(i + 1, static_cast<std::int64_t>(rng.below(500)), i));
  std::multiset<std::size_t> seen;
  for (auto& s : partition(records, time_spec(PartitionMode::fixed, 13))) seen.insert(s.events.begin(), s.events.end());
  ASSERT_EQ(seen.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) EXPECT_EQ(seen.count(i), 1u);
}

TEST(Partition, SlidingMembershipIsBounded) {
  Rng rng(6);
  std::vector<LogRecord> records;
  for (std::size_t i = 0; i < 150; ++i) records.push_back(timed(i + 1, static_cast<std::int64_t>(rng.below(300)), i));
  const std::int64_t size = 10, stride = 3;
  std::map<std::size_t, std::size_t> count;
  for (auto& s : partition(records, time_spec(PartitionMode::sliding, size, stride)))
    for (auto e : s.events) ++count[e];
  const std::size_t bound = (size + stride - 1) / stride;
  for (auto& [e, c] : count) EXPECT_LE(c, bound);
  EXPECT_EQ(count.size(), records.size());
}

TEST(Partition, IdentifierConcatenationReproducesInput) {
  Rng rng(8);
  std::vector<LogRecord> records;
  for (std::size_t i = 0; i < 120; ++i)
    records.push_back(timed(i + 1, static_cast<std::int64_t>(i), i, "id" + std::to_string(rng.below(9))));
  std::vector<std::size_t> all;
  for (auto& s : partition(records, PartitionSpec{})) all.insert(all.end(), s.events.begin(), s.events.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(all.size(), records.size());
}

TEST(Sequences, JsonLinesRoundTrip) {
  std::vector<EventSequence> seqs{{{1, 2, 3}, Label::normal, "blk_1"},
                                  {{0}, Label::anomaly, "weird \"origin\""},
                                  {{}, Label::normal, "7"}};
  std::stringstream buffer;
  write_sequences(buffer, seqs);
  EXPECT_EQ(read_sequences(buffer), seqs);
}

TEST(Sequences, MalformedJsonLineIsAFormatError) {
  std::istringstream in("{\"origin\":\"a\",\"label\":\"normal\",\"events\":[1]}\nnot json\n");
  EXPECT_THROW(read_sequences(in), FormatError);
}

TEST(Windows, TwelveEventsGiveTwoWindows) {
  Events ev(12);
  for (std::size_t i = 0; i < ev.size(); ++i) ev[i] = 100 + i;
  const auto w = make_windows(ev, WindowSpec{10, 1});
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].target, 110u);
  EXPECT_EQ(w[1].target, 111u);
  EXPECT_EQ(w[1].inputs.front(), 101u);
  EXPECT_EQ(w[1].position, 1u);
  EXPECT_TRUE(make_windows(Events(10, 0), WindowSpec{10, 1}).empty());
  EXPECT_TRUE(is_short(EventSequence{Events(10, 0)}, WindowSpec{10, 1}));
}

TEST(Windows, MatchBruteForceEnumeration) {
  for (std::size_t length = 0; length <= 50; ++length) {
    Events ev(length);
    for (std::size_t i = 0; i < length; ++i) ev[i] = i;
    for (std::size_t m = 1; m <= 20; ++m) {
      for (std::size_t s = 1; s <= 5; ++s) {
        std::vector<Window> expected;
        for (std::size_t t = 0; t < length; ++t) {
          if (t < m || (t - m) % s != 0) continue;
          Window w;
          for (std::size_t j = t - m; j < t; ++j) w.inputs.push_back(ev[j]);
          w.target = ev[t];
          w.position = t - m;
          expected.push_back(w);
        }
        const auto got = make_windows(ev, WindowSpec{m, s});
        ASSERT_EQ(got, expected) << "L " << length << " m " << m << " s " << s;
        if (s == 1) ASSERT_EQ(got.size(), length > m ? length - m : 0u);
      }
    }
  }
}

TEST(Windows, SpecValidation) {
  EXPECT_THROW((WindowSpec{0, 1}.validate()), ConfigError);
  EXPECT_THROW((WindowSpec{3, 0}.validate()), ConfigError);
}

TEST(Encoding, IndicesAndPadding) {
  EXPECT_EQ(encode_indices({0, 2, 1}, 3), (Events{0, 2, 1}));
  EXPECT_EQ(encode_indices({0, 3, 9}, 3), (Events{0, 3, 3}));
  EXPECT_EQ(encode_indices({5, 6}, 3), (Events{3, 3}));
  EXPECT_EQ(pad_or_truncate({1, 2, 3}, 5, 9), (Events{1, 2, 3, 9, 9}));
  EXPECT_EQ(pad_or_truncate({1, 2, 3, 4, 5}, 5, 9), (Events{1, 2, 3, 4, 5}));
  EXPECT_EQ(pad_or_truncate({1, 2, 3, 4, 5, 6, 7, 8}, 5, 9), (Events{1, 2, 3, 4, 5}));
}

TEST(SemanticEncoder, SingleWordTemplateIsItsWordVector) {
  EventVocabulary vocab({"failed", "block <*> failed"});
  const auto enc = build_semantic_encoder(vocab, 8, 4);
  EXPECT_EQ(enc.template_vector("failed"), enc.word_vector("failed"));
  const auto table = enc.table();
  ASSERT_EQ(table.size(), 3u * 8u);
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(table.at(0, j), enc.word_vector("failed")[j]);
    EXPECT_NEAR(table.at(1, j), 0.5 * (enc.word_vector("block")[j] + enc.word_vector("failed")[j]), 1e-15);
    EXPECT_EQ(table.at(2, j), 0.0);
  }
}

TEST(SemanticEncoder, OrderInvariantAndEmptyTemplates) {
  EventVocabulary vocab({"open file now", "now file open", "<*> 42"});
  const auto enc = build_semantic_encoder(vocab, 5, 1);
  const auto t = enc.table();
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(t.at(0, j), t.at(1, j), 1e-15);
    EXPECT_EQ(t.at(2, j), 0.0);
  }
}

TEST(SemanticEncoder, DeterministicAndSeeded) {
  EventVocabulary vocab({"Received block <*>", "PacketResponder terminating"});
  EXPECT_TRUE(build_semantic_encoder(vocab, 6, 9) == build_semantic_encoder(vocab, 6, 9));
  EXPECT_FALSE(build_semantic_encoder(vocab, 6, 9) == build_semantic_encoder(vocab, 6, 10));
  for (double v : build_semantic_encoder(vocab, 6, 9).word_vector("block")) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(build_semantic_encoder(vocab, 0, 9), ConfigError);
}

TEST(SemanticEncoder, ExtensionKeepsWordVectors) {
  EventVocabulary vocab({"open file"});
  const auto enc = build_semantic_encoder(vocab, 4, 2);
  EventVocabulary bigger({"open file", "close file"});
  const auto ext = enc.extended(bigger);
  EXPECT_EQ(ext.vocab_size(), 2u);
  EXPECT_EQ(ext.word_vector("close"), enc.word_vector("close"));
  EXPECT_EQ(ext.template_vector("open file"), enc.template_vector("open file"));
}

TEST(SemanticEncoder, TfidfDownweightsCommonWords) {
  EventVocabulary vocab({"block open", "block close", "block read"});
  const auto plain = build_semantic_encoder(vocab, 4, 3);
  const auto weighted = build_semantic_encoder(vocab, 4, 3, true);
  const auto open = weighted.word_vector("open");
  const auto block = weighted.word_vector("block");
  const auto v = weighted.template_vector("block open");
  // Smoothed IDF ln((N+1)/(df+1)) + 1 with N = 3: block 1, open 1 + ln 2.
  const double w_open = 1.0 + std::log(2.0);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(v[j], (block[j] + w_open * open[j]) / (1.0 + w_open), 1e-12);
  EXPECT_NE(plain.template_vector("block open"), v);
}

}  // namespace
}  // namespace loglens
