#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "models.hpp"

namespace loglens {
namespace {

using detail::Network;
using testing::max_relative_error;
using testing::random_tensor;

constexpr double kModelTol = 1e-3;
constexpr std::size_t kVocab = 5;

struct Case {
  Family family;
  bool semantics;
  std::size_t layers;
};

std::string case_name(const ::testing::TestParamInfo<Case>& info) {
  return std::string(family_name(info.param.family)) + (info.param.semantics ? "_semantic" : "_index") + "_" +
         std::to_string(info.param.layers) + "layer";
}

DetectorConfig small_config(const Case& c) {
  DetectorConfig cfg;
  cfg.family = c.family;
  cfg.semantics = c.semantics;
  cfg.layers = c.layers;
  cfg.hidden = c.family == Family::transformer_forecast ? 4 : 3;
  cfg.heads = 2;
  cfg.embed_dim = 3;
  cfg.window.window_size = 3;
  cfg.max_len = c.family == Family::cnn ? 6 : 4;
  return cfg;
}

class ModelGradient : public ::testing::TestWithParam<Case> {};

TEST_P(ModelGradient, FullLossMatchesFiniteDifferences) {
  const auto cfg = small_config(GetParam());
  ParamSet params(derive_seed(31, static_cast<std::uint64_t>(cfg.family)));
  const Network net(cfg, kVocab, params);
  Rng rng(32);
  const Tensor table = cfg.semantics ? random_tensor({kVocab + 1, cfg.effective_embed_dim()}, rng)
                                     : net.embedding();
  const std::size_t batch = 2;
  const std::size_t length = is_supervised(cfg.family)                ? cfg.max_len
                             : cfg.family == Family::autoencoder ? cfg.window.window_size + 1
                                                                 : cfg.window.window_size;
  std::vector<std::size_t> ids(batch * length);
  for (auto& id : ids) id = rng.below(kVocab + 1);
  std::vector<std::size_t> targets;
  if (is_forecasting(cfg.family)) targets = {2, kVocab};
  if (is_supervised(cfg.family)) targets = {0, 1};

  std::vector<Tensor> leaves;
  for (auto& [name, t] : params.entries()) leaves.push_back(t);
  ASSERT_FALSE(leaves.empty());
  const double err = max_relative_error([&] { return net.loss(table, ids, targets, batch); }, leaves);
  EXPECT_LT(err, kModelTol);
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, ModelGradient,
                         ::testing::Values(Case{Family::lstm_forecast, false, 1}, Case{Family::lstm_forecast, true, 1},
                                           Case{Family::lstm_forecast, false, 2},
                                           Case{Family::transformer_forecast, false, 1},
                                           Case{Family::transformer_forecast, true, 2},
                                           Case{Family::autoencoder, false, 1}, Case{Family::autoencoder, true, 1},
                                           Case{Family::bilstm_attention, false, 1},
                                           Case{Family::bilstm_attention, true, 2}, Case{Family::cnn, false, 1},
                                           Case{Family::cnn, true, 1}),
                         case_name);

TEST(Network, OutputWidths) {
  for (auto family : {Family::lstm_forecast, Family::transformer_forecast, Family::autoencoder,
                      Family::bilstm_attention, Family::cnn}) {
    const auto cfg = small_config({family, false, 1});
    ParamSet params(1);
    const Network net(cfg, kVocab, params);
    if (is_forecasting(family)) EXPECT_EQ(net.output_width(), kVocab + 1);
    if (is_supervised(family)) EXPECT_EQ(net.output_width(), 2u);
    if (family == Family::autoencoder) EXPECT_EQ(net.output_width(), 4 * (kVocab + 1));
  }
}

TEST(Network, SameSeedSameInitialization) {
  const auto cfg = small_config({Family::transformer_forecast, false, 2});
  ParamSet a(7), b(7), c(8);
  const Network na(cfg, kVocab, a), nb(cfg, kVocab, b), nc(cfg, kVocab, c);
  EXPECT_TRUE(a.identical(b));
  EXPECT_FALSE(a.identical(c));
}

TEST(Network, CnnEmbeddingHasVocabPlusOneRows) {
  auto cfg = small_config({Family::cnn, false, 1});
  cfg.embed_dim = 7;
  ParamSet params(2);
  const Network net(cfg, 11, params);
  EXPECT_EQ(net.embedding().size(), 12u * 7u);
}

TEST(Network, BilstmAttentionScoresLieInTanhRange) {
  auto cfg = small_config({Family::bilstm_attention, false, 1});
  ParamSet params(3);
  const Network net(cfg, kVocab, params);
  for (auto& v : params.get("attention.weight").mutable_data()) v *= 50.0;
  Rng rng(4);
  std::vector<std::size_t> ids(2 * cfg.max_len);
  for (auto& id : ids) id = rng.below(kVocab + 1);
  std::vector<double> a;
  net.class_logits(net.embedding(), ids, 2, &a);
  ASSERT_EQ(a.size(), 2 * cfg.max_len);
  for (double v : a) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Network, ZeroAttentionWeightLeavesOnlyTheBias) {
  auto cfg = small_config({Family::bilstm_attention, false, 1});
  ParamSet params(5);
  const Network net(cfg, kVocab, params);
  for (auto& v : params.get("attention.weight").mutable_data()) v = 0.0;
  auto bias = params.get("output.bias").data();
  Rng rng(6);
  std::vector<std::size_t> ids(3 * cfg.max_len);
  for (auto& id : ids) id = rng.below(kVocab + 1);
  std::vector<double> a;
  const auto logits = net.class_logits(net.embedding(), ids, 3, &a);
  for (double v : a) EXPECT_EQ(v, 0.0);
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_DOUBLE_EQ(logits.at(b, 0), bias[0]);
    EXPECT_DOUBLE_EQ(logits.at(b, 1), bias[1]);
  }
}

TEST(Network, AutoencoderIndexFeaturesAreOneHot) {
  const auto cfg = small_config({Family::autoencoder, false, 1});
  ParamSet params(7);
  const Network net(cfg, kVocab, params);
  // Three inputs and the target.
  const std::vector<std::size_t> ids{0, 5, 2, 1};
  const auto f = net.ae_features(Tensor(), ids, 1);
  ASSERT_EQ(f.size(), 24u);
  double total = 0.0;
  for (double v : f.data()) total += v;
  EXPECT_EQ(total, 4.0);
  EXPECT_EQ(f.at(0), 1.0);
  EXPECT_EQ(f.at(6 + 5), 1.0);
  EXPECT_EQ(f.at(12 + 2), 1.0);
  EXPECT_EQ(f.at(18 + 1), 1.0);
  EXPECT_FALSE(f.requires_grad());
}

}  // namespace
}  // namespace loglens
