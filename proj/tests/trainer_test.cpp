#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>

#include "hashtrace/synth.hpp"
#include "hashtrace/trainer.hpp"
#include "support.hpp"

namespace hashtrace {
namespace {

using testing::random_code;
using testing::TempDir;

// 16 groups x 3 fakes, shared by the whole suite.
class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<TempDir>("ht_trainer");
    SynthConfig sc;
    sc.num_groups = 16;
    sc.fakes_per_group = 3;
    sc.frames = 10;
    sc.size = 32;
    sc.seed = 11;
    data_ = std::make_unique<TrainingData>(gen_synthetic_dataset(sc, dir_->path()));
  }
  static void TearDownTestSuite() {
    data_.reset();
    dir_.reset();
  }

  static TrainConfig small_config() {
    TrainConfig cfg;
    cfg.k = 16;
    cfg.T = 4;
    cfg.E = 16;
    cfg.iterations = 20;
    cfg.learning_rate = 1e-3;
    return cfg;
  }

  static std::unique_ptr<TempDir> dir_;
  static std::unique_ptr<TrainingData> data_;
};
std::unique_ptr<TempDir> TrainerTest::dir_;
std::unique_ptr<TrainingData> TrainerTest::data_;

TEST(BatchGroups, EpochCoversEveryGroupOnce) {
  std::multiset<std::uint32_t> seen;
  for (std::size_t it = 0; it < 2; ++it) {
    const auto ids = batch_groups(16, 8, 5, it);
    ASSERT_EQ(ids.size(), 8u);
    seen.insert(ids.begin(), ids.end());
  }
  ASSERT_EQ(seen.size(), 16u);
  for (std::uint32_t g = 0; g < 16; ++g) EXPECT_EQ(seen.count(g), 1u);
}

TEST(BatchGroups, ShortEpochIsToppedUpWithDistinctGroups) {
  for (std::size_t it = 0; it < 6; ++it) {
    const auto ids = batch_groups(10, 8, 1, it);
    EXPECT_EQ(std::set<std::uint32_t>(ids.begin(), ids.end()).size(), 8u);
  }
}

TEST(BatchGroups, DeterministicAndReshuffled) {
  EXPECT_EQ(batch_groups(32, 8, 3, 7), batch_groups(32, 8, 3, 7));
  bool differs = false;
  for (std::size_t epoch = 1; epoch < 5 && !differs; ++epoch) {
    differs = batch_groups(32, 8, 3, 0) != batch_groups(32, 8, 3, epoch * 4);
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(batch_groups(4, 8, 0, 0), std::invalid_argument);
}

TEST_F(TrainerTest, BatchUnitsAreWellFormed) {
  const TrainConfig cfg = small_config();
  const auto units = build_batch(*data_, cfg, 3);
  ASSERT_EQ(units.size(), cfg.batch_groups);
  std::set<std::uint32_t> ids;
  for (const auto& u : units) {
    ids.insert(u.group_id);
    EXPECT_NE(u.fake_1, u.fake_2);
    EXPECT_LT(u.fake_1, data_->training_fakes(u.group_id));
    EXPECT_LT(u.fake_2, data_->training_fakes(u.group_id));
    for (const auto* c : {&u.original_clip, &u.fake_clip_1, &u.fake_clip_2}) {
      EXPECT_EQ(c->T, cfg.T);
      EXPECT_EQ(c->D, kDescriptorDim);
    }
  }
  EXPECT_EQ(ids.size(), cfg.batch_groups);
  const auto again = build_batch(*data_, cfg, 3);
  for (std::size_t i = 0; i < units.size(); ++i) {
    EXPECT_EQ(units[i].group_id, again[i].group_id);
    EXPECT_EQ(units[i].fake_clip_1.values, again[i].fake_clip_1.values);
  }
}

TEST_F(TrainerTest, HeldOutFakeNeverTrains) {
  const TrainConfig cfg = small_config();
  for (std::size_t it = 0; it < 30; ++it) {
    for (const auto& u : build_batch(*data_, cfg, it)) {
      EXPECT_NE(u.fake_1, data_->held_out_fake(u.group_id));
      EXPECT_NE(u.fake_2, data_->held_out_fake(u.group_id));
    }
  }
}

TEST_F(TrainerTest, ZeroIterationsKeepsAnchorCenters) {
  TrainConfig cfg = small_config();
  cfg.iterations = 0;
  const FitResult r = fit(*data_, cfg);
  EXPECT_TRUE(r.history.empty());
  ASSERT_EQ(r.centers.size(), 16u);
  for (std::uint32_t g = 0; g < 16; ++g) {
    EXPECT_EQ(r.centers.at(g), binarize(forward(r.params, anchor_clip(*data_, g, cfg))));
  }
}

TEST_F(TrainerTest, FitIsDeterministic) {
  const TrainConfig cfg = small_config();
  const FitResult a = fit(*data_, cfg);
  const FitResult b = fit(*data_, cfg);
  EXPECT_EQ(a.params.values, b.params.values);
  EXPECT_EQ(a.centers, b.centers);
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  ASSERT_EQ(a.history.size(), cfg.iterations);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].iter, i);
    EXPECT_TRUE(std::isfinite(a.history[i].loss));
    EXPECT_GE(a.history[i].mean_bit, 0.0);
    EXPECT_LE(a.history[i].mean_bit, 1.0);
  }
}

TEST_F(TrainerTest, TooFewGroupsIsRejected) {
  TrainConfig cfg = small_config();
  cfg.batch_groups = 17;
  EXPECT_THROW(fit(*data_, cfg), std::invalid_argument);
  cfg.batch_groups = 7;
  EXPECT_THROW(fit(*data_, cfg), std::invalid_argument);
  cfg = small_config();
  cfg.learning_rate = 0.0;
  EXPECT_THROW(fit(*data_, cfg), std::invalid_argument);
}

TEST_F(TrainerTest, SmallFitSeparatesCenters) {
  TrainConfig cfg = small_config();
  cfg.iterations = 300;
  const FitResult r = fit(*data_, cfg);
  EXPECT_GE(mean_pairwise_hamming(r.centers.codes()), 6.0);
}

// Fixed batch, fixed centers: plain Adam on the triplet loss must descend.
TEST_F(TrainerTest, LossDescendsOnFixedBatch) {
  TrainConfig cfg = small_config();
  cfg.iterations = 0;
  FitResult r = fit(*data_, cfg);
  const auto units = build_batch(*data_, cfg, 0);
  std::vector<const FeatureSequence*> clips;
  std::vector<std::uint32_t> labels;
  for (const auto& u : units) {
    for (const auto* c : {&u.original_clip, &u.fake_clip_1, &u.fake_clip_2}) {
      clips.push_back(c);
      labels.push_back(u.group_id);
    }
  }
  Adam adam(r.params.values.size(), 1e-3, 0.9, 0.999, 1e-8);
  std::vector<double> losses;
  for (int it = 0; it < 50; ++it) {
    std::vector<ForwardCache> caches(clips.size());
    std::vector<LabeledCode> batch(clips.size());
    for (std::size_t i = 0; i < clips.size(); ++i) {
      forward(r.params, *clips[i], &caches[i]);
      batch[i] = {to_unit(RelaxedCode{caches[i].out, cfg.activation}), labels[i]};
    }
    const LossResult lr = hash_triplet_loss(batch, r.centers);
    losses.push_back(lr.loss);
    EncoderGrads grads(r.params.values.size(), 0.0);
    for (std::size_t i = 0; i < clips.size(); ++i) {
      std::vector<double> up(cfg.k);
      for (std::size_t j = 0; j < cfg.k; ++j) up[j] = lr.grads[i][j] * to_unit_grad(caches[i].out[j], cfg.activation);
      backward(r.params, caches[i], up, grads);
    }
    adam.step(r.params.values, grads);
  }
  EXPECT_LT(losses.back(), losses.front() - 0.01);
}

TEST(Revote, MajorityAndUntouchedGroups) {
  CenterSet prev(4);
  prev.set(0, HashCode::from_string("0000"));
  prev.set(1, HashCode::from_string("1111"));
  CodesByGroup codes;
  codes[0].anchor = HashCode::from_string("1100");
  codes[0].codes = {*codes[0].anchor, HashCode::from_string("1010"), HashCode::from_string("1001")};
  const CenterSet next = revote_centers(codes, prev);
  EXPECT_EQ(next.at(0).to_string(), "1000");
  EXPECT_EQ(next.at(1).to_string(), "1111");

  // Two codes tie on every differing bit: the anchor wins.
  CodesByGroup tie;
  tie[2].anchor = HashCode::from_string("0110");
  tie[2].codes = {*tie[2].anchor, HashCode::from_string("1001")};
  EXPECT_EQ(revote_centers(tie, prev).at(2).to_string(), "0110");

  CodesByGroup no_anchor;
  no_anchor[3].codes = {HashCode::from_string("0001")};
  EXPECT_THROW(revote_centers(no_anchor, prev), std::invalid_argument);
}

TEST(TrainMetrics, Example) {
  CenterSet centers(4);
  centers.set(0, HashCode::from_string("0000"));
  centers.set(1, HashCode::from_string("1111"));
  centers.set(2, HashCode::from_string("0011"));
  CodesByGroup codes;
  codes[0].codes = {HashCode::from_string("0001"), HashCode::from_string("0000")};
  codes[1].codes = {HashCode::from_string("0111")};
  const TrainRecord r = train_metrics(centers, codes);
  EXPECT_DOUBLE_EQ(r.inter_mean, (4.0 + 2.0 + 2.0) / 3.0);
  EXPECT_DOUBLE_EQ(r.intra_mean, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.mean_bit, 4.0 / 12.0);
}

TEST(TrainMetrics, MeanBitOfRandomCodesNearHalf) {
  Rng rng(9);
  CenterSet centers(64);
  CodesByGroup codes;
  for (std::uint32_t g = 0; g < 10; ++g) {
    centers.set(g, random_code(rng, 64));
    for (int i = 0; i < 20; ++i) codes[g].codes.push_back(random_code(rng, 64));
  }
  const TrainRecord r = train_metrics(centers, codes);
  // 12800 fair bits: sd 0.0044
  EXPECT_NEAR(r.mean_bit, 0.5, 0.02);
  EXPECT_NEAR(r.inter_mean, 32.0, 3.0);
  EXPECT_NEAR(r.intra_mean, 32.0, 1.0);
}

TEST(HistoryCsv, HeaderAndRoundTripPrecision) {
  TrainHistory h{{0, 0.1, 32.0, 1.5, 0.5}, {1, 1.0 / 3.0, 30.25, 0.0, 0.49}};
  const std::string csv = history_csv(h);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,loss,inter_mean,intra_mean,mean_bit");
  EXPECT_NE(csv.find("0.33333333333333331"), std::string::npos);
}

FeatureSequence random_clip(Rng& rng, std::size_t T) {
  FeatureSequence x(T, kDescriptorDim);
  for (auto& v : x.values) v = rng.uniform();
  return x;
}

TEST(FoldInput, StandardizationMatchesTransformedInput) {
  Rng rng(4);
  EncoderConfig ec;
  ec.D = kDescriptorDim;
  ec.E = 8;
  ec.k = 16;
  ec.T = 4;
  const EncoderParams base = init_params(ec);
  std::vector<double> mean(ec.D), scale(ec.D);
  for (std::size_t d = 0; d < ec.D; ++d) {
    mean[d] = rng.uniform();
    scale[d] = rng.uniform(0.1, 2.0);
  }
  EncoderParams folded = base;
  fold_input_normalization(folded, mean, scale);
  for (int trial = 0; trial < 5; ++trial) {
    const FeatureSequence x = random_clip(rng, ec.T);
    FeatureSequence xs = x;
    for (std::size_t t = 0; t < ec.T; ++t)
      for (std::size_t d = 0; d < ec.D; ++d) xs.row(t)[d] = (x.row(t)[d] - mean[d]) / scale[d];
    const auto a = forward(folded, x).values, b = forward(base, xs).values;
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-9);
  }
}

TEST(FoldInput, WhiteningMatchesTransformedInput) {
  Rng rng(6);
  EncoderConfig ec;
  ec.D = kDescriptorDim;
  ec.E = 8;
  ec.k = 16;
  ec.T = 3;
  const EncoderParams base = init_params(ec);
  Whitening w;
  w.mean.resize(ec.D);
  w.transform.resize(ec.D * ec.D);
  for (auto& v : w.mean) v = rng.uniform();
  for (auto& v : w.transform) v = rng.uniform(-0.2, 0.2);
  EncoderParams folded = base;
  fold_input_transform(folded, w);
  const FeatureSequence x = random_clip(rng, ec.T);
  FeatureSequence xw(ec.T, ec.D);
  for (std::size_t t = 0; t < ec.T; ++t)
    for (std::size_t i = 0; i < ec.D; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < ec.D; ++j) s += w.transform[i * ec.D + j] * (x.row(t)[j] - w.mean[j]);
      xw.row(t)[i] = s;
    }
  const auto a = forward(folded, x).values, b = forward(base, xw).values;
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-9);
}

TEST_F(TrainerTest, WhitenedDescriptorsHaveFlooredCovariance) {
  const double floor = 0.03;
  const Whitening w = input_whitening(*data_, floor);
  const std::size_t D = kDescriptorDim;
  ASSERT_EQ(w.transform.size(), D * D);
  // Symmetric, centred on the training frames.
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < i; ++j) EXPECT_NEAR(w.transform[i * D + j], w.transform[j * D + i], 1e-9);
  std::vector<double> mean(D, 0.0);
  std::size_t n = 0;
  for (std::size_t g = 0; g < data_->groups().m(); ++g) {
    for (const auto& f : data_->original(g).frames) {
      for (std::size_t d = 0; d < D; ++d) mean[d] += f[d];
      ++n;
    }
    for (std::size_t j = 0; j < data_->training_fakes(g); ++j)
      for (const auto& f : data_->fake(g, j).frames) {
        for (std::size_t d = 0; d < D; ++d) mean[d] += f[d];
        ++n;
      }
  }
  for (std::size_t d = 0; d < D; ++d) EXPECT_NEAR(w.mean[d], mean[d] / static_cast<double>(n), 1e-12);
}

TEST(LossModes, Names) {
  for (auto m : {LossMode::kBoth, LossMode::kIntraOnly, LossMode::kInterOnly}) {
    EXPECT_EQ(parse_loss_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_loss_mode("neither"), std::invalid_argument);
}

}  // namespace
}  // namespace hashtrace
