/*
 * kslab: k-space artefact simulation, detection and correction for cine CMR
 *
 * Copyright 2026 The kslab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <fstream>

#include "json.hpp"
#include "kslab/container.hpp"
#include "kslab/detection.hpp"
#include "test_support.hpp"

using namespace kslab;
using kslab::testing::fixture;

namespace {

LineProbabilities constant_probs(int frames, int lines, double p) {
  return {frames, lines, std::vector<double>(std::size_t(frames) * lines, p)};
}

LineFeatures random_features(int frames, int lines, std::uint64_t seed) {
  LineFeatures f{frames, lines, std::vector<double>(std::size_t(frames) * lines * kLineFeatureCount)};
  Rng rng(seed);
  for (double& v : f.values) v = rng.normal();
  return f;
}

LineMask random_labels(int frames, int lines, std::uint64_t seed) {
  LineMask m(frames, lines);
  Rng rng(seed);
  for (auto& v : m.values()) v = rng.uniform() < 0.3 ? 1 : 0;
  return m;
}

}  // namespace

TEST(LineFeatures, MatchesFrozenOracle) {
  const KSpaceSequence ks = io::load_kspace(fixture("features_kspace"));
  std::ifstream in(fixture("features_golden.json"));
  ASSERT_TRUE(in);
  const auto golden = nlohmann::json::parse(in);
  const auto raw_expected = golden.at("raw").get<std::vector<double>>();
  const auto std_expected = golden.at("standardised").get<std::vector<double>>();
  const LineFeatures raw = raw_line_features(ks);
  const LineFeatures st = extract_line_features(ks);
  ASSERT_EQ(raw.values.size(), raw_expected.size());
  for (std::size_t i = 0; i < raw_expected.size(); ++i) {
    EXPECT_NEAR(raw.values[i], raw_expected[i], 1e-10 * std::max(1.0, std::abs(raw_expected[i]))) << i;
    EXPECT_NEAR(st.values[i], std_expected[i], 1e-9) << i;
  }
}

TEST(LineFeatures, ZeroKSpaceGivesZeroFeatures) {
  const LineFeatures f = extract_line_features(KSpaceSequence(Dims{3, 4, 4}));
  // Only the line-index feature varies; every data statistic is flat and left at 0.
  for (int t = 0; t < 3; ++t) {
    for (int l = 0; l < 4; ++l) {
      for (int k = 0; k < 5; ++k) EXPECT_EQ(f(t, l, k), 0.0);
    }
  }
}

TEST(LineFeatures, StaticSequenceHasNoTemporalDifference) {
  const auto frame = kslab::testing::random_complex(Dims{1, 6, 5}, 3);
  KSpaceSequence ks(Dims{4, 6, 5});
  for (int t = 0; t < 4; ++t) std::copy(frame.values().begin(), frame.values().end(), ks.frame(t).begin());
  const LineFeatures raw = raw_line_features(ks);
  for (int t = 0; t < 4; ++t) {
    for (int l = 0; l < 6; ++l) {
      EXPECT_EQ(raw(t, l, 3), 0.0);
      EXPECT_EQ(raw(t, l, 4), 0.0);
    }
  }
}

TEST(LineFeatures, StandardisedStatisticsAreCentred) {
  const auto x = kslab::testing::random_complex(Dims{5, 12, 7}, 21);
  const LineFeatures f = extract_line_features(KSpaceSequence(x.dims(), x.values()));
  for (int k = 0; k < kLineFeatureCount; ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < f.line_count(); ++i) {
      s += f.values[i * kLineFeatureCount + k];
      s2 += f.values[i * kLineFeatureCount + k] * f.values[i * kLineFeatureCount + k];
    }
    EXPECT_NEAR(s / double(f.line_count()), 0.0, 1e-12);
    EXPECT_NEAR(s2 / double(f.line_count()), 1.0, 1e-12);
  }
}

TEST(DetectionModel, ZeroWeightsGiveOneHalf) {
  DetectionModel m;
  const auto p = predict_line_probs(m, random_features(2, 5, 1));
  for (double v : p.values) EXPECT_EQ(v, 0.5);
}

TEST(DetectionModel, LargeOutputBiasSaturates) {
  DetectionModel m;
  m.params().tensor(DetectionModel::kB2)[0] = 10.0;
  for (double v : predict_line_probs(m, random_features(2, 5, 2)).values) EXPECT_GT(v, 0.9999);
}

TEST(DetectionModel, HandComputedForwardPass) {
  DetectionModel m;
  auto w1 = m.params().tensor(DetectionModel::kW1);  // [feature][hidden]
  auto b1 = m.params().tensor(DetectionModel::kB1);
  auto w2 = m.params().tensor(DetectionModel::kW2);
  const int Hd = DetectionModel::kHidden;
  w1[0 * Hd + 0] = 1.0;
  b1[0] = 0.5;  // h0 = relu(1 + 0.5) = 1.5
  w1[1 * Hd + 1] = 1.0;  // h1 = relu(-2) = 0
  w1[2 * Hd + 2] = 2.0;
  w1[5 * Hd + 2] = 1.0;  // h2 = relu(2 * 0.5 + 3) = 4
  w2[0] = 1.0;
  w2[1] = 5.0;
  w2[2] = -0.5;
  m.params().tensor(DetectionModel::kB2)[0] = 0.25;  // logit = 1.5 - 2 + 0.25 = -0.25
  LineFeatures f{1, 1, {1.0, -2.0, 0.5, 0.0, 0.0, 3.0}};
  EXPECT_NEAR(predict_line_probs(m, f).values[0], 0.43782349911420193, 1e-15);
}

TEST(DetectionModel, ShapeMismatchIsRejected) {
  LineFeatures f{2, 3, std::vector<double>(5)};
  EXPECT_THROW(predict_line_probs(DetectionModel(), f), ValidationError);
  EXPECT_THROW(detection_loss(constant_probs(2, 3, 0.5), LineMask(3, 2)), ValidationError);
}

TEST(Threshold, TieGoesToCorrupted) {
  const LineMask all = threshold_mask(constant_probs(2, 4, 0.5), 0.5);
  EXPECT_EQ(all.count(), 8u);
  EXPECT_EQ(threshold_mask(constant_probs(2, 4, 0.3), 0.5).count(), 0u);
  LineProbabilities mixed{1, 5, {0.1, 0.49, 0.5, 0.51, 0.99}};
  EXPECT_EQ(threshold_mask(mixed, 0.5).values(), (std::vector<std::uint8_t>{0, 0, 1, 1, 1}));
  EXPECT_EQ(threshold_mask(mixed, 0.95).values(), (std::vector<std::uint8_t>{0, 0, 0, 0, 1}));
  EXPECT_THROW(threshold_mask(mixed, 0.0), ValidationError);
  EXPECT_THROW(threshold_mask(mixed, 1.0), ValidationError);
}

TEST(Threshold, MaskGrowsAsThresholdFalls) {
  Rng rng(4);
  LineProbabilities p{3, 20, std::vector<double>(60)};
  for (double& v : p.values) v = rng.uniform();
  LineMask prev = threshold_mask(p, 0.99);
  for (double tau = 0.95; tau > 0.0; tau -= 0.05) {
    const LineMask cur = threshold_mask(p, tau);
    for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_GE(cur.values()[i], prev.values()[i]);
    prev = cur;
  }
}

TEST(DetectionLoss, ReferenceValues) {
  EXPECT_NEAR(detection_loss(constant_probs(3, 4, 0.5), LineMask(3, 4)), std::log(2.0), 1e-15);
  EXPECT_NEAR(detection_loss(constant_probs(1, 1, 0.9), LineMask(1, 1, std::uint8_t(1))), 0.10536051565782628,
              1e-14);
  LineMask labels(1, 2, std::vector<std::uint8_t>{1, 0});
  LineProbabilities exact{1, 2, {1.0, 0.0}};
  EXPECT_LT(detection_loss(exact, labels), 2e-7);
}

TEST(DetectionLoss, MovingTowardTheLabelLowersLoss) {
  const LineMask labels = random_labels(2, 10, 6);
  Rng rng(6);
  LineProbabilities p{2, 10, std::vector<double>(20)};
  for (double& v : p.values) v = 0.05 + 0.9 * rng.uniform();
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double before = detection_loss(p, labels);
    LineProbabilities q = p;
    q.values[i] += labels.values()[i] ? 0.01 : -0.01;
    EXPECT_LT(detection_loss(q, labels), before);
  }
}

TEST(DetectionLoss, AnalyticGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    DetectionModel model = DetectionModel::random_init(seed);
    const LineFeatures feats = random_features(3, 7, 100 + seed);
    const LineMask labels = random_labels(3, 7, 200 + seed);
    const auto lg = detection_loss_and_grad(model, feats, labels);
    EXPECT_NEAR(lg.loss, detection_loss(predict_line_probs(model, feats), labels), 1e-12);
    const auto errors = kslab::testing::finite_difference_check(
        model.params(), lg.grad, [&] { return detection_loss(predict_line_probs(model, feats), labels); });
    ASSERT_EQ(errors.size(), 4u);
    for (const auto& e : errors) EXPECT_LT(e.relative_error, 1e-4) << e.name << " seed " << seed;
  }
}

TEST(DetectorTraining, SeparableToySetIsLearned) {
  // Feature 3 is +1 on corrupted lines and -1 elsewhere; the rest is noise.
  std::vector<LabeledLines> corpus;
  Rng rng(12);
  for (int s = 0; s < 20; ++s) {
    LabeledLines ex{random_features(2, 16, 400 + s), random_labels(2, 16, 500 + s)};
    for (std::size_t i = 0; i < ex.labels.size(); ++i) {
      ex.features.values[i * kLineFeatureCount + 3] = ex.labels.values()[i] ? 1.0 : -1.0;
    }
    corpus.push_back(std::move(ex));
  }
  DetectorTrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch = 1;
  cfg.seed = 9;
  const auto result = train_detector(corpus, cfg);
  ASSERT_EQ(result.loss_trace.size(), 200u);
  EXPECT_LT(result.loss_trace.back(), result.loss_trace.front());
  double acc = 0.0;
  for (const auto& ex : corpus) acc += line_accuracy(predict_line_probs(result.model, ex.features), ex.labels);
  EXPECT_GE(acc / double(corpus.size()), 0.99);

  const auto again = train_detector(corpus, cfg);
  EXPECT_EQ(again.model, result.model);
}

TEST(DetectorTraining, ZeroEpochsReturnsTheInitialModel) {
  std::vector<LabeledLines> corpus{{random_features(2, 4, 1), random_labels(2, 4, 2)}};
  DetectorTrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 5;
  const auto result = train_detector(corpus, cfg);
  EXPECT_TRUE(result.loss_trace.empty());
  EXPECT_EQ(result.model, DetectionModel::random_init(derive_seed(cfg.seed, 0)));
  EXPECT_THROW(train_detector(std::span<const LabeledLines>{}, cfg), ValidationError);
}

TEST(DetectorTraining, NanLossAborts) {
  std::vector<LabeledLines> corpus{{random_features(2, 4, 1), random_labels(2, 4, 2)}};
  corpus[0].features.values[3] = std::nan("");
  DetectorTrainConfig cfg;
  cfg.epochs = 3;
  EXPECT_THROW(train_detector(corpus, cfg), NumericError);
}

TEST(DetectorIo, SaveLoadRoundTripsF32Weights) {
  kslab::testing::TempDir dir("det");
  DetectionModel m = DetectionModel::random_init(44);
  for (double& v : m.params().values()) v = double(float(v));
  save_detector(dir / "model", m);
  EXPECT_EQ(load_detector(dir / "model"), m);
  io::save(dir / "img", ImageSequence(Dims{1, 4, 4}));
  EXPECT_THROW(load_detector(dir / "img"), ValidationError);
}
