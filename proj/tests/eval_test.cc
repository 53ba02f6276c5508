// Copyright 2026 The SSLAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sslam/eval.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.h"
#include "test_util.h"

namespace sslam::eval {
namespace {

using testing::random_mat;

model::EncoderConfig small() {
  model::EncoderConfig c;
  c.depth = 2;
  c.width = 8;
  c.heads = 2;
  c.decoder_layers = 1;
  return c;
}

TEST(PoolTokens, ConstantAndMean) {
  Mat same(5, 3);
  same.rowwise() = RowVec((RowVec(3) << 1.0, -2.0, 0.5).finished());
  EXPECT_EQ(pool_tokens(same), RowVec(same.row(0)));
  std::mt19937_64 rng(1);
  const Mat x = random_mat(7, 4, rng);
  const RowVec p = pool_tokens(x);
  for (int j = 0; j < 4; ++j) {
    double s = 0;
    for (int i = 0; i < 7; ++i) s += x(i, j);
    EXPECT_NEAR(p(j), s / 7, 1e-15);
  }
}

TEST(ExtractEmbedding, WidthAndFinalLayerMean) {
  std::mt19937_64 rng(2);
  const model::EncoderConfig c = small();
  const model::ParamStore p = model::init_student(c, patch::PatchGrid{2, 6}, rng);
  const auto spec = testing::random_spec(96, 32, rng);
  const RowVec e = extract_embedding(p, c, spec);
  EXPECT_EQ(e.cols(), 8);
  const model::LayerOutputs lo =
      model::teacher_forward(model::with_cls(model::embed(spec, p, c), p), p, c);
  EXPECT_TRUE(e.isApprox(pool_tokens(lo.layers.back()), 1e-14));
}

// Two Gaussian blobs along the first coordinate.
void separable(int n, std::mt19937_64& rng, Mat& x, Labels& y) {
  x = random_mat(n, 4, rng, 0.3);
  y.assign(n, std::vector<int>(2, 0));
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    x(i, 0) += c ? 2.0 : -2.0;
    y[i][c] = 1;
  }
}

TEST(LinearProbe, SeparableReachesFullAccuracy) {
  std::mt19937_64 rng(3);
  Mat x;
  Labels y;
  separable(64, rng, x, y);
  ProbeConfig pc;
  pc.epochs = 30;
  pc.batch_size = 16;
  pc.peak_lr = 5e-2;
  pc.multilabel = false;
  const ProbeResult r = train_linear_probe(x, y, pc);
  std::vector<int> truth;
  for (const auto& row : y) truth.push_back(row[1]);
  EXPECT_EQ(accuracy(argmax_rows(r.head.logits(x)), truth), 1.0);
}

TEST(LinearProbe, ZeroEpochsKeepsInit) {
  std::mt19937_64 rng(4);
  Mat x;
  Labels y;
  separable(16, rng, x, y);
  ProbeConfig pc;
  pc.epochs = 0;
  const ProbeResult a = train_linear_probe(x, y, pc);
  const ProbeResult b = train_linear_probe(x, y, pc);
  EXPECT_EQ(a.head.weight, b.head.weight);
  EXPECT_TRUE(a.head.bias.isZero(0.0));
  EXPECT_EQ(a.loss_trace.size(), 1u);
}

TEST(LinearProbe, FinalLossNotAboveInitial) {
  std::mt19937_64 rng(5);
  const Mat x = random_mat(40, 6, rng);
  Labels y(40, std::vector<int>(3, 0));
  for (int i = 0; i < 40; ++i) y[i][i % 3] = 1, y[i][(i / 3) % 3] = 1;
  ProbeConfig pc;
  pc.epochs = 20;
  pc.batch_size = 8;
  const ProbeResult r = train_linear_probe(x, y, pc);
  ASSERT_EQ(r.loss_trace.size(), 21u);
  EXPECT_LE(r.loss_trace.back(), r.loss_trace.front());
  EXPECT_NEAR(r.loss_trace.back(), probe_loss(r.head, x, y, true), 1e-12);
}

TEST(LinearProbe, BackboneUntouched) {
  std::mt19937_64 rng(6);
  const model::EncoderConfig c = small();
  const model::ParamStore p = model::init_student(c, patch::PatchGrid{2, 6}, rng);
  const model::ParamStore snapshot = p.copy(true);
  std::vector<dsp::LogMelSpectrogram> specs;
  for (int i = 0; i < 6; ++i) specs.push_back(testing::random_spec(96, 32, rng));
  std::vector<const dsp::LogMelSpectrogram*> ptrs;
  for (const auto& s : specs) ptrs.push_back(&s);
  Labels y(6, std::vector<int>{1, 0});
  for (int i = 0; i < 6; i += 2) y[i] = {0, 1};
  ProbeConfig pc;
  pc.epochs = 3;
  train_linear_probe(extract_embeddings(p, c, ptrs), y, pc);
  EXPECT_TRUE(p == snapshot);
}

TEST(FineTune, ZeroLrKeepsEncoderAndOneStepMovesIt) {
  std::mt19937_64 rng(7);
  const model::EncoderConfig c = small();
  const model::ParamStore p = model::init_student(c, patch::PatchGrid{2, 6}, rng).copy(true, "encoder.");
  const model::ParamStore snapshot = p.copy(true);
  std::vector<dsp::LogMelSpectrogram> specs;
  for (int i = 0; i < 4; ++i) specs.push_back(testing::random_spec(96, 32, rng));
  std::vector<const dsp::LogMelSpectrogram*> ptrs;
  for (const auto& s : specs) ptrs.push_back(&s);
  const Labels y = {{1, 0}, {0, 1}, {1, 0}, {0, 1}};
  FineTuneConfig ft;
  ft.steps = 2;
  ft.warmup_steps = 0;
  ft.batch_size = 2;
  ft.peak_lr = 0.0;
  ft.min_lr = 0.0;
  ft.weight_decay = 0.0;
  EXPECT_TRUE(fine_tune(p, c, ptrs, y, ft).encoder == p);
  ft.steps = 1;
  ft.peak_lr = 1e-3;
  ft.min_lr = 1e-3;
  const FineTuneResult r = fine_tune(p, c, ptrs, y, ft);
  EXPECT_FALSE(r.encoder == p);
  EXPECT_TRUE(p == snapshot);
}

TEST(FineTune, ToyLossDecreases) {
  std::mt19937_64 rng(8);
  const model::EncoderConfig c = small();
  const model::ParamStore p = model::init_student(c, patch::PatchGrid{2, 6}, rng).copy(true, "encoder.");
  std::vector<dsp::LogMelSpectrogram> specs;
  Labels y;
  for (int i = 0; i < 8; ++i) {
    dsp::LogMelSpectrogram s = testing::random_spec(96, 32, rng);
    if (i % 2) s.data.array() += 1.5;
    specs.push_back(s);
    y.push_back(i % 2 ? std::vector<int>{0, 1} : std::vector<int>{1, 0});
  }
  std::vector<const dsp::LogMelSpectrogram*> ptrs;
  for (const auto& s : specs) ptrs.push_back(&s);
  FineTuneConfig ft;
  ft.steps = 50;
  ft.batch_size = 4;
  ft.peak_lr = 3e-3;
  const FineTuneResult r = fine_tune(p, c, ptrs, y, ft);
  ASSERT_EQ(r.loss_trace.size(), 50u);
  double head = 0, tail = 0;
  for (int i = 0; i < 5; ++i) head += r.loss_trace[i], tail += r.loss_trace[45 + i];
  EXPECT_LT(tail, head);
}

TEST(AveragePrecision, HandCases) {
  const std::vector<double> s = {0.9, 0.8, 0.1};
  EXPECT_EQ(average_precision(s, std::vector<int>{1, 1, 0}), 1.0);
  EXPECT_EQ(average_precision(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}), 0.5);
  EXPECT_THROW(average_precision(s, std::vector<int>{0, 0, 0}), std::invalid_argument);
}

TEST(AveragePrecision, MatchesRankWalkOracle) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int n = 0; n < 500; ++n) {
    std::vector<double> s(20);
    std::vector<int> r(20);
    for (int i = 0; i < 20; ++i) {
      s[i] = n % 2 ? coarse(rng) : std::uniform_real_distribution<double>(0, 1)(rng);
      r[i] = (rng() % 3) == 0;
    }
    r[n % 20] = 1;
    EXPECT_NEAR(average_precision(s, r), oracle::average_precision(s, r), 1e-12);
  }
}

TEST(AveragePrecision, MonotoneTransformInvariant) {
  std::mt19937_64 rng(10);
  std::vector<double> s(30), t(30);
  std::vector<int> r(30);
  for (int i = 0; i < 30; ++i) {
    s[i] = std::normal_distribution<double>(0, 1)(rng);
    t[i] = std::exp(3 * s[i]) + 7;
    r[i] = i % 4 == 0;
  }
  EXPECT_EQ(average_precision(s, r), average_precision(t, r));
}

TEST(MeanAveragePrecision, SingleClassAndHandMean) {
  Mat s(2, 1);
  s << 0.9, 0.1;
  EXPECT_EQ(mean_average_precision(s, {{0}, {1}}).map, 0.5);
  Mat two(2, 2);
  two << 0.9, 0.9, 0.1, 0.1;
  const MapResult m = mean_average_precision(two, {{1, 0}, {0, 1}});
  EXPECT_EQ(m.map, 0.75);
}

TEST(MeanAveragePrecision, PerfectInvertedAndSkipped) {
  Mat s(2, 2);
  s << 1, 0, 0, 1;
  EXPECT_EQ(mean_average_precision(s, {{1, 0}, {0, 1}}).map, 1.0);
  EXPECT_EQ(mean_average_precision(-s, {{1, 0}, {0, 1}}).map, 0.5);
  Mat three(2, 3);
  three << 1, 0, 0, 0, 1, 0;
  const MapResult m = mean_average_precision(three, {{1, 0, 0}, {0, 1, 0}});
  EXPECT_EQ(m.skipped, std::vector<int>{2});
  EXPECT_TRUE(std::isnan(m.per_class[2]));
  EXPECT_EQ(m.map, 1.0);
}

TEST(MeanAveragePrecision, MatchesPerClassOracle) {
  std::mt19937_64 rng(11);
  const Mat s = random_mat(30, 5, rng);
  Labels y(30, std::vector<int>(5, 0));
  for (int i = 0; i < 30; ++i)
    for (int c = 0; c < 5; ++c) y[i][c] = (i + c) % 3 == 0;
  double want = 0;
  for (int c = 0; c < 5; ++c) {
    std::vector<double> col(30);
    std::vector<int> rel(30);
    for (int i = 0; i < 30; ++i) col[i] = s(i, c), rel[i] = y[i][c];
    want += oracle::average_precision(col, rel) / 5;
  }
  EXPECT_NEAR(mean_average_precision(s, y).map, want, 1e-12);
}

TEST(Accuracy, Fraction) {
  EXPECT_EQ(accuracy(std::vector<int>{1, 2, 3, 4}, std::vector<int>{1, 0, 3, 0}), 0.5);
  Mat m(2, 3);
  m << 0, 5, 1, 9, 2, 9;
  EXPECT_EQ(argmax_rows(m), (std::vector<int>{1, 0}));
}

TEST(EvalReport, JsonFields) {
  EvalReport r;
  r.metric = "mAP";
  r.value = 0.5;
  r.per_class_ap = {0.5, std::nan("")};
  r.skipped_classes = {1};
  r.n_train = 3;
  r.n_eval = 2;
  r.config_hash = hash_text("x");
  const auto j = r.to_json();
  EXPECT_EQ(j["metric"], "mAP");
  EXPECT_EQ(j["value"], 0.5);
  EXPECT_TRUE(j["per_class_ap"][1].is_null());
  EXPECT_EQ(hash_text("x"), hash_text("x"));
  EXPECT_NE(hash_text("x"), hash_text("y"));
  EXPECT_EQ(hash_text("").size(), 16u);
}

}  // namespace
}  // namespace sslam::eval
