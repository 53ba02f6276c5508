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

#include "sslam/model.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace sslam::model {
namespace {

using testing::random_mat;
using testing::random_spec;

EncoderConfig small(int depth = 2, int width = 8) {
  EncoderConfig c;
  c.depth = depth;
  c.width = width;
  c.heads = 2;
  c.decoder_layers = 2;
  return c;
}

// Replaces every parameter with N(0, sd^2) so blocks do real work.
void randomize(ParamStore& p, std::mt19937_64& rng, double sd = 0.3) {
  for (auto& [name, v] : p.entries())
    v->value = random_mat(static_cast<int>(v->value.rows()), static_cast<int>(v->value.cols()),
                          rng, sd);
}

TEST(InitStudent, NamesAndShapes) {
  std::mt19937_64 rng(1);
  const EncoderConfig c = small();
  const ParamStore p = init_student(c, patch::PatchGrid{2, 6}, rng);
  EXPECT_EQ(p.get("encoder.patch_embed.weight")->value.rows(), 256);
  EXPECT_EQ(p.get("encoder.blocks.1.attn.qkv.weight")->value.cols(), 24);
  EXPECT_EQ(p.get("encoder.blocks.0.mlp.fc1.weight")->value.cols(), 32);
  EXPECT_EQ(p.get("decoder.blocks.1.conv.weight")->value.rows(), 72);
  EXPECT_FALSE(p.contains("encoder.pos_embed"));
  EXPECT_LE(p.get("encoder.patch_embed.weight")->value.cwiseAbs().maxCoeff(), 0.04 + 1e-12);
  EncoderConfig learned = c;
  learned.positional = PositionalEncoding::kLearned;
  EXPECT_EQ(init_student(learned, patch::PatchGrid{2, 6}, rng).get("encoder.pos_embed")->value.rows(),
            12);
}

TEST(Config, ValidateRejectsBadWidth) {
  EncoderConfig c = small();
  c.heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small(2, 6);
  c.heads = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_NO_THROW(EncoderConfig::full().validate());
}

TEST(MakeTeacher, FrozenEncoderCopy) {
  std::mt19937_64 rng(2);
  const ParamStore s = init_student(small(), patch::PatchGrid{2, 6}, rng);
  const ParamStore t = make_teacher(s);
  EXPECT_FALSE(t.contains("decoder.head.weight"));
  EXPECT_TRUE(t.contains("encoder.cls_token"));
  for (const auto& [name, v] : t.entries()) {
    EXPECT_FALSE(v->requires_grad);
    EXPECT_EQ(v->value, s.get(name)->value);
    EXPECT_NE(v.get(), s.get(name).get());
  }
}

TEST(StudentForward, ZeroResidualBranchesAreIdentity) {
  std::mt19937_64 rng(3);
  const EncoderConfig c = small();
  ParamStore p = init_student(c, patch::PatchGrid{2, 6}, rng);
  randomize(p, rng);
  zero_residual_branches(p, c);
  const patch::TokenSequence seq = with_cls(embed(random_spec(96, 32, rng), p, c), p);
  const StudentOutputs out = student_forward(seq, p, c);
  EXPECT_EQ(out.cls->value, seq.tokens->value.topRows(1));
  EXPECT_EQ(out.tokens->value, seq.tokens->value.bottomRows(12));
}

TEST(StudentForward, Shapes) {
  std::mt19937_64 rng(4);
  const EncoderConfig c = small();
  const ParamStore p = init_student(c, patch::PatchGrid{2, 6}, rng);
  const patch::TokenSequence seq = with_cls(embed(random_spec(96, 32, rng), p, c), p);
  const StudentOutputs out = student_forward(seq, p, c);
  EXPECT_EQ(out.tokens->value.rows() + out.cls->value.rows(), 13);
  EXPECT_EQ(out.tokens->value.cols(), 8);
  EXPECT_EQ(out.positions.size(), 12u);
  EXPECT_THROW(student_forward(embed(random_spec(96, 32, rng), p, c), p, c),
               std::invalid_argument);
}

// Straight-line pre-norm block: LN, single-head attention, residual, LN,
// GELU MLP, residual.
Mat reference_block(const Mat& x, const ParamStore& p, double eps) {
  auto ln = [&](const Mat& in, const std::string& n) {
    Mat y = in;
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
      double mu = 0, var = 0;
      for (Eigen::Index j = 0; j < in.cols(); ++j) mu += in(i, j);
      mu /= in.cols();
      for (Eigen::Index j = 0; j < in.cols(); ++j) var += (in(i, j) - mu) * (in(i, j) - mu);
      var /= in.cols();
      for (Eigen::Index j = 0; j < in.cols(); ++j)
        y(i, j) = (in(i, j) - mu) / std::sqrt(var + eps) *
                      p.get("encoder.blocks.0." + n + ".weight")->value(0, j) +
                  p.get("encoder.blocks.0." + n + ".bias")->value(0, j);
    }
    return y;
  };
  auto lin = [&](const Mat& in, const std::string& n) {
    const Mat& w = p.get("encoder.blocks.0." + n + ".weight")->value;
    const Mat& b = p.get("encoder.blocks.0." + n + ".bias")->value;
    Mat y(in.rows(), w.cols());
    for (Eigen::Index i = 0; i < in.rows(); ++i)
      for (Eigen::Index o = 0; o < w.cols(); ++o) {
        double acc = b(0, o);
        for (Eigen::Index k = 0; k < in.cols(); ++k) acc += in(i, k) * w(k, o);
        y(i, o) = acc;
      }
    return y;
  };
  const int n = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  const Mat qkv = lin(ln(x, "norm1"), "attn.qkv");
  Mat att = Mat::Zero(n, w);
  for (int i = 0; i < n; ++i) {
    std::vector<double> score(n);
    double z = 0;
    for (int j = 0; j < n; ++j) {
      double d = 0;
      for (int k = 0; k < w; ++k) d += qkv(i, k) * qkv(j, w + k);
      score[j] = std::exp(d / std::sqrt(static_cast<double>(w)));
      z += score[j];
    }
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < w; ++k) att(i, k) += score[j] / z * qkv(j, 2 * w + k);
  }
  const Mat h = x + lin(att, "attn.proj");
  Mat m = lin(ln(h, "norm2"), "mlp.fc1");
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    m.data()[i] = 0.5 * v * (1 + std::erf(v / std::sqrt(2.0)));
  }
  return h + lin(m, "mlp.fc2");
}

TEST(StudentForward, TwoTokenSingleLayerOracle) {
  std::mt19937_64 rng(5);
  EncoderConfig c;
  c.depth = 1;
  c.width = 4;
  c.heads = 1;
  c.decoder_layers = 1;
  ParamStore p = init_student(c, patch::PatchGrid{1, 1}, rng);
  randomize(p, rng, 0.5);
  const Mat x = random_mat(2, 4, rng);
  patch::TokenSequence seq{ag::constant(x), {patch::kClsPosition, 0}, true};
  const StudentOutputs out = student_forward(seq, p, c);
  const Mat want = reference_block(x, p, c.ln_eps);
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(out.cls->value(0, j), want(0, j), 1e-12);
    EXPECT_NEAR(out.tokens->value(0, j), want(1, j), 1e-12);
  }
}

TEST(Encode, PermutationEquivariantWithoutPositions) {
  std::mt19937_64 rng(6);
  const EncoderConfig c = small();
  ParamStore p = init_student(c, patch::PatchGrid{1, 3}, rng);
  randomize(p, rng);
  const Mat x = random_mat(3, 8, rng);
  Mat xp(3, 8);
  const int perm[3] = {2, 0, 1};
  for (int i = 0; i < 3; ++i) xp.row(i) = x.row(perm[i]);
  const Mat y = encode(ag::constant(x), p, c)->value;
  const Mat yp = encode(ag::constant(xp), p, c)->value;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(yp(i, j), y(perm[i], j), 1e-12);
}

TEST(Decode, IdentityStackReturnsFillers) {
  std::mt19937_64 rng(7);
  const EncoderConfig c = small();
  const patch::PatchGrid g{2, 6};
  ParamStore p = init_student(c, g, rng);
  identity_decoder(p, c);
  const patch::TokenSequence seq = embed(random_spec(96, 32, rng), p, c);
  const patch::MaskSet m = patch::sample_inverse_block_mask(g, 0.25, 2, rng).mask;
  const StudentOutputs so =
      student_forward(with_cls(patch::drop_masked(seq, m, g), p), p, c);
  Mat filler;
  const ag::Var y = decode(so, m, g, p, c, rng, &filler);
  ASSERT_EQ(y->value.rows(), static_cast<Eigen::Index>(m.masked.size()));
  for (size_t i = 0; i < m.masked.size(); ++i)
    EXPECT_EQ(RowVec(y->value.row(i)), RowVec(filler.row(m.masked[i])));
}

TEST(Decode, OneLayerMatchesConvolutionLoop) {
  std::mt19937_64 rng(8);
  EncoderConfig c = small(1, 4);
  c.decoder_layers = 1;
  const patch::PatchGrid g{2, 2};
  ParamStore p = init_student(c, g, rng);
  randomize(p, rng, 0.5);
  patch::MaskSet m;
  m.visible = {0, 3};
  m.masked = {1, 2};
  StudentOutputs so{ag::constant(random_mat(2, 4, rng)), ag::constant(Mat::Zero(1, 4)), {0, 3}};
  std::mt19937_64 fill_rng(11);
  Mat filler;
  const Mat y = decode(so, m, g, p, c, fill_rng, &filler)->value;

  Mat grid = filler;
  grid.row(0) = so.tokens->value.row(0);
  grid.row(3) = so.tokens->value.row(1);
  const Mat& w = p.get("decoder.blocks.0.conv.weight")->value;
  Mat conv(4, 4);
  for (int col = 0; col < 2; ++col)
    for (int row = 0; row < 2; ++row)
      for (int o = 0; o < 4; ++o) {
        double acc = p.get("decoder.blocks.0.conv.bias")->value(0, o);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int r = row + dr, q = col + dc;
            if (r < 0 || r > 1 || q < 0 || q > 1) continue;
            for (int i = 0; i < 4; ++i)
              acc += grid(q * 2 + r, i) * w(((dr + 1) * 3 + dc + 1) * 4 + i, o);
          }
        conv(col * 2 + row, o) = acc;
      }
  for (int k = 0; k < 4; ++k) {
    const double mu = conv.row(k).mean();
    const double var = (conv.row(k).array() - mu).square().mean();
    for (int o = 0; o < 4; ++o) {
      const double n = (conv(k, o) - mu) / std::sqrt(var + c.ln_eps) *
                           p.get("decoder.blocks.0.norm.weight")->value(0, o) +
                       p.get("decoder.blocks.0.norm.bias")->value(0, o);
      grid(k, o) += 0.5 * n * (1 + std::erf(n / std::sqrt(2.0)));
    }
  }
  const Mat head = grid * p.get("decoder.head.weight")->value;
  for (int i = 0; i < 2; ++i)
    for (int o = 0; o < 4; ++o)
      EXPECT_NEAR(y(i, o), head(m.masked[i], o) + p.get("decoder.head.bias")->value(0, o), 1e-12);
}

TEST(Decode, VisibleGradientsIgnoreFillerSeed) {
  std::mt19937_64 rng(9);
  const EncoderConfig c = small();
  const patch::PatchGrid g{2, 6};
  ParamStore p = init_student(c, g, rng);
  identity_decoder(p, c);
  p.get("decoder.head.weight")->value = random_mat(8, 8, rng);
  const patch::MaskSet m = patch::sample_inverse_block_mask(g, 0.25, 2, rng).mask;
  const Mat v = random_mat(static_cast<int>(m.visible.size()), 8, rng);
  const Mat target = random_mat(static_cast<int>(m.masked.size()), 8, rng);
  auto grad_for_seed = [&](std::uint64_t seed) {
    StudentOutputs so{ag::parameter(v), ag::constant(Mat::Zero(1, 8)), m.visible};
    std::mt19937_64 r(seed);
    ag::backward(ag::sq_err_sum(decode(so, m, g, p, c, r), target));
    return so.tokens->grad.size() ? so.tokens->grad : Mat(Mat::Zero(v.rows(), v.cols()));
  };
  EXPECT_EQ(grad_for_seed(1), grad_for_seed(2));
}

TEST(TeacherForward, EqualParamsGiveStudentTokens) {
  std::mt19937_64 rng(10);
  const EncoderConfig c = small();
  ParamStore s = init_student(c, patch::PatchGrid{2, 6}, rng);
  randomize(s, rng);
  const ParamStore t = make_teacher(s);
  const patch::TokenSequence seq = with_cls(embed(random_spec(96, 32, rng), s, c), s);
  const LayerOutputs lo = teacher_forward(seq, t, c);
  EXPECT_EQ(lo.layers.size(), 2u);
  EXPECT_EQ(lo.layers.back(), student_forward(seq, s, c).tokens->value);
}

TEST(TeacherForward, LayerEqualsPrefixForward) {
  std::mt19937_64 rng(11);
  const EncoderConfig c = small(3);
  ParamStore s = init_student(c, patch::PatchGrid{2, 6}, rng);
  randomize(s, rng);
  const patch::TokenSequence seq = with_cls(embed(random_spec(96, 32, rng), s, c), s);
  const LayerOutputs lo = teacher_forward(seq, s, c);
  for (int l = 1; l <= 3; ++l) {
    const Mat prefix = encode(ag::constant(seq.tokens->value), s, c, nullptr, l)->value;
    EXPECT_EQ(lo.layers[l - 1], prefix.bottomRows(12)) << "layer " << l;
  }
}

TEST(BuildTargets, TopOneIsFinalLayer) {
  std::mt19937_64 rng(12);
  LayerOutputs lo{{random_mat(5, 4, rng), random_mat(5, 4, rng)}, {0, 1, 2, 3, 4}};
  EXPECT_EQ(build_targets(lo, 1, false).z, lo.layers[1]);
  EXPECT_EQ(build_targets(lo, 1, true).z, standardize_rows(lo.layers[1]));
}

TEST(BuildTargets, EqualLayersAverageToEither) {
  std::mt19937_64 rng(13);
  const Mat l = random_mat(5, 4, rng);
  LayerOutputs lo{{l, l}, {0, 1, 2, 3, 4}};
  const Targets t = build_targets(lo, 2, false);
  EXPECT_TRUE(t.z.isApprox(l, 1e-15));
}

TEST(BuildTargets, MeanOracleAndPooling) {
  std::mt19937_64 rng(14);
  LayerOutputs lo;
  for (int i = 0; i < 4; ++i) lo.layers.push_back(random_mat(6, 4, rng));
  lo.positions = {0, 2, 4, 6, 8, 10};
  const Targets t = build_targets(lo, 3, false);
  for (int r = 0; r < 6; ++r)
    for (int j = 0; j < 4; ++j) {
      const double want = (lo.layers[1](r, j) + lo.layers[2](r, j) + lo.layers[3](r, j)) / 3.0;
      EXPECT_NEAR(t.z(r, j), want, 1e-15);
    }
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(t.z_cls(j), t.z.col(j).mean(), 1e-15);
  EXPECT_EQ(t.row_of(4), 2);
  EXPECT_EQ(t.row_of(5), -1);
  EXPECT_THROW(build_targets(lo, 5, false), std::invalid_argument);
}

TEST(StandardizeRows, ZeroMeanUnitStd) {
  std::mt19937_64 rng(15);
  const Mat z = standardize_rows(random_mat(20, 16, rng, 5.0));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mu = z.row(r).mean();
    const double sd = std::sqrt((z.row(r).array() - mu).square().mean());
    EXPECT_LT(std::abs(mu), 1e-6);
    EXPECT_LT(std::abs(sd - 1.0), 1e-4);
  }
}

TEST(Ema, ScalarCase) {
  ParamStore t, s;
  t.add("encoder.w", Mat::Constant(1, 1, 1.0), false);
  s.add("encoder.w", Mat::Constant(1, 1, 0.0));
  ema_update(t, s, 0.9);
  EXPECT_DOUBLE_EQ(t.get("encoder.w")->value(0, 0), 0.9);
  ema_update(t, s, 1.0);
  EXPECT_DOUBLE_EQ(t.get("encoder.w")->value(0, 0), 0.9);
  EXPECT_THROW(ema_update(t, s, 1.5), std::invalid_argument);
}

TEST(Ema, ClosedFormAfterManySteps) {
  std::mt19937_64 rng(16);
  ParamStore t, s;
  const Mat t0 = random_mat(3, 3, rng), target = random_mat(3, 3, rng);
  t.add("encoder.w", t0, false);
  s.add("encoder.w", target);
  const double tau = 0.995;
  for (int n = 0; n < 1000; ++n) ema_update(t, s, tau);
  const double tn = std::pow(tau, 1000);
  const Mat want = tn * t0 + (1 - tn) * target;
  EXPECT_LT((t.get("encoder.w")->value - want).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(MomentumSchedule, EndpointsMidpointMonotone) {
  EXPECT_EQ(momentum_schedule(0, 100, 0.999, 0.99999), 0.999);
  EXPECT_EQ(momentum_schedule(100, 100, 0.999, 0.99999), 0.99999);
  EXPECT_NEAR(momentum_schedule(50, 100, 0.999, 0.99999), (0.999 + 0.99999) / 2, 1e-15);
  double prev = 0;
  for (int s = 0; s <= 120; ++s) {
    const double v = momentum_schedule(s, 100, 0.999, 0.99999);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_THROW(momentum_schedule(0, 10, 0.99, 0.9), std::invalid_argument);
}

TEST(ParamStore, CopyAndEquality) {
  ParamStore p;
  p.add("encoder.a", Mat::Ones(2, 2));
  p.add("decoder.b", Mat::Zero(1, 2));
  EXPECT_EQ(p.scalar_count(), 6u);
  ParamStore q = p.copy(true);
  EXPECT_TRUE(p == q);
  q.get("encoder.a")->value(0, 0) = 2.0;
  EXPECT_FALSE(p == q);
  EXPECT_THROW(p.add("encoder.a", Mat::Ones(1, 1)), std::invalid_argument);
  EXPECT_THROW(p.get("missing"), std::invalid_argument);
}

}  // namespace
}  // namespace sslam::model
