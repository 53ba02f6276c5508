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

#include "sslam/autograd.h"

#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.h"

namespace sslam::ag {
namespace {

using testing::random_mat;

// Reduces any output to a scalar through a fixed random projection so every
// output element contributes a distinct weight to the gradient.
Var project(const Var& y, std::mt19937_64& rng) {
  return sq_err_sum(y, random_mat(static_cast<int>(y->value.rows()),
                                  static_cast<int>(y->value.cols()), rng));
}

void check_gradients(std::vector<Var> inputs, const std::function<Var()>& f,
                     double tol = 1e-6) {
  for (auto& v : inputs) v->grad.resize(0, 0);
  Var out = f();
  backward(out);
  const double h = 1e-5;
  for (size_t n = 0; n < inputs.size(); ++n) {
    Var& v = inputs[n];
    ASSERT_EQ(v->grad.rows(), v->value.rows()) << "input " << n;
    for (Eigen::Index i = 0; i < v->value.size(); ++i) {
      const double keep = v->value.data()[i];
      v->value.data()[i] = keep + h;
      const double up = f()->scalar();
      v->value.data()[i] = keep - h;
      const double down = f()->scalar();
      v->value.data()[i] = keep;
      const double fd = (up - down) / (2 * h);
      EXPECT_NEAR(v->grad.data()[i], fd, tol * std::max(1.0, std::abs(fd)))
          << "input " << n << " element " << i;
    }
  }
}

class OpGradient : public ::testing::Test {
 protected:
  std::mt19937_64 rng{7};
  Mat target(int r, int c) { return random_mat(r, c, proj_rng_); }
  std::mt19937_64 proj_rng_{99};
};

TEST_F(OpGradient, LinearAddScale) {
  Var x = parameter(random_mat(3, 4, rng));
  Var w = parameter(random_mat(4, 5, rng));
  Var b = parameter(random_mat(1, 5, rng));
  const Mat t = target(3, 5);
  check_gradients({x, w, b}, [&] {
    return sq_err_sum(scale(add(linear(x, w, b), linear(x, w, nullptr)), 0.7), t);
  });
}

TEST_F(OpGradient, LayerNormAndGelu) {
  Var x = parameter(random_mat(4, 6, rng));
  Var g = parameter(random_mat(1, 6, rng));
  Var b = parameter(random_mat(1, 6, rng));
  const Mat t = target(4, 6);
  check_gradients({x, g, b}, [&] { return sq_err_sum(gelu(layer_norm(x, g, b, 1e-6)), t); });
}

TEST_F(OpGradient, SelfAttention) {
  Var qkv = parameter(random_mat(5, 12, rng));
  const Mat t = target(5, 4);
  check_gradients({qkv}, [&] { return sq_err_sum(self_attention(qkv, 2), t); });
}

TEST_F(OpGradient, RowOps) {
  Var a = parameter(random_mat(5, 3, rng));
  Var b = parameter(random_mat(2, 3, rng));
  const std::vector<int> rows = {4, 0, 4, 2};
  const std::vector<int> cells = {1, 3};
  const Mat filler = random_mat(6, 3, rng);
  const Mat t1 = target(4, 3), t2 = target(1, 3), t3 = target(6, 3), t4 = target(7, 3);
  const Mat t5 = target(2, 3);
  check_gradients({a, b}, [&] {
    Var cat = concat_rows(a, b);
    std::vector<Var> parts = {sq_err_sum(gather_rows(a, rows), t1),
                              sq_err_sum(mean_rows(b), t2),
                              sq_err_sum(scatter_rows(b, cells, filler), t3),
                              sq_err_sum(cat, t4),
                              sq_err_sum(slice_rows(cat, 3, 2), t5)};
    const std::vector<double> w = {1.0, 2.0, 0.5, 1.5, 3.0};
    return weighted_sum(parts, w);
  });
}

TEST_F(OpGradient, AverageAndAddConst) {
  Var a = parameter(random_mat(2, 3, rng));
  Var b = parameter(random_mat(2, 3, rng));
  const Mat c = random_mat(2, 3, rng);
  const Mat t = target(2, 3);
  check_gradients({a, b}, [&] {
    std::vector<Var> xs = {a, b, a};
    return sq_err_sum(add_const(average(xs), c), t);
  });
}

TEST_F(OpGradient, Conv3x3Grid) {
  Var x = parameter(random_mat(6, 2, rng));
  Var w = parameter(random_mat(18, 3, rng));
  Var b = parameter(random_mat(1, 3, rng));
  const Mat t = target(6, 3);
  check_gradients({x, w, b}, [&] { return sq_err_sum(conv3x3_grid(x, w, b, 2, 3), t); });
}

TEST_F(OpGradient, ClassificationLosses) {
  Var z = parameter(random_mat(4, 3, rng));
  Mat y(4, 3);
  y << 1, 0, 1, 0, 0, 0, 1, 1, 1, 0, 1, 0;
  const std::vector<int> cls = {2, 0, 1, 1};
  check_gradients({z}, [&] {
    std::vector<Var> parts = {bce_logits_sum(z, y), softmax_ce_sum(z, cls)};
    const std::vector<double> w = {1.0, 1.0};
    return weighted_sum(parts, w);
  });
}

TEST(Conv3x3Grid, MatchesExplicitLoop) {
  std::mt19937_64 rng(3);
  const int rows = 2, cols = 2, c = 3, co = 2;
  const Mat x = random_mat(rows * cols, c, rng);
  const Mat w = random_mat(9 * c, co, rng);
  const Mat b = random_mat(1, co, rng);
  const Mat y = conv3x3_grid(constant(x), constant(w), constant(b), rows, cols)->value;
  for (int col = 0; col < cols; ++col) {
    for (int row = 0; row < rows; ++row) {
      for (int o = 0; o < co; ++o) {
        double acc = b(0, o);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int r = row + dr, q = col + dc;
            if (r < 0 || r >= rows || q < 0 || q >= cols) continue;
            const int tap = (dr + 1) * 3 + (dc + 1);
            for (int i = 0; i < c; ++i) acc += x(q * rows + r, i) * w(tap * c + i, o);
          }
        }
        EXPECT_NEAR(y(col * rows + row, o), acc, 1e-12);
      }
    }
  }
}

TEST(Backward, ConstantsCollectNoGradient) {
  Var a = constant(Mat::Ones(2, 2));
  Var p = parameter(Mat::Ones(2, 2));
  Var out = sq_err_sum(add(a, p), Mat::Zero(2, 2));
  backward(out);
  EXPECT_EQ(a->grad.size(), 0);
  EXPECT_TRUE(p->grad.isApprox(Mat::Constant(2, 2, 4.0)));
}

TEST(Backward, SharedSubgraphAccumulates) {
  Var p = parameter(Mat::Constant(1, 1, 3.0));
  Var s = scale(p, 2.0);
  Var out = weighted_sum(std::vector<Var>{sq_err_sum(s, Mat::Zero(1, 1)),
                                          sq_err_sum(s, Mat::Zero(1, 1))},
                         std::vector<double>{1.0, 1.0});
  backward(out);
  // d/dp 2 * (2p)^2 = 16 p.
  EXPECT_DOUBLE_EQ(p->grad(0, 0), 48.0);
}

TEST(Shapes, MismatchesThrow) {
  EXPECT_THROW(linear(constant(Mat::Ones(2, 3)), constant(Mat::Ones(2, 2)), nullptr),
               std::invalid_argument);
  EXPECT_THROW(self_attention(constant(Mat::Ones(2, 7)), 2), std::invalid_argument);
  EXPECT_THROW(conv3x3_grid(constant(Mat::Ones(5, 1)), constant(Mat::Ones(9, 1)), nullptr, 2, 2),
               std::invalid_argument);
}

}  // namespace
}  // namespace sslam::ag
