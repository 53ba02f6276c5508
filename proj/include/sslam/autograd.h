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

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every op is coarse grained (a whole linear layer, a whole
// multi-head attention) so the graph stays small.
//
// Gradients are tracked only when at least one input requires them; a
// forward pass over frozen leaves (the EMA teacher) builds no graph at all.

#ifndef SSLAM_AUTOGRAD_H_
#define SSLAM_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sslam {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

namespace ag {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Mat value;
  Mat grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Mat& g);
  template <typename Expr>
  void accumulate_expr(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
  double scalar() const { return value(0, 0); }
};

// Leaf holding a value that never receives gradient.
Var constant(Mat value);
// Trainable leaf.
Var parameter(Mat value);

// Runs backpropagation from a 1x1 root. Gradients accumulate into every
// reachable node that requires them; leaves keep theirs for the caller.
void backward(const Var& root);

// Y = X W + b. `b` may be null.
Var linear(const Var& x, const Var& w, const Var& b);
Var add(const Var& a, const Var& b);
Var add_const(const Var& a, const Mat& c);
Var scale(const Var& a, double s);

// Per-row layer normalization. `gamma` and `beta` may be null.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps);
// Exact (erf) GELU.
Var gelu(const Var& x);

// Multi-head scaled dot-product self attention. `qkv` is [n x 3w] laid out
// as [Q | K | V], each split into `heads` contiguous column blocks.
Var self_attention(const Var& qkv, int heads);

Var gather_rows(const Var& x, std::span<const int> rows);
Var slice_rows(const Var& x, int begin, int count);
Var concat_rows(const Var& a, const Var& b);
// Output has `total` rows; row rows[i] is x.row(i), every other row is the
// matching row of `filler` (constant).
Var scatter_rows(const Var& x, std::span<const int> rows, const Mat& filler);
Var mean_rows(const Var& x);
// Elementwise mean of equally shaped inputs.
Var average(std::span<const Var> xs);

// 3x3 same-padded convolution over a patch grid stored as [cells x c] with
// time-major cell order (cell = col * grid_rows + row). `w` is [9c x c_out]
// with tap (dr, dc) at block (dr + 1) * 3 + (dc + 1).
Var conv3x3_grid(const Var& x, const Var& w, const Var& b, int grid_rows,
                 int grid_cols);

// Sum of squared differences to a constant target.
Var sq_err_sum(const Var& x, const Mat& target);
// sum_i weights[i] * xs[i] over 1x1 inputs.
Var weighted_sum(std::span<const Var> xs, std::span<const double> weights);

// Sum over elements of sigmoid binary cross entropy with logits.
Var bce_logits_sum(const Var& logits, const Mat& targets);
// Sum over rows of softmax cross entropy; one class index per row.
Var softmax_ce_sum(const Var& logits, std::span<const int> classes);

}  // namespace ag
}  // namespace sslam

#endif  // SSLAM_AUTOGRAD_H_
