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

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace sslam::ag {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

Var make_node(Mat value, std::vector<Var> parents) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& p : parents) {
    if (p && p->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) node->parents = std::move(parents);
  return node;
}

bool wants(const Var& v) { return v && v->requires_grad; }

void check(bool cond, const char* op, const std::string& what) {
  if (!cond) throw std::invalid_argument(std::string(op) + ": " + what);
}

}  // namespace

void Node::accumulate(const Mat& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var constant(Mat value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var parameter(Mat value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

void backward(const Var& root) {
  check(root && root->value.rows() == 1 && root->value.cols() == 1, "backward",
        "root must be a 1x1 scalar");
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->accumulate(Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
  }
}

Var linear(const Var& x, const Var& w, const Var& b) {
  check(x->value.cols() == w->value.rows(), "linear", "inner dims differ");
  Mat y = x->value * w->value;
  if (b) {
    check(b->value.rows() == 1 && b->value.cols() == w->value.cols(), "linear",
          "bias shape");
    y.rowwise() += b->value.row(0);
  }
  auto out = make_node(std::move(y), {x, w, b});
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      const Var& x = self.parents[0];
      const Var& w = self.parents[1];
      const Var& b = self.parents[2];
      if (wants(x)) x->accumulate_expr(self.grad * w->value.transpose());
      if (wants(w)) w->accumulate_expr(x->value.transpose() * self.grad);
      if (wants(b)) b->accumulate_expr(self.grad.colwise().sum());
    };
  }
  return out;
}

Var add(const Var& a, const Var& b) {
  check(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
        "add", "shape mismatch");
  auto out = make_node(a->value + b->value, {a, b});
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      for (const auto& p : self.parents)
        if (wants(p)) p->accumulate(self.grad);
    };
  }
  return out;
}

Var add_const(const Var& a, const Mat& c) {
  check(a->value.rows() == c.rows() && a->value.cols() == c.cols(), "add_const",
        "shape mismatch");
  auto out = make_node(a->value + c, {a});
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) { self.parents[0]->accumulate(self.grad); };
  }
  return out;
}

Var scale(const Var& a, double s) {
  auto out = make_node(a->value * s, {a});
  if (out->requires_grad) {
    out->backward_fn = [s](Node& self) {
      self.parents[0]->accumulate_expr(self.grad * s);
    };
  }
  return out;
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x->value.rows();
  const Eigen::Index c = x->value.cols();
  Mat xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = x->value.row(i);
    const double mu = row.mean();
    const double var = (row.array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mu) * inv_std(i);
  }
  Mat y = xhat;
  if (gamma) y.array().rowwise() *= gamma->value.row(0).array();
  if (beta) y.rowwise() += beta->value.row(0);
  auto out = make_node(std::move(y), {x, gamma, beta});
  if (out->requires_grad) {
    out->backward_fn = [xhat = std::move(xhat), inv_std](Node& self) {
      const Var& x = self.parents[0];
      const Var& gamma = self.parents[1];
      const Var& beta = self.parents[2];
      if (wants(gamma))
        gamma->accumulate_expr((self.grad.array() * xhat.array()).colwise().sum().matrix());
      if (wants(beta)) beta->accumulate_expr(self.grad.colwise().sum());
      if (wants(x)) {
        Mat dxhat = self.grad;
        if (gamma) dxhat.array().rowwise() *= gamma->value.row(0).array();
        Mat dx(dxhat.rows(), dxhat.cols());
        for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
          const double m1 = dxhat.row(i).mean();
          const double m2 = dxhat.row(i).dot(xhat.row(i)) / dxhat.cols();
          dx.row(i) = inv_std(i) *
                      (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
        }
        x->accumulate(dx);
      }
    };
  }
  return out;
}

Var gelu(const Var& x) {
  Mat y = x->value.unaryExpr(
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  auto out = make_node(std::move(y), {x});
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      const Var& x = self.parents[0];
      Mat d = x->value.unaryExpr([](double v) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
               v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
      x->accumulate_expr(self.grad.cwiseProduct(d));
    };
  }
  return out;
}

Var self_attention(const Var& qkv, int heads) {
  const Eigen::Index n = qkv->value.rows();
  check(qkv->value.cols() % 3 == 0, "self_attention", "qkv width not 3w");
  const Eigen::Index w = qkv->value.cols() / 3;
  check(heads > 0 && w % heads == 0, "self_attention", "width % heads != 0");
  const Eigen::Index dh = w / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));

  const bool track = qkv->requires_grad;
  std::vector<Mat> probs;
  if (track) probs.reserve(heads);
  Mat y(n, w);
  for (int h = 0; h < heads; ++h) {
    const auto q = qkv->value.middleCols(h * dh, dh);
    const auto k = qkv->value.middleCols(w + h * dh, dh);
    const auto v = qkv->value.middleCols(2 * w + h * dh, dh);
    Mat a = (q * k.transpose()) * s;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = a.row(i).maxCoeff();
      a.row(i) = (a.row(i).array() - m).exp();
      a.row(i) /= a.row(i).sum();
    }
    y.middleCols(h * dh, dh).noalias() = a * v;
    if (track) probs.push_back(std::move(a));
  }
  auto out = make_node(std::move(y), {qkv});
  if (out->requires_grad) {
    out->backward_fn = [probs = std::move(probs), heads, w, dh, s](Node& self) {
      const Var& qkv = self.parents[0];
      Mat dqkv = Mat::Zero(qkv->value.rows(), qkv->value.cols());
      for (int h = 0; h < heads; ++h) {
        const Mat& a = probs[h];
        const auto q = qkv->value.middleCols(h * dh, dh);
        const auto k = qkv->value.middleCols(w + h * dh, dh);
        const auto v = qkv->value.middleCols(2 * w + h * dh, dh);
        const auto dout = self.grad.middleCols(h * dh, dh);
        Mat da = dout * v.transpose();
        dqkv.middleCols(2 * w + h * dh, dh).noalias() = a.transpose() * dout;
        Eigen::VectorXd rs = (da.array() * a.array()).rowwise().sum();
        Mat ds = a.array() * (da.array().colwise() - rs.array());
        dqkv.middleCols(h * dh, dh).noalias() = (ds * k) * s;
        dqkv.middleCols(w + h * dh, dh).noalias() = (ds.transpose() * q) * s;
      }
      qkv->accumulate(dqkv);
    };
  }
  return out;
}

Var gather_rows(const Var& x, std::span<const int> rows) {
  Mat y(static_cast<Eigen::Index>(rows.size()), x->value.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    check(rows[i] >= 0 && rows[i] < x->value.rows(), "gather_rows",
          "row index out of range");
    y.row(i) = x->value.row(rows[i]);
  }
  auto out = make_node(std::move(y), {x});
  if (out->requires_grad) {
    out->backward_fn = [idx = std::vector<int>(rows.begin(), rows.end())](
                           Node& self) {
      const Var& x = self.parents[0];
      Mat dx = Mat::Zero(x->value.rows(), x->value.cols());
      for (size_t i = 0; i < idx.size(); ++i) dx.row(idx[i]) += self.grad.row(i);
      x->accumulate(dx);
    };
  }
  return out;
}

Var slice_rows(const Var& x, int begin, int count) {
  check(begin >= 0 && count >= 0 && begin + count <= x->value.rows(),
        "slice_rows", "range out of bounds");
  auto out = make_node(x->value.middleRows(begin, count), {x});
  if (out->requires_grad) {
    out->backward_fn = [begin, count](Node& self) {
      const Var& x = self.parents[0];
      Mat dx = Mat::Zero(x->value.rows(), x->value.cols());
      dx.middleRows(begin, count) = self.grad;
      x->accumulate(dx);
    };
  }
  return out;
}

Var concat_rows(const Var& a, const Var& b) {
  check(a->value.cols() == b->value.cols(), "concat_rows", "column mismatch");
  Mat y(a->value.rows() + b->value.rows(), a->value.cols());
  y << a->value, b->value;
  auto out = make_node(std::move(y), {a, b});
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      const Var& a = self.parents[0];
      const Var& b = self.parents[1];
      if (wants(a)) a->accumulate(self.grad.topRows(a->value.rows()));
      if (wants(b)) b->accumulate(self.grad.bottomRows(b->value.rows()));
    };
  }
  return out;
}

Var scatter_rows(const Var& x, std::span<const int> rows, const Mat& filler) {
  check(static_cast<Eigen::Index>(rows.size()) == x->value.rows(),
        "scatter_rows", "index count != rows");
  check(filler.cols() == x->value.cols(), "scatter_rows", "filler width");
  Mat y = filler;
  for (size_t i = 0; i < rows.size(); ++i) {
    check(rows[i] >= 0 && rows[i] < filler.rows(), "scatter_rows",
          "row index out of range");
    y.row(rows[i]) = x->value.row(i);
  }
  auto out = make_node(std::move(y), {x});
  if (out->requires_grad) {
    out->backward_fn = [idx = std::vector<int>(rows.begin(), rows.end())](
                           Node& self) {
      const Var& x = self.parents[0];
      Mat dx(x->value.rows(), x->value.cols());
      for (size_t i = 0; i < idx.size(); ++i) dx.row(i) = self.grad.row(idx[i]);
      x->accumulate(dx);
    };
  }
  return out;
}

Var mean_rows(const Var& x) {
  check(x->value.rows() > 0, "mean_rows", "empty input");
  auto out = make_node(x->value.colwise().mean(), {x});
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      const Var& x = self.parents[0];
      const double inv = 1.0 / static_cast<double>(x->value.rows());
      Mat dx = (self.grad * inv).replicate(x->value.rows(), 1);
      x->accumulate(dx);
    };
  }
  return out;
}

Var average(std::span<const Var> xs) {
  check(!xs.empty(), "average", "no inputs");
  Mat y = xs[0]->value;
  for (size_t i = 1; i < xs.size(); ++i) {
    check(xs[i]->value.rows() == y.rows() && xs[i]->value.cols() == y.cols(),
          "average", "shape mismatch");
    y += xs[i]->value;
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  y *= inv;
  auto out = make_node(std::move(y), std::vector<Var>(xs.begin(), xs.end()));
  if (out->requires_grad) {
    out->backward_fn = [inv](Node& self) {
      for (const auto& p : self.parents)
        if (wants(p)) p->accumulate_expr(self.grad * inv);
    };
  }
  return out;
}

namespace {

// Neighbour table: nb[tap][cell] = source cell or -1 when outside the grid.
std::vector<std::vector<int>> conv_neighbours(int rows, int cols) {
  std::vector<std::vector<int>> nb(9, std::vector<int>(rows * cols, -1));
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      auto& tap = nb[(dr + 1) * 3 + (dc + 1)];
      for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr >= 0 && rr < rows && cc >= 0 && cc < cols)
            tap[c * rows + r] = cc * rows + rr;
        }
      }
    }
  }
  return nb;
}

Mat shifted(const Mat& x, const std::vector<int>& nb) {
  Mat s(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (nb[i] < 0) {
      s.row(i).setZero();
    } else {
      s.row(i) = x.row(nb[i]);
    }
  }
  return s;
}

}  // namespace

Var conv3x3_grid(const Var& x, const Var& w, const Var& b, int grid_rows,
                 int grid_cols) {
  const Eigen::Index c = x->value.cols();
  check(x->value.rows() == static_cast<Eigen::Index>(grid_rows) * grid_cols,
        "conv3x3_grid", "cell count != grid size");
  check(w->value.rows() == 9 * c, "conv3x3_grid", "weight rows != 9 * channels");
  const Eigen::Index c_out = w->value.cols();
  auto nb = conv_neighbours(grid_rows, grid_cols);
  Mat y = Mat::Zero(x->value.rows(), c_out);
  for (int t = 0; t < 9; ++t) {
    y.noalias() += shifted(x->value, nb[t]) * w->value.middleRows(t * c, c);
  }
  if (b) y.rowwise() += b->value.row(0);
  auto out = make_node(std::move(y), {x, w, b});
  if (out->requires_grad) {
    out->backward_fn = [nb = std::move(nb), c](Node& self) {
      const Var& x = self.parents[0];
      const Var& w = self.parents[1];
      const Var& b = self.parents[2];
      if (wants(b)) b->accumulate_expr(self.grad.colwise().sum());
      Mat dw;
      if (wants(w)) dw = Mat::Zero(w->value.rows(), w->value.cols());
      Mat dx;
      if (wants(x)) dx = Mat::Zero(x->value.rows(), c);
      for (int t = 0; t < 9; ++t) {
        const auto wt = w->value.middleRows(t * c, c);
        if (wants(w)) {
          dw.middleRows(t * c, c).noalias() =
              shifted(x->value, nb[t]).transpose() * self.grad;
        }
        if (wants(x)) {
          Mat ds = self.grad * wt.transpose();
          for (Eigen::Index i = 0; i < ds.rows(); ++i)
            if (nb[t][i] >= 0) dx.row(nb[t][i]) += ds.row(i);
        }
      }
      if (wants(w)) w->accumulate(dw);
      if (wants(x)) x->accumulate(dx);
    };
  }
  return out;
}

Var sq_err_sum(const Var& x, const Mat& target) {
  check(x->value.rows() == target.rows() && x->value.cols() == target.cols(),
        "sq_err_sum", "shape mismatch");
  Mat diff = x->value - target;
  Mat y(1, 1);
  y(0, 0) = diff.squaredNorm();
  auto out = make_node(std::move(y), {x});
  if (out->requires_grad) {
    out->backward_fn = [diff = std::move(diff)](Node& self) {
      self.parents[0]->accumulate_expr(diff * (2.0 * self.grad(0, 0)));
    };
  }
  return out;
}

Var weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
  check(xs.size() == weights.size(), "weighted_sum", "count mismatch");
  Mat y = Mat::Zero(1, 1);
  for (size_t i = 0; i < xs.size(); ++i) {
    check(xs[i]->value.size() == 1, "weighted_sum", "inputs must be scalars");
    y(0, 0) += weights[i] * xs[i]->scalar();
  }
  auto out = make_node(std::move(y), std::vector<Var>(xs.begin(), xs.end()));
  if (out->requires_grad) {
    out->backward_fn = [w = std::vector<double>(weights.begin(), weights.end())](
                           Node& self) {
      for (size_t i = 0; i < self.parents.size(); ++i) {
        if (wants(self.parents[i]))
          self.parents[i]->accumulate(Mat::Constant(1, 1, w[i] * self.grad(0, 0)));
      }
    };
  }
  return out;
}

Var bce_logits_sum(const Var& logits, const Mat& targets) {
  check(logits->value.rows() == targets.rows() &&
            logits->value.cols() == targets.cols(),
        "bce_logits_sum", "shape mismatch");
  const auto& x = logits->value.array();
  const auto& t = targets.array();
  Mat y(1, 1);
  y(0, 0) = (x.max(0.0) - x * t + (1.0 + (-x.abs()).exp()).log()).sum();
  auto out = make_node(std::move(y), {logits});
  if (out->requires_grad) {
    out->backward_fn = [targets](Node& self) {
      const Var& l = self.parents[0];
      Mat sig = (1.0 / (1.0 + (-l->value.array()).exp())).matrix();
      l->accumulate_expr((sig - targets) * self.grad(0, 0));
    };
  }
  return out;
}

Var softmax_ce_sum(const Var& logits, std::span<const int> classes) {
  check(static_cast<Eigen::Index>(classes.size()) == logits->value.rows(),
        "softmax_ce_sum", "one class per row required");
  Mat p(logits->value.rows(), logits->value.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    check(classes[i] >= 0 && classes[i] < p.cols(), "softmax_ce_sum",
          "class index out of range");
    const double m = logits->value.row(i).maxCoeff();
    p.row(i) = (logits->value.row(i).array() - m).exp();
    const double z = p.row(i).sum();
    p.row(i) /= z;
    loss -= logits->value(i, classes[i]) - m - std::log(z);
  }
  auto out = make_node(Mat::Constant(1, 1, loss), {logits});
  if (out->requires_grad) {
    out->backward_fn = [p = std::move(p),
                        cls = std::vector<int>(classes.begin(), classes.end())](
                           Node& self) {
      Mat d = p;
      for (size_t i = 0; i < cls.size(); ++i) d(i, cls[i]) -= 1.0;
      self.parents[0]->accumulate_expr(d * self.grad(0, 0));
    };
  }
  return out;
}

}  // namespace sslam::ag
