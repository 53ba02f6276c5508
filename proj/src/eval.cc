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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sslam/errors.h"
#include "sslam/rng.h"
#include "sslam/trainer.h"

namespace sslam::eval {

namespace {

void check_labels(const Mat& x, const Labels& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows())
    throw std::invalid_argument("label count " + std::to_string(labels.size()) +
                                " != embedding count " + std::to_string(x.rows()));
  if (labels.empty()) throw std::invalid_argument("no training examples");
  for (const auto& row : labels)
    if (row.size() != labels.front().size() || row.empty())
      throw std::invalid_argument("label rows differ in width");
}

Mat label_mat(const Labels& labels, std::span<const int> rows) {
  Mat y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(labels[0].size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < labels[0].size(); ++c) y(r, c) = labels[rows[r]][c];
  return y;
}

std::vector<int> class_of(const Labels& labels, std::span<const int> rows) {
  std::vector<int> out;
  for (int r : rows) {
    const auto& l = labels[r];
    out.push_back(static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin()));
  }
  return out;
}

// Mean loss over examples (and classes for BCE).
ag::Var head_loss(const ag::Var& logits, const Labels& labels, std::span<const int> rows,
                  bool multilabel) {
  const double n = static_cast<double>(rows.size());
  if (multilabel) {
    const Mat y = label_mat(labels, rows);
    return ag::scale(ag::bce_logits_sum(logits, y), 1.0 / (n * y.cols()));
  }
  const auto classes = class_of(labels, rows);
  return ag::scale(ag::softmax_ce_sum(logits, classes), 1.0 / n);
}

Mat gather(const Mat& x, std::span<const int> rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (size_t r = 0; r < rows.size(); ++r) out.row(r) = x.row(rows[r]);
  return out;
}

Mat trunc_normal(int rows, int cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::max(std, 1e-300));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v;
    do {
      v = dist(rng);
    } while (std::abs(v) > 2.0 * std);
    m.data()[i] = v;
  }
  return m;
}

}  // namespace

RowVec pool_tokens(const Mat& final_layer_patches) {
  if (final_layer_patches.rows() == 0) throw std::invalid_argument("pool_tokens: no tokens");
  return final_layer_patches.colwise().mean();
}

RowVec extract_embedding(const model::ParamStore& encoder, const model::EncoderConfig& cfg,
                         const dsp::LogMelSpectrogram& s) {
  const model::ParamStore frozen = encoder.copy(false, "encoder.");
  const model::LayerOutputs lo =
      model::teacher_forward(model::with_cls(model::embed(s, frozen, cfg), frozen), frozen, cfg);
  return pool_tokens(lo.layers.back());
}

Mat extract_embeddings(const model::ParamStore& encoder, const model::EncoderConfig& cfg,
                       const std::vector<const dsp::LogMelSpectrogram*>& specs) {
  const model::ParamStore frozen = encoder.copy(false, "encoder.");
  Mat out(static_cast<Eigen::Index>(specs.size()), cfg.width);
  for (size_t i = 0; i < specs.size(); ++i) {
    const model::LayerOutputs lo = model::teacher_forward(
        model::with_cls(model::embed(*specs[i], frozen, cfg), frozen), frozen, cfg);
    out.row(i) = pool_tokens(lo.layers.back());
  }
  if (!out.allFinite()) throw NumericalError("non-finite embedding");
  return out;
}

Mat LinearHead::logits(const Mat& x) const {
  if (x.cols() != weight.rows())
    throw std::invalid_argument("linear head: feature width differs from the head");
  Mat z = x;
  if (shift.size() == x.cols()) {
    z.rowwise() -= shift;
    z.array().rowwise() /= scale.array();
  }
  Mat out = z * weight;
  out.rowwise() += bias;
  return out;
}

double probe_loss(const LinearHead& head, const Mat& x, const Labels& labels, bool multilabel) {
  check_labels(x, labels);
  std::vector<int> rows(labels.size());
  std::iota(rows.begin(), rows.end(), 0);
  return head_loss(ag::constant(head.logits(x)), labels, rows, multilabel)->scalar();
}

ProbeResult train_linear_probe(const Mat& embeddings, const Labels& labels,
                               const ProbeConfig& cfg) {
  check_labels(embeddings, labels);
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.warmup_epochs < 0)
    throw std::invalid_argument("probe config: bad epochs or batch size");
  const int n = static_cast<int>(embeddings.rows());
  const int width = static_cast<int>(embeddings.cols());
  const int classes = static_cast<int>(labels[0].size());

  ProbeResult result;
  LinearHead& head = result.head;
  if (cfg.standardize) {
    head.shift = embeddings.colwise().mean();
    head.scale = ((embeddings.rowwise() - head.shift).array().square().colwise().mean() + 1e-12)
                     .sqrt()
                     .matrix();
  }
  std::mt19937_64 rng = make_rng(cfg.seed, Stream::kProbe, 0);
  head.weight = trunc_normal(width, classes, cfg.init_std, rng);
  head.bias = RowVec::Zero(classes);
  const Mat x = head.shift.size() ? Mat((embeddings.rowwise() - head.shift).array().rowwise() /
                                        head.scale.array())
                                  : embeddings;
  result.loss_trace.push_back(probe_loss(head, embeddings, labels, cfg.multilabel));

  model::ParamStore params;
  params.add("probe.weight", head.weight);
  params.add("probe.bias", head.bias);
  train::OptimizerState opt;
  const int spe = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total = static_cast<std::int64_t>(cfg.epochs) * spe;
  const std::int64_t warmup = std::min<std::int64_t>(cfg.warmup_epochs * spe, total);
  std::int64_t step = 0;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int s = 0; s < spe; ++s) {
      const int lo = s * cfg.batch_size;
      const int hi = std::min(n, lo + cfg.batch_size);
      std::span<const int> rows(order.data() + lo, hi - lo);
      params.zero_grad();
      ag::Var logits = ag::linear(ag::constant(gather(x, rows)), params.get("probe.weight"),
                                  params.get("probe.bias"));
      ag::Var loss = head_loss(logits, labels, rows, cfg.multilabel);
      if (!std::isfinite(loss->scalar())) throw NumericalError("non-finite probe loss");
      ag::backward(loss);
      const double lr = train::cosine_lr(step, cfg.peak_lr, cfg.min_lr, warmup, total);
      train::adamw_step(params, opt, {lr, cfg.weight_decay, cfg.beta1, cfg.beta2, 1e-8});
      ++step;
    }
    head.weight = params.get("probe.weight")->value;
    head.bias = params.get("probe.bias")->value;
    result.loss_trace.push_back(probe_loss(head, embeddings, labels, cfg.multilabel));
  }
  return result;
}

FineTuneResult fine_tune(const model::ParamStore& encoder, const model::EncoderConfig& cfg,
                         const std::vector<const dsp::LogMelSpectrogram*>& specs,
                         const Labels& labels, const FineTuneConfig& ft) {
  if (specs.size() != labels.size())
    throw std::invalid_argument("fine_tune: label count != clip count");
  if (specs.empty()) throw std::invalid_argument("fine_tune: no clips");
  if (ft.steps < 0 || ft.batch_size < 1) throw std::invalid_argument("fine_tune: bad config");
  const int classes = static_cast<int>(labels[0].size());
  std::mt19937_64 rng = make_rng(ft.seed, Stream::kFinetune, 0);

  FineTuneResult result;
  result.encoder = encoder.copy(true, "encoder.");
  model::ParamStore head;
  head.add("head.weight", trunc_normal(cfg.width, classes, 0.01, rng));
  head.add("head.bias", Mat::Zero(1, classes));
  train::OptimizerState opt_enc;
  train::OptimizerState opt_head;
  const int n = static_cast<int>(specs.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  int cursor = n;
  for (int step = 0; step < ft.steps; ++step) {
    std::vector<int> rows;
    while (static_cast<int>(rows.size()) < std::min(ft.batch_size, n)) {
      if (cursor >= n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    result.encoder.zero_grad();
    head.zero_grad();
    std::vector<ag::Var> pooled;
    for (int r : rows) {
      const patch::TokenSequence seq =
          model::with_cls(model::embed(*specs[r], result.encoder, cfg), result.encoder);
      ag::Var out = model::encode(seq.tokens, result.encoder, cfg);
      pooled.push_back(ag::mean_rows(ag::slice_rows(out, 1, seq.size() - 1)));
    }
    ag::Var feats = pooled[0];
    for (size_t i = 1; i < pooled.size(); ++i) feats = ag::concat_rows(feats, pooled[i]);
    ag::Var logits = ag::linear(feats, head.get("head.weight"), head.get("head.bias"));
    ag::Var loss = head_loss(logits, labels, rows, ft.multilabel);
    if (!std::isfinite(loss->scalar())) throw NumericalError("non-finite fine-tune loss");
    result.loss_trace.push_back(loss->scalar());
    ag::backward(loss);
    const double lr = train::cosine_lr(step, ft.peak_lr, ft.min_lr,
                                       std::min(ft.warmup_steps, ft.steps), ft.steps);
    const train::AdamWConfig ac{lr, ft.weight_decay, ft.beta1, ft.beta2, 1e-8};
    train::adamw_step(result.encoder, opt_enc, ac);
    train::adamw_step(head, opt_head, ac);
  }
  result.encoder.zero_grad();
  result.head.weight = head.get("head.weight")->value;
  result.head.bias = head.get("head.bias")->value;
  return result;
}

double average_precision(std::span<const double> scores, std::span<const int> relevance) {
  if (scores.size() != relevance.size())
    throw std::invalid_argument("average_precision: size mismatch");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  double hits = 0.0;
  double sum = 0.0;
  for (size_t r = 0; r < order.size(); ++r) {
    if (relevance[order[r]]) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  }
  if (hits == 0.0) throw std::invalid_argument("average_precision: no positives");
  return sum / hits;
}

MapResult mean_average_precision(const Mat& scores, const Labels& labels) {
  check_labels(scores, labels);
  if (static_cast<Eigen::Index>(labels[0].size()) != scores.cols())
    throw std::invalid_argument("mean_average_precision: class counts differ");
  MapResult out;
  double sum = 0.0;
  int used = 0;
  std::vector<double> col(scores.rows());
  std::vector<int> rel(scores.rows());
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    int positives = 0;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      col[r] = scores(r, c);
      rel[r] = labels[r][c] != 0;
      positives += rel[r];
    }
    if (positives == 0) {
      out.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      out.skipped.push_back(static_cast<int>(c));
      continue;
    }
    const double ap = average_precision(col, rel);
    out.per_class.push_back(ap);
    sum += ap;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("mean_average_precision: no class has positives");
  out.map = sum / used;
  return out;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size() || labels.empty())
    throw std::invalid_argument("accuracy: size mismatch or empty input");
  int correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<int> argmax_rows(const Mat& m) {
  std::vector<int> out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index c = 0;
    m.row(r).maxCoeff(&c);
    out.push_back(static_cast<int>(c));
  }
  return out;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["value"] = value;
  nlohmann::ordered_json ap = nlohmann::ordered_json::array();
  for (double v : per_class_ap) {
    if (std::isnan(v)) {
      ap.push_back(nullptr);
    } else {
      ap.push_back(v);
    }
  }
  j["per_class_ap"] = ap;
  j["skipped_classes"] = skipped_classes;
  j["n_train"] = n_train;
  j["n_eval"] = n_eval;
  j["config_hash"] = config_hash;
  return j;
}

std::string hash_text(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sslam::eval
