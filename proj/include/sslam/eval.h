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

// Downstream evaluation: frozen-feature linear probes, full fine-tuning,
// and ranking / classification metrics.

#ifndef SSLAM_EVAL_H_
#define SSLAM_EVAL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sslam/autograd.h"
#include "sslam/dsp.h"
#include "sslam/model.h"

namespace sslam::eval {

using Labels = std::vector<std::vector<int>>;  // multi-hot rows

// Mean of the final encoder layer over patch tokens; CLS excluded.
RowVec pool_tokens(const Mat& final_layer_patches);
RowVec extract_embedding(const model::ParamStore& encoder, const model::EncoderConfig& cfg,
                         const dsp::LogMelSpectrogram& s);
Mat extract_embeddings(const model::ParamStore& encoder, const model::EncoderConfig& cfg,
                       const std::vector<const dsp::LogMelSpectrogram*>& specs);

struct ProbeConfig {
  int epochs = 50;
  int warmup_epochs = 5;
  int batch_size = 48;
  double peak_lr = 1e-3;
  double min_lr = 1e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  bool multilabel = true;   // sigmoid BCE; otherwise softmax CE on argmax labels
  bool standardize = true;  // z-score features with training-set statistics
  double init_std = 0.01;
  std::uint64_t seed = 0;
};

struct LinearHead {
  Mat weight;    // [width x classes]
  RowVec bias;   // [1 x classes]
  RowVec shift;  // feature standardization, applied before the affine map
  RowVec scale;

  Mat logits(const Mat& x) const;
};

struct ProbeResult {
  LinearHead head;
  // Mean training loss over the whole training set: before training, then
  // after each epoch.
  std::vector<double> loss_trace;
};

ProbeResult train_linear_probe(const Mat& embeddings, const Labels& labels,
                               const ProbeConfig& cfg);

// Mean training loss of `head` on (x, labels).
double probe_loss(const LinearHead& head, const Mat& x, const Labels& labels, bool multilabel);

struct FineTuneConfig {
  int steps = 50;
  int warmup_steps = 5;
  int batch_size = 8;
  double peak_lr = 5e-5;
  double min_lr = 1e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  bool multilabel = true;
  std::uint64_t seed = 0;
};

struct FineTuneResult {
  model::ParamStore encoder;  // trained copy; the input is left untouched
  LinearHead head;
  std::vector<double> loss_trace;  // per-step batch loss
};

FineTuneResult fine_tune(const model::ParamStore& encoder, const model::EncoderConfig& cfg,
                         const std::vector<const dsp::LogMelSpectrogram*>& specs,
                         const Labels& labels, const FineTuneConfig& ft);

// Non-interpolated AP; ranks by descending score, ties in input order.
// Throws std::invalid_argument when there is no positive.
double average_precision(std::span<const double> scores, std::span<const int> relevance);

struct MapResult {
  double map = 0.0;
  std::vector<double> per_class;  // NaN for skipped classes
  std::vector<int> skipped;       // classes without positives
};

MapResult mean_average_precision(const Mat& scores, const Labels& labels);

double accuracy(std::span<const int> predictions, std::span<const int> labels);
// Row-wise argmax.
std::vector<int> argmax_rows(const Mat& m);

struct EvalReport {
  std::string metric;  // "mAP" or "accuracy"
  double value = 0.0;
  std::vector<double> per_class_ap;
  std::vector<int> skipped_classes;
  int n_train = 0;
  int n_eval = 0;
  std::string config_hash;

  nlohmann::ordered_json to_json() const;
};

// FNV-1a 64-bit, hex.
std::string hash_text(const std::string& text);

}  // namespace sslam::eval

#endif  // SSLAM_EVAL_H_
