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

#ifndef SSLAM_TESTS_TEST_UTIL_H_
#define SSLAM_TESTS_TEST_UTIL_H_

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sslam/autograd.h"
#include "sslam/dataset.h"
#include "sslam/dsp.h"
#include "sslam/trainer.h"

namespace sslam::testing {

inline Mat random_mat(int rows, int cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

inline dsp::LogMelSpectrogram random_spec(int frames, int bins, std::mt19937_64& rng) {
  return {random_mat(frames, bins, rng)};
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// Tiny model on a (bins/16) x (frames/16) grid.
inline train::StageConfig tiny_config(int stage, int depth = 2, int width = 8) {
  train::StageConfig c = train::StageConfig::desk(stage);
  c.model.depth = depth;
  c.model.width = width;
  c.model.heads = 2;
  c.model.decoder_layers = 2;
  c.batch_size = 2;
  c.clone_batch = 2;
  return c;
}

// Clips with random spectrograms of the given shape, for in-memory runs.
inline std::vector<data::Clip> random_clips(int n, int frames, int bins, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<data::Clip> clips(n);
  for (int i = 0; i < n; ++i) {
    clips[i].path = "clip" + std::to_string(i);
    clips[i].spec = random_spec(frames, bins, rng);
  }
  return clips;
}

struct GradientCheck {
  double max_rel_err = 0.0;
  int coordinates = 0;
  int worst_index = -1;
};

// Central finite differences of the total loss against the analytic
// gradient at `n` coordinates drawn uniformly over all trainable student
// scalars. The step's randomness is replayed from `seed` on every
// evaluation, so masks, plans and fillers stay fixed.
inline GradientCheck gradient_check(train::Trainer& t,
                                    const std::vector<const dsp::LogMelSpectrogram*>& batch,
                                    std::uint64_t seed, int n, double h, double floor,
                                    std::mt19937_64& pick) {
  auto total = [&] {
    std::mt19937_64 rng(seed);
    return t.forward_losses(batch, {}, rng).total;
  };
  t.student().zero_grad();
  ag::backward(total());
  std::vector<std::pair<ag::Var, Eigen::Index>> coords;
  for (const auto& [name, v] : t.student().entries())
    for (Eigen::Index i = 0; i < v->value.size(); ++i) coords.emplace_back(v, i);
  GradientCheck out;
  std::uniform_int_distribution<size_t> u(0, coords.size() - 1);
  for (int k = 0; k < n; ++k) {
    auto& [v, i] = coords[u(pick)];
    const double analytic = v->grad.size() ? v->grad.data()[i] : 0.0;
    const double keep = v->value.data()[i];
    v->value.data()[i] = keep + h;
    const double up = total()->scalar();
    v->value.data()[i] = keep - h;
    const double down = total()->scalar();
    v->value.data()[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double err =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    if (err > out.max_rel_err) {
      out.max_rel_err = err;
      out.worst_index = k;
    }
    ++out.coordinates;
  }
  t.student().zero_grad();
  return out;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("sslam_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace sslam::testing

#endif  // SSLAM_TESTS_TEST_UTIL_H_
