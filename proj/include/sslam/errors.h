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

#ifndef SSLAM_ERRORS_H_
#define SSLAM_ERRORS_H_

#include <stdexcept>
#include <string>

namespace sslam {

// Malformed or missing input data (audio, manifests, checkpoints, ontology).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss, gradient or parameter became non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations raise std::invalid_argument.

}  // namespace sslam

#endif  // SSLAM_ERRORS_H_
