//
// Copyright 2026 The UMEDA Authors
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
//

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "umeda/linalg.hpp"

namespace umeda {

// Adam with decoupled weight decay (AdamW):
//   theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
// State is positional: the i-th parameter passed to Step owns slot i.
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  explicit AdamW(Options opts) : opts_(opts) {}

  void Step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    if (params.size() != grads.size()) throw ValidationError("adam: params/grads count");
    if (first_.empty()) {
      for (const Matrix* p : params) {
        first_.emplace_back(p->rows(), p->cols());
        second_.emplace_back(p->rows(), p->cols());
      }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, step_);
    const double bc2 = 1.0 - std::pow(opts_.beta2, step_);
    const double decay = 1.0 - opts_.lr * opts_.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Vector& p = params[i]->data();
      const Vector& g = grads[i]->data();
      Vector& m = first_[i].data();
      Vector& v = second_[i].data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = opts_.beta1 * m[j] + (1.0 - opts_.beta1) * g[j];
        v[j] = opts_.beta2 * v[j] + (1.0 - opts_.beta2) * g[j] * g[j];
        const double m_hat = m[j] / bc1;
        const double v_hat = v[j] / bc2;
        p[j] = p[j] * decay - opts_.lr * m_hat / (std::sqrt(v_hat) + opts_.eps);
      }
    }
  }

  int steps() const { return step_; }

 private:
  Options opts_;
  int step_ = 0;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
};

}  // namespace umeda
