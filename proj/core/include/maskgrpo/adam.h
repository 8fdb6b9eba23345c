// Copyright 2026 The MaskGRPO Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maskgrpo/policy.h"

namespace maskgrpo {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Minimizes: values -= lr * m_hat / (sqrt(v_hat) + eps).
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, AdamConfig config);

  // Applies one update from `grads` and zeroes them.
  void step(std::span<double> values, std::span<double> grads);
  void step(PolicyParams& params) { step(params.values(), params.grads()); }

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

}  // namespace maskgrpo
