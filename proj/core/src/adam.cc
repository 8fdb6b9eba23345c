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

#include "maskgrpo/adam.h"

#include <algorithm>
#include <cmath>

#include "maskgrpo/errors.h"

namespace maskgrpo {

AdamOptimizer::AdamOptimizer(std::size_t size, AdamConfig config)
    : config_(config), m_(size, 0.0), v_(size, 0.0) {
  if (!(config_.learning_rate > 0.0) || !(config_.eps > 0.0) || !(config_.beta1 >= 0.0) ||
      !(config_.beta1 < 1.0) || !(config_.beta2 >= 0.0) || !(config_.beta2 < 1.0)) {
    throw InvalidArgument("invalid Adam hyperparameters");
  }
}

void AdamOptimizer::step(std::span<double> values, std::span<double> grads) {
  if (values.size() != m_.size() || grads.size() != m_.size()) {
    throw InvalidArgument("AdamOptimizer::step: size mismatch");
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    values[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
  std::fill(grads.begin(), grads.end(), 0.0);
}

}  // namespace maskgrpo
