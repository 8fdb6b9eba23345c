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

#include "maskgrpo/filtering.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "maskgrpo/errors.h"

namespace maskgrpo {

void FilterConfig::validate() const {
  if (window < 1) throw InvalidArgument(fmt::format("filter window must be >= 1, got {}", window));
  if (!(percentile > 0.0 && percentile < 100.0)) {
    throw InvalidArgument(fmt::format("filter percentile must be in (0, 100), got {}", percentile));
  }
  if (warmup_min < 1) throw InvalidArgument("filter warmup must be >= 1");
  if (warmup_min > window) {
    throw InvalidArgument(
        fmt::format("filter warmup {} exceeds window {}; filtering would never start", warmup_min,
                    window));
  }
  if (max_resamples < 0) throw InvalidArgument("filter max_resamples must be >= 0");
}

double percentile_linear(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgument("percentile must be in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

StdHistory::StdHistory(FilterConfig config) : config_(config) { config_.validate(); }

void StdHistory::push(double group_std) {
  values_.push_back(group_std);
  while (values_.size() > static_cast<std::size_t>(config_.window)) values_.pop_front();
}

std::optional<double> StdHistory::threshold() const {
  if (!config_.enabled || values_.size() < static_cast<std::size_t>(config_.warmup_min)) {
    return std::nullopt;
  }
  const std::vector<double> snapshot(values_.begin(), values_.end());
  return percentile_linear(snapshot, config_.percentile);
}

AdmitResult admit(double group_std, StdHistory& history, int resamples_used) {
  AdmitResult out;
  const auto thr = history.threshold();
  history.push(group_std);
  if (thr && group_std < *thr) {
    out.below_threshold = true;
    if (resamples_used < history.config().max_resamples) out.decision = FilterDecision::kResample;
  }
  return out;
}

}  // namespace maskgrpo
