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

#include <cstddef>
#include <deque>
#include <optional>
#include <span>

namespace maskgrpo {

struct FilterConfig {
  bool enabled = true;
  int window = 200;
  double percentile = 10.0;
  int warmup_min = 20;
  int max_resamples = 5;

  void validate() const;
};

// Linear interpolation between closest ranks: the value at fractional rank
// q/100 * (n - 1) of the sorted sample. Requires a non-empty sample and
// q in [0, 100].
double percentile_linear(std::span<const double> values, double q);

// Rolling window of recent group reward standard deviations. Every generated
// group is recorded, accepted or not.
class StdHistory {
 public:
  explicit StdHistory(FilterConfig config = {});

  void push(double group_std);
  // q-th percentile of the window; nullopt until warmup_min entries exist
  // or when filtering is disabled.
  std::optional<double> threshold() const;

  std::size_t size() const { return values_.size(); }
  const FilterConfig& config() const { return config_; }

 private:
  FilterConfig config_;
  std::deque<double> values_;
};

enum class FilterDecision { kAccept, kResample };

struct AdmitResult {
  FilterDecision decision = FilterDecision::kAccept;
  // Std fell below the active threshold. Together with kAccept this means
  // the retry budget was spent and the group is let through.
  bool below_threshold = false;
};

// Threshold is taken from the history before `group_std` is recorded.
// `resamples_used` counts earlier regenerations of the same group.
AdmitResult admit(double group_std, StdHistory& history, int resamples_used);

}  // namespace maskgrpo
