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

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maskgrpo/filtering.h"
#include "maskgrpo/grpo.h"
#include "maskgrpo/policy.h"
#include "maskgrpo/rewards.h"
#include "maskgrpo/rng.h"

namespace maskgrpo {

struct TrainConfig {
  GrpoConfig grpo;
  PolicyArch arch;
  ScheduleKind schedule = ScheduleKind::kCosine;
  int steps = 8;  // T used for evaluation, and for training unless UnmaskReduce
  int groups_per_iter = 1;
  FilterConfig filter;
  int threads = 1;
  // When false the wall_ms column is written as 0 so metrics are
  // byte-for-byte reproducible.
  bool wall_clock = true;
  // Full-T evaluation rollouts before and after training (0 disables).
  int eval_episodes = 0;

  void validate() const;
  // Schedule used for training rollouts (T_train under UnmaskReduce).
  UnmaskSchedule train_schedule() const;
  // Always the full-T schedule.
  UnmaskSchedule eval_schedule() const;
};

struct MetricsRow {
  int iter = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  int filtered_groups = 0;
  int resamples = 0;
  double loss = 0.0;
  double mean_ratio = 0.0;
  double clip_frac = 0.0;
  double mean_kl = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

inline constexpr std::array<std::string_view, 11> kMetricsColumns = {
    "iter",     "mean_reward", "std_reward", "filtered_groups", "resamples", "loss",
    "mean_ratio", "clip_frac", "mean_kl",    "grad_norm",       "wall_ms"};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

using PromptSampler = std::function<Prompt(Rng&)>;

struct TrainCallbacks {
  std::function<void(const MetricsRow&)> on_metrics;
  // Called after every optimizer iteration with the 1-based iteration count.
  std::function<void(int, const PolicyParams&)> on_iteration;
  std::function<void(const std::string&)> on_warning;
};

struct TrainResult {
  PolicyParams params;
  std::vector<MetricsRow> metrics;
  int budget_exhausted = 0;  // groups let through after spending every retry
  std::optional<double> initial_eval_reward;
  std::optional<double> final_eval_reward;
};

// G rollouts of `prompt`, scored. Trajectory j uses stream
// derive_stream_seed(stream_seed, j). Advantages are left empty.
Group generate_group(const PolicyParams& params, const Prompt& prompt,
                     const UnmaskSchedule& schedule, const GrpoConfig& config,
                     const RewardFn& reward, std::uint64_t stream_seed, int threads = 1);

// Mean reward of `episodes` rollouts, one prompt drawn per episode.
double evaluate(const PolicyParams& params, const PromptSampler& sampler,
                const UnmaskSchedule& schedule, TransitionKind kind, double temperature,
                const RewardFn& reward, int episodes, std::uint64_t seed);

// Mask-GRPO loop. Starts from `initial` when given, otherwise from
// PolicyParams::initialized(arch, grpo.seed). Deterministic in the config
// regardless of `threads`.
TrainResult train(const TrainConfig& config, const RewardFn& reward, const PromptSampler& sampler,
                  const TrainCallbacks& callbacks = {},
                  const PolicyParams* initial = nullptr);

}  // namespace maskgrpo
