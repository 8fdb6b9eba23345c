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
#include <string_view>
#include <vector>

#include "maskgrpo/decoder.h"
#include "maskgrpo/policy.h"

namespace maskgrpo {

enum class ReductionKind {
  kNone,
  // Objective averaged over steps [subset_begin, subset_end) only.
  kComputeSubset,
  // Rollouts during training use train_steps iterations instead of T.
  kUnmaskReduce,
};

std::string_view to_string(ReductionKind kind);
ReductionKind parse_reduction_kind(std::string_view name);

struct Reduction {
  ReductionKind kind = ReductionKind::kNone;
  int subset_begin = 0;
  int subset_end = 0;
  int train_steps = 0;
};

struct GrpoConfig {
  int group_size = 6;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  int inner_epochs = 1;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.95;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Discount factor. Kept for completeness; group-relative advantages with a
  // broadcast terminal reward never discount.
  double gamma = 1.0;
  TransitionKind transition = TransitionKind::kExact;
  Reduction reduction;
  double temperature = 1.0;
  int iterations = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

// G rollouts for one prompt. The terminal reward of trajectory j is shared
// by all of its steps, so one advantage per trajectory suffices.
struct Group {
  Prompt prompt;
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
  bool vanishing = false;
};

struct Advantages {
  std::vector<double> values;
  // Set when the group's reward spread is zero (below 1e-12) and every
  // advantage was returned as 0.
  bool vanishing = false;
};

// (R_j - mean) / std with the population standard deviation.
Advantages group_advantages(std::span<const double> rewards);

double population_std(std::span<const double> values);

// Sum over rows of KL(new_row || ref_row). Rows must be aligned.
double kl_step(const ProbMatrix& probs_new, const ProbMatrix& probs_ref);

// Steps of a T-step trajectory that enter the objective.
std::vector<int> active_steps(const Reduction& reduction, int steps);

struct LossStats {
  double objective = 0.0;   // surrogate J, to be maximized
  double mean_ratio = 0.0;
  double clip_frac = 0.0;   // fraction of terms where the clipped branch is selected
  double mean_kl = 0.0;     // mean per-step KL over terms
  int terms = 0;
  int zero_prob_terms = 0;  // steps whose current transition probability is 0
};

// Clipped group-relative surrogate averaged over groups, trajectories and
// active steps:
//
//   J = mean_{g, j, t} [ min(r A, clip(r, 1-eps, 1+eps) A) - beta KL_t ]
//   r = exp(logp_theta(step) - old_logprob)
//
// Accumulates d(-J)/d params into params.grads(). `ref` is required iff
// kl_beta > 0. Throws NumericalError on a non-finite ratio. Per-trajectory
// gradients are reduced in a fixed order, so the result does not depend on
// `threads`.
LossStats grpo_loss_and_grad(std::span<const Group> groups, PolicyParams& params,
                             const PolicyParams* ref, const GrpoConfig& config, int threads = 1);

// Objective only. When `structure` is non-null it receives every discrete
// choice J depends on (clip branches, transition token sets); two parameter
// points with equal structure lie in the same smooth piece.
LossStats grpo_objective(std::span<const Group> groups, const PolicyParams& params,
                         const PolicyParams* ref, const GrpoConfig& config,
                         std::vector<std::uint64_t>* structure = nullptr);

}  // namespace maskgrpo
