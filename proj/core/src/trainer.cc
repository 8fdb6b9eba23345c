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

#include "maskgrpo/trainer.h"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "maskgrpo/adam.h"
#include "maskgrpo/errors.h"
#include "parallel.h"

namespace maskgrpo {

namespace {

// Stream indices: one per purpose so rollout seeds never collide.
constexpr std::uint64_t kPromptStream = 1;
constexpr std::uint64_t kRolloutStream = 2;
constexpr std::uint64_t kEvalStream = 3;

}  // namespace

void TrainConfig::validate() const {
  grpo.validate();
  arch.validate();
  filter.validate();
  if (steps < 1 || steps > arch.n) {
    throw InvalidArgument(fmt::format("T={} must be in [1, N={}]", steps, arch.n));
  }
  if (groups_per_iter < 1) throw InvalidArgument("groups_per_iter must be >= 1");
  if (threads < 1) throw InvalidArgument("threads must be >= 1");
  if (eval_episodes < 0) throw InvalidArgument("eval_episodes must be >= 0");
  const Reduction& red = grpo.reduction;
  if (red.kind == ReductionKind::kComputeSubset) {
    if (red.subset_begin < 0 || red.subset_end > steps || red.subset_begin >= red.subset_end) {
      throw InvalidArgument(fmt::format("compute subset [{}, {}) must be a non-empty range in [0, {})",
                                        red.subset_begin, red.subset_end, steps));
    }
  }
  if (red.kind == ReductionKind::kUnmaskReduce) {
    if (red.train_steps < 1 || red.train_steps > steps) {
      throw InvalidArgument(
          fmt::format("T_train={} must be in [1, T={}]", red.train_steps, steps));
    }
  }
}

UnmaskSchedule TrainConfig::train_schedule() const {
  if (grpo.reduction.kind == ReductionKind::kUnmaskReduce) {
    // The cosine curve is rebuilt for the shorter horizon.
    return schedule_cosine(grpo.reduction.train_steps, arch.n);
  }
  return eval_schedule();
}

UnmaskSchedule TrainConfig::eval_schedule() const { return make_schedule(schedule, steps, arch.n); }

void write_metrics_header(std::ostream& out) {
  for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) {
    out << (i ? "," : "") << kMetricsColumns[i];
  }
  out << '\n';
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << fmt::format("{},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.3f}\n",
                     r.iter, r.mean_reward, r.std_reward, r.filtered_groups, r.resamples, r.loss,
                     r.mean_ratio, r.clip_frac, r.mean_kl, r.grad_norm, r.wall_ms);
}

Group generate_group(const PolicyParams& params, const Prompt& prompt,
                     const UnmaskSchedule& schedule, const GrpoConfig& config,
                     const RewardFn& reward, std::uint64_t stream_seed, int threads) {
  Group group;
  group.prompt = prompt;
  const auto g = static_cast<std::size_t>(config.group_size);
  group.trajectories.resize(g);
  group.rewards.resize(g);
  internal::parallel_for(g, threads, [&](std::size_t j) {
    Trajectory traj = rollout(params, prompt, schedule, config.transition, config.temperature,
                              derive_stream_seed(stream_seed, j));
    traj.reward = reward(traj.final_state(), prompt);
    group.rewards[j] = traj.reward;
    group.trajectories[j] = std::move(traj);
  });
  return group;
}

double evaluate(const PolicyParams& params, const PromptSampler& sampler,
                const UnmaskSchedule& schedule, TransitionKind kind, double temperature,
                const RewardFn& reward, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw InvalidArgument("evaluate: need at least one episode");
  Rng prompt_rng(derive_stream_seed(seed, kPromptStream));
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const Prompt prompt = sampler(prompt_rng);
    const Trajectory traj = rollout(params, prompt, schedule, kind, temperature,
                                    derive_stream_seed(seed, 1000 + static_cast<std::uint64_t>(e)));
    total += reward(traj.final_state(), prompt);
  }
  return total / episodes;
}

TrainResult train(const TrainConfig& config, const RewardFn& reward, const PromptSampler& sampler,
                  const TrainCallbacks& callbacks, const PolicyParams* initial) {
  config.validate();
  const GrpoConfig& grpo = config.grpo;

  TrainResult result{initial ? *initial : PolicyParams::initialized(config.arch, grpo.seed), {}, 0,
                     std::nullopt, std::nullopt};
  PolicyParams& params = result.params;
  if (!(params.arch() == config.arch)) {
    throw InvalidArgument("initial parameters do not match the configured architecture");
  }
  params.zero_grads();
  std::optional<PolicyParams> ref;
  if (grpo.kl_beta > 0.0) ref.emplace(params);

  const UnmaskSchedule train_sched = config.train_schedule();
  const UnmaskSchedule eval_sched = config.eval_schedule();
  const std::uint64_t eval_seed = derive_stream_seed(grpo.seed, kEvalStream);
  if (config.eval_episodes > 0) {
    result.initial_eval_reward = evaluate(params, sampler, eval_sched, grpo.transition,
                                          grpo.temperature, reward, config.eval_episodes, eval_seed);
  }

  AdamOptimizer adam(params.size(), AdamConfig{grpo.learning_rate, grpo.adam_beta1,
                                               grpo.adam_beta2, grpo.adam_eps});
  StdHistory history(config.filter);
  Rng prompt_rng(derive_stream_seed(grpo.seed, kPromptStream));
  const std::uint64_t rollout_base = derive_stream_seed(grpo.seed, kRolloutStream);
  std::uint64_t group_counter = 0;

  for (int iter = 0; iter < grpo.iterations; ++iter) {
    const auto start = std::chrono::steady_clock::now();
    MetricsRow row;
    row.iter = iter;

    std::vector<Group> groups;
    groups.reserve(static_cast<std::size_t>(config.groups_per_iter));
    for (int gi = 0; gi < config.groups_per_iter; ++gi) {
      const Prompt prompt = sampler(prompt_rng);
      for (int attempt = 0;; ++attempt) {
        Group group = generate_group(params, prompt, train_sched, grpo, reward,
                                     derive_stream_seed(rollout_base, group_counter++),
                                     config.threads);
        const double sd = population_std(group.rewards);
        const AdmitResult verdict = admit(sd, history, attempt);
        if (verdict.below_threshold) ++row.filtered_groups;
        if (verdict.decision == FilterDecision::kResample) {
          ++row.resamples;
          continue;
        }
        if (verdict.below_threshold) {
          ++result.budget_exhausted;
          if (callbacks.on_warning) {
            callbacks.on_warning(fmt::format(
                "iteration {}: group std {:.4g} below threshold after {} resamples; accepting",
                iter, sd, attempt));
          }
        }
        Advantages adv = group_advantages(group.rewards);
        group.advantages = std::move(adv.values);
        group.vanishing = adv.vanishing;
        groups.push_back(std::move(group));
        break;
      }
    }

    double reward_sum = 0.0;
    double std_sum = 0.0;
    std::size_t reward_count = 0;
    for (const Group& g : groups) {
      reward_sum = std::accumulate(g.rewards.begin(), g.rewards.end(), reward_sum);
      reward_count += g.rewards.size();
      std_sum += population_std(g.rewards);
    }
    row.mean_reward = reward_sum / static_cast<double>(reward_count);
    row.std_reward = std_sum / static_cast<double>(groups.size());

    for (int epoch = 0; epoch < grpo.inner_epochs; ++epoch) {
      params.zero_grads();
      const LossStats stats =
          grpo_loss_and_grad(groups, params, ref ? &*ref : nullptr, grpo, config.threads);
      double sq = 0.0;
      for (double g : params.grads()) sq += g * g;
      row.loss = -stats.objective;
      row.mean_ratio = stats.mean_ratio;
      row.clip_frac = stats.clip_frac;
      row.mean_kl = stats.mean_kl;
      row.grad_norm = std::sqrt(sq);
      adam.step(params);
    }

    if (config.wall_clock) {
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                        .count();
    }
    result.metrics.push_back(row);
    if (callbacks.on_metrics) callbacks.on_metrics(row);
    if (callbacks.on_iteration) callbacks.on_iteration(iter + 1, params);
  }

  if (config.eval_episodes > 0) {
    result.final_eval_reward = evaluate(params, sampler, eval_sched, grpo.transition,
                                        grpo.temperature, reward, config.eval_episodes, eval_seed);
  }
  return result;
}

}  // namespace maskgrpo
