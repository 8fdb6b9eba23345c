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

#include "maskgrpo/grpo.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "maskgrpo/errors.h"
#include "maskgrpo/transition.h"
#include "parallel.h"

namespace maskgrpo {

std::string_view to_string(ReductionKind kind) {
  switch (kind) {
    case ReductionKind::kNone: return "none";
    case ReductionKind::kComputeSubset: return "compute_subset";
    case ReductionKind::kUnmaskReduce: return "unmask_reduce";
  }
  return "?";
}

ReductionKind parse_reduction_kind(std::string_view name) {
  if (name == "none") return ReductionKind::kNone;
  if (name == "compute_subset") return ReductionKind::kComputeSubset;
  if (name == "unmask_reduce") return ReductionKind::kUnmaskReduce;
  throw InvalidArgument(
      fmt::format("unknown reduction '{}' (expected none|compute_subset|unmask_reduce)", name));
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw InvalidArgument(fmt::format("group_size must be >= 2, got {}", group_size));
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) {
    throw InvalidArgument(fmt::format("clip_eps must be in (0, 1), got {}", clip_eps));
  }
  if (!(kl_beta >= 0.0)) throw InvalidArgument(fmt::format("kl_beta must be >= 0, got {}", kl_beta));
  if (inner_epochs < 1) throw InvalidArgument("inner_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidArgument("adam_eps must be positive");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

Advantages group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw InvalidArgument("group_advantages: need at least two rewards");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  std::vector<double> centered(rewards.size());
  double ss = 0.0;
  for (std::size_t j = 0; j < rewards.size(); ++j) {
    centered[j] = rewards[j] - mean;
    ss += centered[j] * centered[j];
  }
  const double sd = std::sqrt(ss / n);
  Advantages out;
  out.values.assign(rewards.size(), 0.0);
  if (!(sd >= 1e-12)) {
    out.vanishing = true;
    return out;
  }
  for (std::size_t j = 0; j < rewards.size(); ++j) out.values[j] = centered[j] / sd;
  return out;
}

double kl_step(const ProbMatrix& probs_new, const ProbMatrix& probs_ref) {
  if (probs_new.rows() != probs_ref.rows() || probs_new.vocab() != probs_ref.vocab()) {
    throw InvalidArgument(fmt::format("kl_step: shapes {}x{} and {}x{} differ", probs_new.rows(),
                                      probs_new.vocab(), probs_ref.rows(), probs_ref.vocab()));
  }
  double kl = 0.0;
  for (int r = 0; r < probs_new.rows(); ++r) {
    for (int c = 0; c < probs_new.vocab(); ++c) {
      const double p = probs_new.prob(r, c);
      if (p == 0.0) continue;
      kl += p * (probs_new.log_prob(r, c) - probs_ref.log_prob(r, c));
    }
  }
  return std::max(kl, 0.0);
}

std::vector<int> active_steps(const Reduction& reduction, int steps) {
  int begin = 0;
  int end = steps;
  if (reduction.kind == ReductionKind::kComputeSubset) {
    begin = std::clamp(reduction.subset_begin, 0, steps);
    end = std::clamp(reduction.subset_end, begin, steps);
  }
  std::vector<int> out(static_cast<std::size_t>(end - begin));
  std::iota(out.begin(), out.end(), begin);
  return out;
}

namespace {

struct TrajectoryResult {
  double objective = 0.0;
  double ratio_sum = 0.0;
  double kl_sum = 0.0;
  int clipped = 0;
  int terms = 0;
  int zero_prob = 0;
  std::vector<double> grad;
  std::vector<std::uint64_t> structure;
};

// Contribution of one trajectory, already scaled by `weight`, the inverse of
// the number of (group, trajectory, step) terms per group.
TrajectoryResult trajectory_terms(const Trajectory& traj, double advantage, double weight,
                                  const PolicyParams& params, const PolicyParams* ref,
                                  const GrpoConfig& config, bool want_grad, bool want_structure,
                                  std::size_t group_index, std::size_t traj_index) {
  TrajectoryResult res;
  if (want_grad) res.grad.assign(params.size(), 0.0);
  const double beta = config.kl_beta;
  const double lo = 1.0 - config.clip_eps;
  const double hi = 1.0 + config.clip_eps;

  for (int t : active_steps(config.reduction, traj.steps())) {
    const auto ts = static_cast<std::size_t>(t);
    const StepOutcome& outcome = traj.outcomes[ts];
    ForwardCache cache;
    const ProbMatrix probs = policy_forward(params, traj.states[ts], traj.prompt,
                                            traj.temperature, want_grad ? &cache : nullptr);
    const double logp = transition_logprob_unchecked(config.transition, probs, outcome);
    const double ratio = std::exp(logp - traj.old_logprobs[ts]);
    if (!std::isfinite(ratio) || std::isnan(logp)) {
      throw NumericalError(fmt::format(
          "non-finite importance ratio in group {} trajectory {} step {} (logp={}, old={})",
          group_index, traj_index, t, logp, traj.old_logprobs[ts]));
    }
    if (logp == -std::numeric_limits<double>::infinity()) ++res.zero_prob;

    const double clipped_ratio = std::clamp(ratio, lo, hi);
    const double unclipped_term = ratio * advantage;
    const double clipped_term = clipped_ratio * advantage;
    const bool use_unclipped = unclipped_term <= clipped_term;
    const double surrogate = use_unclipped ? unclipped_term : clipped_term;
    if (!use_unclipped) ++res.clipped;

    double kl = 0.0;
    std::vector<int> chosen_rows;
    ProbMatrix ref_rows;
    ProbMatrix new_rows;
    if (beta > 0.0) {
      for (int r = 0; r < probs.rows(); ++r) {
        if (outcome.chosen[static_cast<std::size_t>(r)]) chosen_rows.push_back(r);
      }
      const ProbMatrix ref_probs =
          policy_forward(*ref, traj.states[ts], traj.prompt, traj.temperature);
      new_rows = probs.select_rows(chosen_rows);
      ref_rows = ref_probs.select_rows(chosen_rows);
      kl = kl_step(new_rows, ref_rows);
    }

    res.objective += weight * (surrogate - beta * kl);
    res.ratio_sum += ratio;
    res.kl_sum += kl;
    ++res.terms;

    if (want_structure) {
      res.structure.push_back(use_unclipped ? 1u : 0u);
      for (auto bit : transition_structure(config.transition, probs, outcome)) {
        res.structure.push_back(bit);
      }
    }

    if (want_grad) {
      const auto kk = static_cast<std::size_t>(probs.vocab());
      std::vector<double> upstream(static_cast<std::size_t>(probs.rows()) * kk, 0.0);
      bool any = false;
      // d(-J)/d logp = -weight * A * r on the unclipped branch, 0 when clipped.
      if (use_unclipped && advantage != 0.0 && ratio != 0.0) {
        transition_logprob_grad(config.transition, probs, outcome, -weight * advantage * ratio,
                                upstream);
        any = true;
      }
      if (beta > 0.0) {
        // d KL / d logp_new(c) = p_c (logp_c - logref_c + 1); sign flips with -J.
        for (std::size_t i = 0; i < chosen_rows.size(); ++i) {
          const auto r = static_cast<std::size_t>(chosen_rows[i]);
          for (int c = 0; c < probs.vocab(); ++c) {
            const int ii = static_cast<int>(i);
            const double p = new_rows.prob(ii, c);
            upstream[r * kk + static_cast<std::size_t>(c)] +=
                weight * beta * p * (new_rows.log_prob(ii, c) - ref_rows.log_prob(ii, c) + 1.0);
          }
        }
        any = true;
      }
      if (any) policy_backward(params, cache, upstream, res.grad);
    }
  }
  return res;
}

LossStats run_objective(std::span<const Group> groups, const PolicyParams& params,
                        const PolicyParams* ref, const GrpoConfig& config,
                        std::span<double> grad_out, std::vector<std::uint64_t>* structure,
                        int threads) {
  if (config.kl_beta > 0.0) {
    if (ref == nullptr) throw InvalidArgument("kl_beta > 0 requires reference parameters");
    if (!(ref->arch() == params.arch())) {
      throw InvalidArgument("reference policy architecture differs from the trained policy");
    }
  }
  struct Job {
    std::size_t group;
    std::size_t traj;
    double weight;
  };
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Group& group = groups[g];
    if (group.advantages.size() != group.trajectories.size()) {
      throw InvalidArgument(fmt::format("group {}: {} advantages for {} trajectories", g,
                                        group.advantages.size(), group.trajectories.size()));
    }
    for (std::size_t j = 0; j < group.trajectories.size(); ++j) {
      const Trajectory& traj = group.trajectories[j];
      if (traj.old_logprobs.size() != traj.outcomes.size()) {
        throw InvalidArgument("trajectory is missing rollout-time log-probabilities");
      }
      const auto active = active_steps(config.reduction, traj.steps()).size();
      if (active == 0) continue;
      const double w = 1.0 / (static_cast<double>(groups.size()) *
                              static_cast<double>(group.trajectories.size()) *
                              static_cast<double>(active));
      jobs.push_back({g, j, w});
    }
  }

  const bool want_grad = !grad_out.empty();
  std::vector<TrajectoryResult> results(jobs.size());
  internal::parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const Group& group = groups[job.group];
    results[i] = trajectory_terms(group.trajectories[job.traj], group.advantages[job.traj],
                                  job.weight, params, ref, config, want_grad,
                                  structure != nullptr, job.group, job.traj);
  });

  LossStats stats;
  double ratio_sum = 0.0;
  double kl_sum = 0.0;
  int clipped = 0;
  for (const TrajectoryResult& r : results) {
    stats.objective += r.objective;
    ratio_sum += r.ratio_sum;
    kl_sum += r.kl_sum;
    clipped += r.clipped;
    stats.terms += r.terms;
    stats.zero_prob_terms += r.zero_prob;
    if (want_grad) {
      for (std::size_t p = 0; p < grad_out.size(); ++p) grad_out[p] += r.grad[p];
    }
    if (structure != nullptr) structure->insert(structure->end(), r.structure.begin(), r.structure.end());
  }
  if (stats.terms > 0) {
    stats.mean_ratio = ratio_sum / stats.terms;
    stats.mean_kl = kl_sum / stats.terms;
    stats.clip_frac = static_cast<double>(clipped) / stats.terms;
  }
  return stats;
}

}  // namespace

LossStats grpo_loss_and_grad(std::span<const Group> groups, PolicyParams& params,
                             const PolicyParams* ref, const GrpoConfig& config, int threads) {
  return run_objective(groups, params, ref, config, params.grads(), nullptr, threads);
}

LossStats grpo_objective(std::span<const Group> groups, const PolicyParams& params,
                         const PolicyParams* ref, const GrpoConfig& config,
                         std::vector<std::uint64_t>* structure) {
  return run_objective(groups, params, ref, config, {}, structure, 1);
}

}  // namespace maskgrpo
