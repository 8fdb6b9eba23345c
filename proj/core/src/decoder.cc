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

#include "maskgrpo/decoder.h"

#include <algorithm>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "maskgrpo/errors.h"
#include "maskgrpo/transition.h"

namespace maskgrpo {

int StepOutcome::num_chosen() const {
  return static_cast<int>(std::count(chosen.begin(), chosen.end(), true));
}

std::vector<int> StepOutcome::chosen_positions() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    if (chosen[j]) out.push_back(positions[j]);
  }
  return out;
}

std::vector<Token> StepOutcome::chosen_values() const {
  std::vector<Token> out;
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    if (chosen[j]) out.push_back(sampled[j]);
  }
  return out;
}

SampledTokens sample_step(const ProbMatrix& probs, Rng& rng) {
  SampledTokens out;
  out.tokens.resize(static_cast<std::size_t>(probs.rows()));
  out.confidences.resize(out.tokens.size());
  for (int r = 0; r < probs.rows(); ++r) {
    const auto row = probs.row(r);
    const double u = rng.uniform();
    int pick = -1;
    double cum = 0.0;
    for (int c = 0; c < probs.vocab(); ++c) {
      cum += row[static_cast<std::size_t>(c)];
      if (u < cum && row[static_cast<std::size_t>(c)] > 0.0) {
        pick = c;
        break;
      }
    }
    if (pick < 0) {
      // Rounding left u above the accumulated mass; take the last token with
      // positive probability.
      for (int c = probs.vocab() - 1; c >= 0; --c) {
        if (row[static_cast<std::size_t>(c)] > 0.0) {
          pick = c;
          break;
        }
      }
    }
    out.tokens[static_cast<std::size_t>(r)] = pick;
    out.confidences[static_cast<std::size_t>(r)] = row[static_cast<std::size_t>(pick)];
  }
  return out;
}

std::vector<bool> cam_select(std::span<const double> confidences, int n) {
  if (n < 0 || static_cast<std::size_t>(n) > confidences.size()) {
    throw InvalidArgument(fmt::format("cam_select: cannot choose {} of {} positions", n,
                                      confidences.size()));
  }
  std::vector<std::size_t> order(confidences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidences[a] > confidences[b]; });
  std::vector<bool> chosen(confidences.size(), false);
  for (int i = 0; i < n; ++i) chosen[order[static_cast<std::size_t>(i)]] = true;
  return chosen;
}

Trajectory rollout(const PolicyParams& params, const Prompt& prompt,
                   const UnmaskSchedule& schedule, TransitionKind kind, double temperature,
                   std::uint64_t seed, const RolloutOptions& options) {
  const PolicyArch& arch = params.arch();
  validate_schedule(schedule, arch.n);

  Trajectory traj;
  traj.prompt = prompt;
  traj.kind = kind;
  traj.temperature = temperature;
  traj.seed = seed;
  traj.states.reserve(schedule.counts.size() + 1);
  traj.outcomes.reserve(schedule.counts.size());
  traj.old_logprobs.reserve(schedule.counts.size());
  traj.states.push_back(CanvasState::all_masked(arch.n, arch.k));

  Rng rng(seed);
  for (int n_t : schedule.counts) {
    const CanvasState& state = traj.states.back();
    ProbMatrix probs = policy_forward(params, state, prompt, temperature);
    SampledTokens draw = sample_step(probs, rng);

    StepOutcome outcome;
    outcome.positions.assign(probs.positions().begin(), probs.positions().end());
    outcome.chosen = cam_select(draw.confidences, n_t);
    outcome.sampled = std::move(draw.tokens);
    outcome.confidences = std::move(draw.confidences);

    traj.old_logprobs.push_back(transition_logprob_unchecked(kind, probs, outcome));
    traj.states.push_back(
        apply_step(state, outcome.chosen_positions(), outcome.chosen_values()));
    if (options.keep_probs) outcome.probs = std::move(probs);
    traj.outcomes.push_back(std::move(outcome));
  }
  return traj;
}

bool replay_matches(const Trajectory& trajectory) {
  if (trajectory.states.size() != trajectory.outcomes.size() + 1) return false;
  CanvasState state = trajectory.states.front();
  for (std::size_t t = 0; t < trajectory.outcomes.size(); ++t) {
    const StepOutcome& o = trajectory.outcomes[t];
    state = apply_step(state, o.chosen_positions(), o.chosen_values());
    if (!(state == trajectory.states[t + 1])) return false;
  }
  return true;
}

void write_trajectory_text(std::ostream& out, const Trajectory& trajectory) {
  out << fmt::format("# prompt {} kind {} temperature {} seed {} reward {}\n",
                     trajectory.prompt.describe(), to_string(trajectory.kind),
                     trajectory.temperature, trajectory.seed, trajectory.reward);
  for (std::size_t t = 0; t < trajectory.outcomes.size(); ++t) {
    const StepOutcome& o = trajectory.outcomes[t];
    std::string positions, values, confidences;
    for (std::size_t j = 0; j < o.chosen.size(); ++j) {
      if (!o.chosen[j]) continue;
      const char* sep = positions.empty() ? "" : ",";
      positions += fmt::format("{}{}", sep, o.positions[j]);
      values += fmt::format("{}{}", sep, o.sampled[j]);
      confidences += fmt::format("{}{:.6f}", sep, o.confidences[j]);
    }
    out << fmt::format("iter={} chosen={} values={} conf={} logp={:.9g}\n", t, positions, values,
                       confidences, trajectory.old_logprobs[t]);
  }
  out << "final " << trajectory.final_state().to_string() << '\n';
}

}  // namespace maskgrpo
