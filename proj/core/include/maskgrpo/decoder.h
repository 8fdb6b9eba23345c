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
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "maskgrpo/canvas.h"
#include "maskgrpo/policy.h"
#include "maskgrpo/rng.h"

namespace maskgrpo {

enum class TransitionKind { kArStyle, kExact, kUnmaskedOnly };

// One decoding iteration. Index j runs over the masked positions of the
// source canvas in ascending order, matching the rows of the ProbMatrix.
struct StepOutcome {
  std::vector<int> positions;
  std::vector<Token> sampled;
  std::vector<double> confidences;  // probability of sampled[j] under row j
  std::vector<bool> chosen;         // Choose-and-Move selection
  std::optional<ProbMatrix> probs;  // kept only when asked for

  int num_masked() const { return static_cast<int>(positions.size()); }
  int num_chosen() const;
  std::vector<int> chosen_positions() const;
  std::vector<Token> chosen_values() const;
};

struct SampledTokens {
  std::vector<Token> tokens;
  std::vector<double> confidences;
};

// Draws each row independently by inverse CDF; the confidence of a draw is
// that row's probability at the drawn token.
SampledTokens sample_step(const ProbMatrix& probs, Rng& rng);

// Marks the `n` largest confidences. Equal confidences are ordered by
// position, lowest first, so the result is a function of its inputs.
std::vector<bool> cam_select(std::span<const double> confidences, int n);

struct Trajectory {
  std::vector<CanvasState> states;   // T + 1 canvases, all-masked to complete
  std::vector<StepOutcome> outcomes;  // T steps
  std::vector<double> old_logprobs;   // rollout-time log transition probability per step
  Prompt prompt;
  TransitionKind kind = TransitionKind::kExact;
  double temperature = 1.0;
  double reward = 0.0;
  std::uint64_t seed = 0;

  int steps() const { return static_cast<int>(outcomes.size()); }
  const CanvasState& final_state() const { return states.back(); }
};

struct RolloutOptions {
  bool keep_probs = false;
};

// Runs the schedule: forward, sample, Choose-and-Move, apply_step, and
// records the step log-probability under `kind`. Deterministic in `seed`.
Trajectory rollout(const PolicyParams& params, const Prompt& prompt,
                   const UnmaskSchedule& schedule, TransitionKind kind, double temperature,
                   std::uint64_t seed, const RolloutOptions& options = {});

// Re-applies every recorded outcome to states[0]; true iff each state is
// reproduced exactly.
bool replay_matches(const Trajectory& trajectory);

// Line-oriented dump: one line per iteration with the chosen positions,
// their values and confidences, and the step log-probability.
void write_trajectory_text(std::ostream& out, const Trajectory& trajectory);

}  // namespace maskgrpo
