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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "maskgrpo/canvas.h"
#include "maskgrpo/trainer.h"

namespace maskgrpo {

// Everything one experiment needs. Parsed from a flat `key=value` file:
// one key per line, '#' starts a comment, blank lines ignored, unknown or
// repeated keys rejected. Missing keys keep the defaults below.
//
//   seed=0                  threads=1              iterations=500
//   group_size=6            clip_eps=0.2           kl_beta=0
//   inner_epochs=1          learning_rate=0.001    adam_beta1=0.95
//   adam_beta2=0.999        adam_eps=1e-8          gamma=1
//   transition=exact        (ar | exact | unmasked)
//   reduction=none          (none | compute_subset | unmask_reduce)
//   subset_begin, subset_end  (compute_subset step range [begin, end))
//   T=8                     T_train (implies reduction=unmask_reduce)
//   temperature=1           schedule=cosine        (cosine | uniform)
//   canvas_n=16             canvas_k=4             hidden=64      embed=16
//   reward=pattern          (pattern | count)
//   target=                 comma-separated tokens; empty draws random targets
//   num_prompts=1           size of the random prompt pool
//   count_value=0           count_target=4
//   groups_per_iter=1
//   filter=true             filter_window=200      filter_q=10
//   filter_warmup=20        filter_max_resamples=5
//   eval_episodes=0         wall_clock=true
//   output_dir=runs/default checkpoint_every=100
struct ExperimentConfig {
  TrainConfig train;
  TaskKind task = TaskKind::kPatternMatch;
  std::vector<Token> target;
  int num_prompts = 1;
  Token count_value = 0;
  int count_target = 4;
  std::filesystem::path output_dir = "runs/default";
  int checkpoint_every = 100;

  // Cross-field checks; throws ConfigError with line 0.
  void validate() const;
};

// Throws ConfigError carrying the offending line number.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view text);

// Prompt pool for the configured task. Random targets are drawn once from
// the experiment seed; each call then picks one uniformly.
PromptSampler make_prompt_sampler(const ExperimentConfig& config);

// "pattern:0,1,2,3" or "count:v=1,k=3" -> Prompt.
Prompt parse_prompt_spec(std::string_view spec, int embed_dim);

}  // namespace maskgrpo
