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

#include "maskgrpo/rewards.h"

#include <algorithm>
#include <cstdlib>

#include <fmt/format.h>

#include "maskgrpo/errors.h"

namespace maskgrpo {

double reward_pattern(const CanvasState& final_state, const Prompt& prompt) {
  if (prompt.kind != TaskKind::kPatternMatch) throw InvalidArgument("reward_pattern: not a pattern prompt");
  if (static_cast<int>(prompt.target.size()) != final_state.size()) {
    throw InvalidArgument(fmt::format("reward_pattern: target length {} but canvas length {}",
                                      prompt.target.size(), final_state.size()));
  }
  int hits = 0;
  for (int i = 0; i < final_state.size(); ++i) {
    hits += final_state.token(i) == prompt.target[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / final_state.size();
}

double reward_count(const CanvasState& final_state, const Prompt& prompt) {
  if (prompt.kind != TaskKind::kTokenCount) throw InvalidArgument("reward_count: not a count prompt");
  const auto tokens = final_state.tokens();
  const auto have = std::count(tokens.begin(), tokens.end(), prompt.count_value);
  const double miss = std::abs(static_cast<double>(have) - prompt.count_target);
  return std::clamp(1.0 - miss / final_state.size(), 0.0, 1.0);
}

double score(const CanvasState& final_state, const Prompt& prompt) {
  return prompt.kind == TaskKind::kPatternMatch ? reward_pattern(final_state, prompt)
                                                : reward_count(final_state, prompt);
}

}  // namespace maskgrpo
