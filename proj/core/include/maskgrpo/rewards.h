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

#include <functional>

#include "maskgrpo/canvas.h"

namespace maskgrpo {

// Terminal reward r(Y_T, c) in [0, 1].
using RewardFn = std::function<double(const CanvasState&, const Prompt&)>;

// Fraction of positions where the canvas matches prompt.target.
double reward_pattern(const CanvasState& final_state, const Prompt& prompt);

// 1 - |count(tokens == v) - k| / N.
double reward_count(const CanvasState& final_state, const Prompt& prompt);

// Dispatches on prompt.kind.
double score(const CanvasState& final_state, const Prompt& prompt);

}  // namespace maskgrpo
