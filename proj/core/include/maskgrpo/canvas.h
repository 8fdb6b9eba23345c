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
#include <string>
#include <string_view>
#include <vector>

namespace maskgrpo {

using Token = std::int32_t;

// A 1-D token canvas of length N over a vocabulary of K categories. The mask
// sentinel is the extra category K, so a position is masked iff its token
// equals vocab(). Images are flattened row-major before they get here.
class CanvasState {
 public:
  // The blank canvas every rollout starts from.
  static CanvasState all_masked(int n, int k);

  // Validates every token is in [0, k] (k meaning masked).
  static CanvasState from_tokens(std::vector<Token> tokens, int k, int iteration = 0);

  int size() const { return static_cast<int>(tokens_.size()); }
  int vocab() const { return k_; }
  Token mask_token() const { return k_; }
  int iteration() const { return iteration_; }

  std::span<const Token> tokens() const { return tokens_; }
  Token token(int i) const { return tokens_[static_cast<std::size_t>(i)]; }
  bool is_masked(int i) const { return token(i) == k_; }

  std::vector<bool> mask_flags() const;
  int num_masked() const;
  // Masked positions in ascending canvas order.
  std::vector<int> masked_positions() const;
  bool complete() const { return num_masked() == 0; }

  // Human-readable form, '_' for masked positions.
  std::string to_string() const;

  friend bool operator==(const CanvasState&, const CanvasState&) = default;

 private:
  CanvasState(std::vector<Token> tokens, int k, int iteration)
      : tokens_(std::move(tokens)), k_(k), iteration_(iteration) {}

  std::vector<Token> tokens_;
  int k_ = 2;
  int iteration_ = 0;
};

// Returns the successor canvas: `chosen` positions receive `values`, the
// iteration counter advances by one. Throws InvalidArgument if a chosen
// position is already unmasked or a value is outside [0, K).
CanvasState apply_step(const CanvasState& state, std::span<const int> chosen,
                       std::span<const Token> values);

// Number of tokens revealed at each of the T iterations.
struct UnmaskSchedule {
  std::vector<int> counts;

  int total_steps() const { return static_cast<int>(counts.size()); }
  int total_tokens() const;

  friend bool operator==(const UnmaskSchedule&, const UnmaskSchedule&) = default;
};

enum class ScheduleKind { kCosine, kUniform };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

// Cumulative revealed fraction follows 1 - cos(pi/2 * t/T): few tokens early,
// many late. One token per step is reserved and the remaining N - T are
// apportioned by largest remainder (ties to the later step), which keeps the
// counts nondecreasing. Requires 1 <= T <= N.
UnmaskSchedule schedule_cosine(int steps, int n);

// Equal split; the N mod T leftover tokens go to the final steps.
UnmaskSchedule schedule_uniform(int steps, int n);

UnmaskSchedule make_schedule(ScheduleKind kind, int steps, int n);

// Throws InvalidArgument unless every count is >= 1 and they sum to n.
void validate_schedule(const UnmaskSchedule& schedule, int n);

enum class TaskKind { kPatternMatch, kTokenCount };

std::string_view to_string(TaskKind kind);

// Conditioning input. The embedding is a fixed-width real vector that is a
// pure function of (kind, payload): a signed random projection keyed by a
// hash of the payload.
struct Prompt {
  TaskKind kind = TaskKind::kPatternMatch;
  std::vector<Token> target;  // PatternMatch: desired canvas
  Token count_value = 0;      // TokenCount: token to count
  int count_target = 0;       // TokenCount: desired number of occurrences
  std::vector<double> embedding;

  static Prompt pattern(std::vector<Token> target, int embed_dim);
  static Prompt count(Token value, int target_count, int embed_dim);

  std::string describe() const;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

std::vector<double> prompt_embedding(const Prompt& prompt, int embed_dim);

}  // namespace maskgrpo
