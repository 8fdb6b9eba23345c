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

#include "maskgrpo/canvas.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "maskgrpo/errors.h"
#include "maskgrpo/rng.h"

namespace maskgrpo {

CanvasState CanvasState::all_masked(int n, int k) {
  if (n < 1) throw InvalidArgument(fmt::format("canvas length must be >= 1, got {}", n));
  if (k < 2) throw InvalidArgument(fmt::format("vocabulary size must be >= 2, got {}", k));
  return CanvasState(std::vector<Token>(static_cast<std::size_t>(n), k), k, 0);
}

CanvasState CanvasState::from_tokens(std::vector<Token> tokens, int k, int iteration) {
  if (tokens.empty()) throw InvalidArgument("canvas length must be >= 1");
  if (k < 2) throw InvalidArgument(fmt::format("vocabulary size must be >= 2, got {}", k));
  if (iteration < 0) throw InvalidArgument("iteration must be non-negative");
  for (Token t : tokens) {
    if (t < 0 || t > k) {
      throw InvalidArgument(fmt::format("token {} outside [0, {}]", t, k));
    }
  }
  return CanvasState(std::move(tokens), k, iteration);
}

std::vector<bool> CanvasState::mask_flags() const {
  std::vector<bool> flags(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) flags[i] = tokens_[i] == k_;
  return flags;
}

int CanvasState::num_masked() const {
  return static_cast<int>(std::count(tokens_.begin(), tokens_.end(), k_));
}

std::vector<int> CanvasState::masked_positions() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (is_masked(i)) out.push_back(i);
  }
  return out;
}

std::string CanvasState::to_string() const {
  std::string out;
  for (int i = 0; i < size(); ++i) {
    if (i > 0) out += ' ';
    out += is_masked(i) ? std::string("_") : std::to_string(token(i));
  }
  return out;
}

CanvasState apply_step(const CanvasState& state, std::span<const int> chosen,
                       std::span<const Token> values) {
  if (chosen.size() != values.size()) {
    throw InvalidArgument(fmt::format("apply_step: {} positions but {} values", chosen.size(),
                                      values.size()));
  }
  std::vector<Token> tokens(state.tokens().begin(), state.tokens().end());
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    const int pos = chosen[j];
    if (pos < 0 || pos >= state.size()) {
      throw InvalidArgument(fmt::format("apply_step: position {} out of range", pos));
    }
    if (tokens[static_cast<std::size_t>(pos)] != state.mask_token()) {
      throw InvalidArgument(fmt::format("apply_step: position {} is already unmasked", pos));
    }
    if (values[j] < 0 || values[j] >= state.vocab()) {
      throw InvalidArgument(
          fmt::format("apply_step: value {} outside [0, {})", values[j], state.vocab()));
    }
    tokens[static_cast<std::size_t>(pos)] = values[j];
  }
  return CanvasState::from_tokens(std::move(tokens), state.vocab(), state.iteration() + 1);
}

int UnmaskSchedule::total_tokens() const { return std::accumulate(counts.begin(), counts.end(), 0); }

std::string_view to_string(ScheduleKind kind) {
  return kind == ScheduleKind::kCosine ? "cosine" : "uniform";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "cosine") return ScheduleKind::kCosine;
  if (name == "uniform") return ScheduleKind::kUniform;
  throw InvalidArgument(fmt::format("unknown schedule '{}' (expected cosine|uniform)", name));
}

namespace {

void check_steps(int steps, int n) {
  if (n < 1) throw InvalidArgument(fmt::format("schedule: N must be >= 1, got {}", n));
  if (steps < 1) throw InvalidArgument(fmt::format("schedule: T must be >= 1, got {}", steps));
  if (steps > n) {
    throw InvalidArgument(
        fmt::format("schedule: T={} exceeds N={}; every step must reveal at least one token",
                    steps, n));
  }
}

}  // namespace

UnmaskSchedule schedule_cosine(int steps, int n) {
  check_steps(steps, n);
  const int spare = n - steps;
  std::vector<double> share(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    const double a = std::numbers::pi / 2.0 * t / steps;
    const double b = std::numbers::pi / 2.0 * (t + 1) / steps;
    share[static_cast<std::size_t>(t)] = spare * (std::cos(a) - std::cos(b));
  }
  UnmaskSchedule out;
  out.counts.resize(share.size());
  int assigned = 0;
  for (std::size_t t = 0; t < share.size(); ++t) {
    const int whole = static_cast<int>(std::floor(share[t]));
    out.counts[t] = 1 + whole;
    assigned += whole;
  }
  std::vector<std::size_t> order(share.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = share[a] - std::floor(share[a]);
    const double fb = share[b] - std::floor(share[b]);
    if (fa != fb) return fa > fb;
    return a > b;
  });
  for (int left = spare - assigned, j = 0; left > 0; --left, ++j) {
    ++out.counts[order[static_cast<std::size_t>(j) % order.size()]];
  }
  return out;
}

UnmaskSchedule schedule_uniform(int steps, int n) {
  check_steps(steps, n);
  UnmaskSchedule out;
  out.counts.assign(static_cast<std::size_t>(steps), n / steps);
  const int rem = n % steps;
  for (int t = steps - rem; t < steps; ++t) ++out.counts[static_cast<std::size_t>(t)];
  return out;
}

UnmaskSchedule make_schedule(ScheduleKind kind, int steps, int n) {
  return kind == ScheduleKind::kCosine ? schedule_cosine(steps, n) : schedule_uniform(steps, n);
}

void validate_schedule(const UnmaskSchedule& schedule, int n) {
  if (schedule.counts.empty()) throw InvalidArgument("schedule has no steps");
  int remaining = n;
  for (std::size_t t = 0; t < schedule.counts.size(); ++t) {
    const int c = schedule.counts[t];
    if (c < 1 || c > remaining) {
      throw InvalidArgument(
          fmt::format("schedule step {} reveals {} tokens with {} still masked", t, c, remaining));
    }
    remaining -= c;
  }
  if (remaining != 0) {
    throw InvalidArgument(fmt::format("schedule reveals {} of {} tokens", n - remaining, n));
  }
}

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::kPatternMatch ? "pattern" : "count";
}

namespace {

// +1 or -1, keyed by (salt, dim, a, b).
double hashed_sign(std::uint64_t salt, int dim, std::int64_t a, std::int64_t b) {
  std::uint64_t h = mix64(salt);
  h = mix64(h ^ static_cast<std::uint64_t>(dim));
  h = mix64(h ^ static_cast<std::uint64_t>(a));
  h = mix64(h ^ static_cast<std::uint64_t>(b));
  return (h >> 63) ? 1.0 : -1.0;
}

constexpr std::uint64_t kPatternSalt = 0x5041545445524e31ULL;
constexpr std::uint64_t kCountSalt = 0x434f554e54000001ULL;

}  // namespace

std::vector<double> prompt_embedding(const Prompt& prompt, int embed_dim) {
  if (embed_dim < 0) throw InvalidArgument("embedding width must be non-negative");
  std::vector<double> e(static_cast<std::size_t>(embed_dim), 0.0);
  if (prompt.kind == TaskKind::kPatternMatch) {
    if (prompt.target.empty()) return e;
    const double scale = 1.0 / std::sqrt(static_cast<double>(prompt.target.size()));
    for (int d = 0; d < embed_dim; ++d) {
      double acc = 0.0;
      for (std::size_t i = 0; i < prompt.target.size(); ++i) {
        acc += hashed_sign(kPatternSalt, d, static_cast<std::int64_t>(i), prompt.target[i]);
      }
      e[static_cast<std::size_t>(d)] = scale * acc;
    }
  } else {
    for (int d = 0; d < embed_dim; ++d) {
      e[static_cast<std::size_t>(d)] =
          0.5 * hashed_sign(kCountSalt, d, -1, prompt.count_value) +
          0.5 * hashed_sign(kCountSalt, d, prompt.count_value, prompt.count_target);
    }
  }
  return e;
}

Prompt Prompt::pattern(std::vector<Token> target, int embed_dim) {
  Prompt p;
  p.kind = TaskKind::kPatternMatch;
  p.target = std::move(target);
  p.embedding = prompt_embedding(p, embed_dim);
  return p;
}

Prompt Prompt::count(Token value, int target_count, int embed_dim) {
  Prompt p;
  p.kind = TaskKind::kTokenCount;
  p.count_value = value;
  p.count_target = target_count;
  p.embedding = prompt_embedding(p, embed_dim);
  return p;
}

std::string Prompt::describe() const {
  if (kind == TaskKind::kTokenCount) {
    return fmt::format("count:v={},k={}", count_value, count_target);
  }
  std::string out = "pattern:";
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(target[i]);
  }
  return out;
}

}  // namespace maskgrpo
