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
#include <cmath>

#include <gtest/gtest.h>

#include "maskgrpo/errors.h"
#include "maskgrpo/rng.h"

namespace maskgrpo {
namespace {

CanvasState canvas(std::vector<Token> tokens, int k) {
  return CanvasState::from_tokens(std::move(tokens), k);
}

TEST(PatternRewardTest, FixedCases) {
  const Prompt p = Prompt::pattern({0, 1, 2, 3}, 0);
  EXPECT_EQ(reward_pattern(canvas({0, 1, 2, 3}, 4), p), 1.0);
  EXPECT_EQ(reward_pattern(canvas({1, 0, 3, 2}, 4), p), 0.0);
  EXPECT_EQ(reward_pattern(canvas({0, 1, 2, 0}, 4), p), 0.75);
  EXPECT_EQ(score(canvas({0, 1, 2, 0}, 4), p), 0.75);
}

TEST(PatternRewardTest, RejectsMismatch) {
  const Prompt p = Prompt::pattern({0, 1}, 0);
  EXPECT_THROW(reward_pattern(canvas({0, 1, 1}, 2), p), InvalidArgument);
  EXPECT_THROW(reward_count(canvas({0, 1}, 2), p), InvalidArgument);
}

TEST(CountRewardTest, FixedCases) {
  const Prompt p = Prompt::count(1, 3, 0);
  // Five ones out of eight with target three: 1 - 2/8.
  EXPECT_EQ(reward_count(canvas({1, 1, 1, 1, 1, 0, 0, 0}, 2), p), 0.75);
  EXPECT_EQ(reward_count(canvas({1, 1, 1, 0, 0, 0, 0, 0}, 2), p), 1.0);
  const Prompt none = Prompt::count(2, 0, 0);
  EXPECT_EQ(reward_count(canvas({2, 2, 2, 2}, 3), none), 0.0);
  EXPECT_EQ(score(canvas({0, 0, 0, 0}, 3), none), 1.0);
}

TEST(CountRewardTest, PermutationInvariantAndInUnitInterval) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(12));
    const int k = 2 + static_cast<int>(rng.below(3));
    std::vector<Token> t(static_cast<std::size_t>(n));
    for (Token& x : t) x = static_cast<Token>(rng.below(static_cast<std::uint64_t>(k)));
    const Prompt p = Prompt::count(static_cast<Token>(rng.below(static_cast<std::uint64_t>(k))),
                                   static_cast<int>(rng.below(static_cast<std::uint64_t>(n + 1))), 0);
    const double r = reward_count(canvas(t, k), p);
    ASSERT_GE(r, 0.0);
    ASSERT_LE(r, 1.0);
    std::vector<Token> shuffled = t;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    ASSERT_EQ(reward_count(canvas(shuffled, k), p), r);
  }
}

// Reward as a function of the count rises to 1 at the target and falls after.
TEST(CountRewardTest, UnimodalInCount) {
  const int n = 10;
  for (int target = 0; target <= n; ++target) {
    const Prompt p = Prompt::count(1, target, 0);
    double prev = -1.0;
    for (int have = 0; have <= n; ++have) {
      std::vector<Token> t(n, 0);
      std::fill(t.begin(), t.begin() + have, 1);
      const double r = reward_count(canvas(t, 2), p);
      ASSERT_DOUBLE_EQ(r, 1.0 - std::abs(have - target) / static_cast<double>(n));
      if (have <= target) {
        ASSERT_GT(r, prev);
      } else {
        ASSERT_LT(r, prev);
      }
      prev = r;
    }
  }
}

}  // namespace
}  // namespace maskgrpo
