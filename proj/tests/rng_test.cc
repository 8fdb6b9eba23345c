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

#include "maskgrpo/rng.h"

#include <cmath>
#include <set>

#include <gtest/gtest.h>

namespace maskgrpo {
namespace {

TEST(RngTest, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngTest, UniformStaysInUnitInterval) {
  Rng rng(1);
  double sum = 0.0;
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // Mean of U(0,1) has std 1/sqrt(12 n); allow 5 sigma.
  EXPECT_NEAR(sum / kDraws, 0.5, 5.0 / std::sqrt(12.0 * kDraws));
}

TEST(RngTest, BelowCoversRangeWithoutEscaping) {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(RngTest, NormalMoments) {
  Rng rng(9);
  constexpr int kDraws = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / kDraws, 0.0, 5.0 / std::sqrt(kDraws));
  EXPECT_NEAR(s2 / kDraws, 1.0, 5.0 * std::sqrt(2.0 / kDraws));
}

TEST(RngTest, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(derive_stream_seed(7, i));
  EXPECT_EQ(seeds.size(), 1000u);
  EXPECT_EQ(derive_stream_seed(7, 3), derive_stream_seed(7, 3));
  EXPECT_NE(derive_stream_seed(7, 3), derive_stream_seed(8, 3));
}

}  // namespace
}  // namespace maskgrpo
