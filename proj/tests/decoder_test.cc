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

#include <cmath>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "maskgrpo/errors.h"
#include "maskgrpo/transition.h"

namespace maskgrpo {
namespace {

ProbMatrix rows_of(std::vector<double> probs, int k) {
  const int rows = static_cast<int>(probs.size()) / k;
  std::vector<int> positions(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) positions[static_cast<std::size_t>(r)] = r;
  return ProbMatrix::from_probs(positions, k, std::move(probs));
}

TEST(SampleStepTest, DegenerateRowAlwaysPicksItsToken) {
  const ProbMatrix p = rows_of({1.0, 0.0}, 2);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const SampledTokens s = sample_step(p, rng);
    ASSERT_EQ(s.tokens[0], 0);
    ASSERT_EQ(s.confidences[0], 1.0);
  }
}

TEST(SampleStepTest, FairCoinFrequency) {
  const ProbMatrix p = rows_of({0.5, 0.5}, 2);
  Rng rng(2);
  constexpr int kDraws = 100000;
  int zeros = 0;
  for (int i = 0; i < kDraws; ++i) zeros += sample_step(p, rng).tokens[0] == 0;
  EXPECT_NEAR(static_cast<double>(zeros) / kDraws, 0.5, 0.01);
}

TEST(SampleStepTest, ConfidenceIsProbabilityOfSample) {
  const ProbMatrix p = rows_of({0.1, 0.2, 0.7, 0.6, 0.3, 0.1}, 3);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const SampledTokens s = sample_step(p, rng);
    for (int r = 0; r < 2; ++r) {
      ASSERT_EQ(s.confidences[static_cast<std::size_t>(r)], p.prob(r, s.tokens[static_cast<std::size_t>(r)]));
    }
  }
}

TEST(SampleStepTest, SameSeedSameDraws) {
  const ProbMatrix p = rows_of({0.3, 0.7, 0.5, 0.5}, 2);
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(sample_step(p, a).tokens, sample_step(p, b).tokens);
}

TEST(CamSelectTest, FixedCases) {
  const std::vector<double> a{0.9, 0.6};
  EXPECT_EQ(cam_select(a, 1), (std::vector<bool>{true, false}));
  const std::vector<double> b{0.5, 0.5};
  EXPECT_EQ(cam_select(b, 1), (std::vector<bool>{true, false}));
  const std::vector<double> c{0.1, 0.7, 0.4, 0.7};
  EXPECT_EQ(cam_select(c, 2), (std::vector<bool>{false, true, false, true}));
  EXPECT_THROW(cam_select(a, 3), InvalidArgument);
}

TEST(CamSelectTest, ChosenDominateUnchosen) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const int len = 1 + static_cast<int>(rng.below(8));
    std::vector<double> conf(static_cast<std::size_t>(len));
    // Coarse values so ties are common.
    for (double& c : conf) c = static_cast<double>(rng.below(4)) / 4.0;
    const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(len)));
    const std::vector<bool> chosen = cam_select(conf, n);
    ASSERT_EQ(std::count(chosen.begin(), chosen.end(), true), n);
    for (int i = 0; i < len; ++i) {
      for (int j = 0; j < len; ++j) {
        if (!chosen[static_cast<std::size_t>(i)] || chosen[static_cast<std::size_t>(j)]) continue;
        ASSERT_GE(conf[static_cast<std::size_t>(i)], conf[static_cast<std::size_t>(j)]);
        // Among equal confidences the lower index wins.
        if (conf[static_cast<std::size_t>(i)] == conf[static_cast<std::size_t>(j)]) {
          ASSERT_LT(i, j);
        }
      }
    }
  }
}

class RolloutTest : public ::testing::Test {
 protected:
  PolicyArch arch_{6, 3, 8, 4};
  PolicyParams params_ = PolicyParams::initialized(arch_, 21);
  Prompt prompt_ = Prompt::pattern({0, 1, 2, 0, 1, 2}, 4);
};

TEST_F(RolloutTest, SingleStepRevealsEverything) {
  const UnmaskSchedule sched = schedule_cosine(1, arch_.n);
  const Trajectory t = rollout(params_, prompt_, sched, TransitionKind::kExact, 1.0, 5);
  ASSERT_EQ(t.steps(), 1);
  EXPECT_TRUE(t.final_state().complete());
  EXPECT_EQ(t.outcomes[0].num_chosen(), arch_.n);
  const ProbMatrix probs = policy_forward(params_, t.states[0], prompt_, 1.0);
  EXPECT_EQ(t.old_logprobs[0], transition_logprob(TransitionKind::kExact, probs, t.outcomes[0]));
}

TEST_F(RolloutTest, StructureAndReplay) {
  for (TransitionKind kind :
       {TransitionKind::kArStyle, TransitionKind::kExact, TransitionKind::kUnmaskedOnly}) {
    const UnmaskSchedule sched = schedule_cosine(4, arch_.n);
    const Trajectory t = rollout(params_, prompt_, sched, kind, 0.9, 11);
    ASSERT_EQ(t.steps(), 4);
    ASSERT_EQ(t.states.size(), 5u);
    EXPECT_EQ(t.states[0], CanvasState::all_masked(arch_.n, arch_.k));
    EXPECT_TRUE(t.final_state().complete());
    for (int s = 0; s < 4; ++s) {
      EXPECT_EQ(t.outcomes[static_cast<std::size_t>(s)].num_chosen(), sched.counts[static_cast<std::size_t>(s)]);
      EXPECT_EQ(t.states[static_cast<std::size_t>(s)].iteration(), s);
      const ProbMatrix probs = policy_forward(params_, t.states[static_cast<std::size_t>(s)], prompt_, 0.9);
      EXPECT_EQ(t.old_logprobs[static_cast<std::size_t>(s)],
                transition_logprob_unchecked(kind, probs, t.outcomes[static_cast<std::size_t>(s)]));
    }
    EXPECT_TRUE(replay_matches(t));
  }
}

TEST_F(RolloutTest, Deterministic) {
  const UnmaskSchedule sched = schedule_cosine(3, arch_.n);
  const Trajectory a = rollout(params_, prompt_, sched, TransitionKind::kExact, 1.0, 99);
  const Trajectory b = rollout(params_, prompt_, sched, TransitionKind::kExact, 1.0, 99);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.old_logprobs, b.old_logprobs);
  const Trajectory c = rollout(params_, prompt_, sched, TransitionKind::kExact, 1.0, 100);
  EXPECT_NE(a.states.back(), c.states.back());
}

TEST_F(RolloutTest, ReplayDetectsTampering) {
  Trajectory t = rollout(params_, prompt_, schedule_cosine(3, arch_.n), TransitionKind::kExact, 1.0, 3);
  t.outcomes[1].sampled[0] = (t.outcomes[1].sampled[0] + 1) % arch_.k;
  if (t.outcomes[1].chosen[0]) {
    EXPECT_FALSE(replay_matches(t));
  }
  Trajectory u = rollout(params_, prompt_, schedule_cosine(3, arch_.n), TransitionKind::kExact, 1.0, 3);
  u.states[2] = u.states[1];
  EXPECT_FALSE(replay_matches(u));
}

TEST_F(RolloutTest, TextDumpHasOneLinePerIteration) {
  const Trajectory t = rollout(params_, prompt_, schedule_cosine(3, arch_.n), TransitionKind::kExact, 1.0, 3);
  std::ostringstream out;
  write_trajectory_text(out, t);
  const std::string text = out.str();
  EXPECT_GE(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(RolloutDistributionTest, UniformPolicyFillsTwoByTwoEvenly) {
  const PolicyArch arch{2, 2, 3, 0};
  const PolicyParams p(arch);
  const Prompt prompt = Prompt::pattern({0, 0}, 0);
  const UnmaskSchedule sched = schedule_cosine(2, 2);
  std::map<std::vector<Token>, int> counts;
  constexpr int kRuns = 100000;
  for (int i = 0; i < kRuns; ++i) {
    const Trajectory t = rollout(p, prompt, sched, TransitionKind::kExact, 1.0, derive_stream_seed(1, i));
    const auto tok = t.final_state().tokens();
    ++counts[std::vector<Token>(tok.begin(), tok.end())];
  }
  ASSERT_EQ(counts.size(), 4u);
  for (const auto& [canvas, n] : counts) {
    EXPECT_NEAR(static_cast<double>(n) / kRuns, 0.25, 0.01);
  }
}

// First-step next-canvas frequencies against brute-force enumeration.
TEST(RolloutDistributionTest, FirstStepMatchesEnumeration) {
  const PolicyArch arch{4, 3, 6, 2};
  const PolicyParams p = [&] {
    PolicyParams q = PolicyParams::initialized(arch, 8);
    for (double& v : q.values()) v *= 3.0;
    return q;
  }();
  const Prompt prompt = Prompt::pattern({0, 1, 2, 0}, 2);
  const ProbMatrix probs = policy_forward(p, CanvasState::all_masked(4, 3), prompt, 1.0);
  ASSERT_TRUE(is_tie_free(probs));
  const int n = 2;
  const auto exact = enumerate_next_states(probs, n);

  std::map<NextStateSignature, int> seen;
  Rng rng(12);
  constexpr int kDraws = 200000;
  for (int i = 0; i < kDraws; ++i) {
    const SampledTokens s = sample_step(probs, rng);
    ++seen[signature_of(make_outcome(probs, s.tokens, n))];
  }
  for (const auto& e : exact) {
    const double freq = static_cast<double>(seen[e.signature]) / kDraws;
    const double sigma = std::sqrt(e.probability * (1 - e.probability) / kDraws);
    EXPECT_NEAR(freq, e.probability, 5 * sigma + 1e-9);
  }
}

}  // namespace
}  // namespace maskgrpo
