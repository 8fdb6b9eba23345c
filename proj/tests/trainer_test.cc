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

#include "maskgrpo/trainer.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "maskgrpo/errors.h"

namespace maskgrpo {
namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.arch = PolicyArch{6, 3, 16, 4};
  c.steps = 3;
  c.grpo.group_size = 6;
  c.grpo.iterations = 30;
  c.grpo.learning_rate = 0.01;
  c.grpo.seed = 5;
  c.filter.warmup_min = 5;
  c.wall_clock = false;
  return c;
}

PromptSampler fixed_prompt(const TrainConfig& c) {
  const Prompt p = Prompt::pattern({0, 1, 2, 0, 1, 2}, c.arch.embed);
  return [p](Rng&) { return p; };
}

std::string metrics_text(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  write_metrics_header(out);
  for (const MetricsRow& r : rows) write_metrics_row(out, r);
  return out.str();
}

double distance(const PolicyParams& a, const PolicyParams& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
  return std::sqrt(s);
}

TEST(MetricsTest, HeaderIsExact) {
  std::ostringstream out;
  write_metrics_header(out);
  EXPECT_EQ(out.str(),
            "iter,mean_reward,std_reward,filtered_groups,resamples,loss,mean_ratio,clip_frac,"
            "mean_kl,grad_norm,wall_ms\n");
}

TEST(MetricsTest, RowHasElevenFields) {
  std::ostringstream out;
  write_metrics_row(out, MetricsRow{3, 0.5, 0.25, 1, 2, -0.1, 1.0, 0.0, 0.0, 0.7, 0.0});
  const std::string s = out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), ','), 10);
  EXPECT_EQ(s.rfind("3,0.5,0.25,1,2,", 0), 0u);
}

TEST(TrainerTest, ZeroIterationsReturnsInitialParams) {
  TrainConfig c = small_config();
  c.grpo.iterations = 0;
  const TrainResult r = train(c, score, fixed_prompt(c));
  EXPECT_TRUE(r.metrics.empty());
  const PolicyParams init = PolicyParams::initialized(c.arch, c.grpo.seed);
  EXPECT_TRUE(std::equal(init.values().begin(), init.values().end(), r.params.values().begin()));
}

TEST(TrainerTest, BitIdenticalAcrossRunsAndThreadCounts) {
  TrainConfig c = small_config();
  const TrainResult a = train(c, score, fixed_prompt(c));
  const TrainResult b = train(c, score, fixed_prompt(c));
  c.threads = 3;
  const TrainResult d = train(c, score, fixed_prompt(c));
  EXPECT_EQ(metrics_text(a.metrics), metrics_text(b.metrics));
  EXPECT_EQ(metrics_text(a.metrics), metrics_text(d.metrics));
  EXPECT_TRUE(std::equal(a.params.values().begin(), a.params.values().end(), d.params.values().begin()));
  for (const MetricsRow& r : a.metrics) EXPECT_EQ(r.wall_ms, 0.0);
}

// Adam's first bias-corrected step moves each parameter with a nonzero
// gradient by lr * g / (|g| + eps), i.e. almost exactly lr.
TEST(TrainerTest, FirstIterationIsOneAdamStep) {
  TrainConfig c = small_config();
  c.grpo.iterations = 1;
  c.filter.enabled = false;
  c.arch.embed = 0;
  const PolicyParams init = PolicyParams::initialized(c.arch, c.grpo.seed);
  const TrainResult r = train(c, score, fixed_prompt(c));
  ASSERT_EQ(r.metrics.size(), 1u);
  ASSERT_GT(r.metrics[0].grad_norm, 0.0);
  int moved = 0;
  for (std::size_t i = 0; i < init.size(); ++i) {
    const double d = std::abs(r.params.values()[i] - init.values()[i]);
    if (d == 0.0) continue;
    ++moved;
    ASSERT_LE(d, c.grpo.learning_rate * (1 + 1e-9));
  }
  EXPECT_GT(moved, 0);
  EXPECT_EQ(r.metrics[0].mean_ratio, 1.0);
  EXPECT_EQ(r.metrics[0].clip_frac, 0.0);
}

TEST(TrainerTest, KlPenaltyKeepsPolicyNearReference) {
  TrainConfig c = small_config();
  c.grpo.iterations = 40;
  c.grpo.inner_epochs = 2;
  const PolicyParams init = PolicyParams::initialized(c.arch, c.grpo.seed);
  const TrainResult free = train(c, score, fixed_prompt(c));
  c.grpo.kl_beta = 10.0;
  const TrainResult held = train(c, score, fixed_prompt(c));
  EXPECT_LT(distance(held.params, init), distance(free.params, init));
  double kl = 0.0;
  for (const MetricsRow& r : held.metrics) kl += r.mean_kl;
  EXPECT_GT(kl, 0.0);
}

TEST(TrainerTest, FilteringCountsReported) {
  TrainConfig c = small_config();
  c.grpo.iterations = 60;
  c.filter.percentile = 50.0;
  c.filter.window = 20;
  int warnings = 0;
  TrainCallbacks cb;
  cb.on_warning = [&](const std::string&) { ++warnings; };
  const TrainResult r = train(c, score, fixed_prompt(c), cb);
  int filtered = 0, resamples = 0;
  for (const MetricsRow& row : r.metrics) {
    filtered += row.filtered_groups;
    resamples += row.resamples;
    ASSERT_LE(row.resamples, row.filtered_groups);
    ASSERT_LE(row.resamples, c.filter.max_resamples);
  }
  EXPECT_GT(resamples, 0);
  EXPECT_EQ(filtered - resamples, r.budget_exhausted);
  EXPECT_EQ(warnings, r.budget_exhausted);
}

TEST(TrainerTest, DisabledFilterNeverResamples) {
  TrainConfig c = small_config();
  c.filter.enabled = false;
  const TrainResult r = train(c, score, fixed_prompt(c));
  for (const MetricsRow& row : r.metrics) {
    EXPECT_EQ(row.filtered_groups, 0);
    EXPECT_EQ(row.resamples, 0);
  }
}

TEST(TrainerTest, UnmaskReduceUsesShorterSchedule) {
  TrainConfig c = small_config();
  c.arch.n = 8;
  c.steps = 8;
  c.grpo.reduction = Reduction{ReductionKind::kUnmaskReduce, 0, 0, 4};
  const UnmaskSchedule t = c.train_schedule();
  EXPECT_EQ(t.total_steps(), 4);
  EXPECT_EQ(t.total_tokens(), 8);
  EXPECT_EQ(c.eval_schedule().total_steps(), 8);
  c.grpo.reduction.train_steps = 9;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(TrainerTest, CallbacksAndResume) {
  TrainConfig c = small_config();
  c.grpo.iterations = 5;
  std::vector<int> seen;
  TrainCallbacks cb;
  cb.on_iteration = [&](int i, const PolicyParams&) { seen.push_back(i); };
  int rows = 0;
  cb.on_metrics = [&](const MetricsRow&) { ++rows; };
  const TrainResult r = train(c, score, fixed_prompt(c), cb);
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_EQ(rows, 5);
  c.grpo.iterations = 0;
  const TrainResult again = train(c, score, fixed_prompt(c), {}, &r.params);
  EXPECT_TRUE(std::equal(r.params.values().begin(), r.params.values().end(), again.params.values().begin()));
  const PolicyParams wrong(PolicyArch{5, 3, 16, 4});
  EXPECT_THROW(train(c, score, fixed_prompt(c), {}, &wrong), InvalidArgument);
}

TEST(TrainerTest, LearnsSmallPattern) {
  TrainConfig c = small_config();
  c.arch = PolicyArch{4, 2, 16, 0};
  c.steps = 2;
  c.grpo.iterations = 150;
  c.grpo.learning_rate = 0.03;
  c.eval_episodes = 200;
  const Prompt p = Prompt::pattern({1, 0, 1, 1}, 0);
  const TrainResult r = train(c, score, [p](Rng&) { return p; });
  ASSERT_TRUE(r.initial_eval_reward && r.final_eval_reward);
  EXPECT_GT(*r.final_eval_reward, *r.initial_eval_reward + 0.2);
}

TEST(EvaluateTest, DeterministicAndBounded) {
  const TrainConfig c = small_config();
  const PolicyParams p = PolicyParams::initialized(c.arch, 1);
  const double a = evaluate(p, fixed_prompt(c), c.eval_schedule(), TransitionKind::kExact, 1.0, score, 50, 3);
  const double b = evaluate(p, fixed_prompt(c), c.eval_schedule(), TransitionKind::kExact, 1.0, score, 50, 3);
  EXPECT_EQ(a, b);
  EXPECT_GE(a, 0.0);
  EXPECT_LE(a, 1.0);
  EXPECT_THROW(evaluate(p, fixed_prompt(c), c.eval_schedule(), TransitionKind::kExact, 1.0, score, 0, 3),
               InvalidArgument);
}

}  // namespace
}  // namespace maskgrpo
