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

#include "maskgrpo/config.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "maskgrpo/errors.h"

namespace maskgrpo {
namespace {

int error_line(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string error_message(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(ConfigTest, EmptyTextGivesDefaults) {
  const ExperimentConfig c = parse_config_text("");
  EXPECT_EQ(c.train.grpo.group_size, 6);
  EXPECT_EQ(c.train.grpo.clip_eps, 0.2);
  EXPECT_EQ(c.train.grpo.kl_beta, 0.0);
  EXPECT_EQ(c.train.grpo.learning_rate, 1e-3);
  EXPECT_EQ(c.train.grpo.adam_beta1, 0.95);
  EXPECT_EQ(c.train.grpo.transition, TransitionKind::kExact);
  EXPECT_EQ(c.train.grpo.reduction.kind, ReductionKind::kNone);
  EXPECT_EQ(c.train.steps, 8);
  EXPECT_EQ(c.train.arch.n, 16);
  EXPECT_EQ(c.train.arch.k, 4);
  EXPECT_TRUE(c.train.filter.enabled);
  EXPECT_EQ(c.train.filter.window, 200);
  EXPECT_EQ(c.task, TaskKind::kPatternMatch);
  EXPECT_EQ(c.output_dir, std::filesystem::path("runs/default"));
}

TEST(ConfigTest, ParsesValuesCommentsAndWhitespace) {
  const ExperimentConfig c = parse_config_text(
      "# header comment\n"
      "group_size=2\n"
      "\n"
      "  clip_eps = 0.1   # trailing comment\n"
      "transition=ar\n"
      "schedule=uniform\n"
      "reward=count\n"
      "count_value=1\n"
      "count_target=3\n"
      "filter=false\n"
      "wall_clock=false\n"
      "seed=18446744073709551615\n");
  EXPECT_EQ(c.train.grpo.group_size, 2);
  EXPECT_EQ(c.train.grpo.clip_eps, 0.1);
  EXPECT_EQ(c.train.grpo.transition, TransitionKind::kArStyle);
  EXPECT_EQ(c.train.schedule, ScheduleKind::kUniform);
  EXPECT_EQ(c.task, TaskKind::kTokenCount);
  EXPECT_EQ(c.count_value, 1);
  EXPECT_EQ(c.count_target, 3);
  EXPECT_FALSE(c.train.filter.enabled);
  EXPECT_FALSE(c.train.wall_clock);
  EXPECT_EQ(c.train.grpo.seed, 18446744073709551615ull);
}

TEST(ConfigTest, TargetList) {
  const ExperimentConfig c = parse_config_text("T=4\ncanvas_n=4\ntarget=0, 1,2,3\n");
  EXPECT_EQ(c.target, (std::vector<Token>{0, 1, 2, 3}));
  EXPECT_EQ(error_line("T=4\ncanvas_n=4\ntarget=0,1,2\n"), 0);
  EXPECT_EQ(error_line("T=4\ncanvas_n=4\ntarget=0,1,2,9\n"), 0);
  EXPECT_EQ(error_line("T=4\ncanvas_n=4\ntarget=0,x,2,3\n"), 3);
}

TEST(ConfigTest, CrossFieldErrorHasNoLine) {
  EXPECT_EQ(error_line("T=10\ncanvas_n=4\n"), 0);
}

TEST(ConfigTest, LineNumbersInDiagnostics) {
  EXPECT_EQ(error_line("group_size=2\nbogus=1\n"), 2);
  EXPECT_NE(error_message("group_size=2\nbogus=1\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_message("group_size=2\nbogus=1\n").find("bogus"), std::string::npos);
  EXPECT_EQ(error_line("# c\n\nno equals sign\n"), 3);
  EXPECT_EQ(error_line("group_size=two\n"), 1);
  EXPECT_EQ(error_line("clip_eps=0.2x\n"), 1);
  EXPECT_EQ(error_line("filter=maybe\n"), 1);
  EXPECT_EQ(error_line("transition=diagonal\n"), 1);
  EXPECT_EQ(error_line("reward=style\n"), 1);
  EXPECT_EQ(error_line("=3\n"), 1);
  EXPECT_EQ(error_line("seed=1\nhidden=8\nseed=2\n"), 3);
}

TEST(ConfigTest, UnmaskReduceWiring) {
  const ExperimentConfig c = parse_config_text("T=8\nT_train=4\n");
  EXPECT_EQ(c.train.grpo.reduction.kind, ReductionKind::kUnmaskReduce);
  EXPECT_EQ(c.train.grpo.reduction.train_steps, 4);
  EXPECT_EQ(c.train.train_schedule().total_steps(), 4);
  EXPECT_EQ(c.train.eval_schedule().total_steps(), 8);
  EXPECT_EQ(error_line("reduction=unmask_reduce\n"), 0);
  EXPECT_EQ(error_line("reduction=none\nT_train=4\n"), 0);
  EXPECT_EQ(error_line("T=8\nT_train=9\n"), 0);
}

TEST(ConfigTest, ComputeSubsetRange) {
  const ExperimentConfig c =
      parse_config_text("reduction=compute_subset\nsubset_begin=2\nsubset_end=5\n");
  EXPECT_EQ(c.train.grpo.reduction.subset_begin, 2);
  EXPECT_EQ(c.train.grpo.reduction.subset_end, 5);
  EXPECT_EQ(error_line("reduction=compute_subset\nsubset_begin=5\nsubset_end=5\n"), 0);
}

TEST(ConfigTest, ReadsFileAndReportsMissingFile) {
  const auto dir = std::filesystem::temp_directory_path() / "maskgrpo_config_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "c.cfg";
  {
    std::ofstream out(path);
    out << "iterations=7\noutput_dir=/tmp/x\n";
  }
  const ExperimentConfig c = parse_config(path);
  EXPECT_EQ(c.train.grpo.iterations, 7);
  EXPECT_EQ(c.output_dir, std::filesystem::path("/tmp/x"));
  EXPECT_THROW(parse_config(dir / "missing.cfg"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(PromptSamplerTest, FixedTargetAlwaysReturned) {
  const ExperimentConfig c = parse_config_text("T=4\ncanvas_n=4\ntarget=3,2,1,0\nembed=3\n");
  const PromptSampler s = make_prompt_sampler(c);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(s(rng), Prompt::pattern({3, 2, 1, 0}, 3));
}

TEST(PromptSamplerTest, RandomPoolIsSeededAndBounded) {
  const ExperimentConfig c = parse_config_text("T=5\ncanvas_n=5\ncanvas_k=3\nnum_prompts=4\nseed=9\n");
  const PromptSampler a = make_prompt_sampler(c);
  const PromptSampler b = make_prompt_sampler(c);
  Rng ra(2), rb(2);
  std::set<std::vector<Token>> distinct;
  for (int i = 0; i < 200; ++i) {
    const Prompt p = a(ra);
    ASSERT_EQ(p, b(rb));
    ASSERT_EQ(p.target.size(), 5u);
    for (Token t : p.target) ASSERT_LT(t, 3);
    distinct.insert(p.target);
  }
  EXPECT_LE(distinct.size(), 4u);
  EXPECT_GE(distinct.size(), 2u);
}

TEST(PromptSpecTest, Parses) {
  EXPECT_EQ(parse_prompt_spec("pattern:0,1,2", 2), Prompt::pattern({0, 1, 2}, 2));
  EXPECT_EQ(parse_prompt_spec("count:v=1,k=3", 2), Prompt::count(1, 3, 2));
  EXPECT_EQ(parse_prompt_spec("count:k=3,v=1", 0), Prompt::count(1, 3, 0));
  EXPECT_THROW(parse_prompt_spec("pattern", 0), InvalidArgument);
  EXPECT_THROW(parse_prompt_spec("shape:1", 0), InvalidArgument);
  EXPECT_THROW(parse_prompt_spec("count:v=1", 0), InvalidArgument);
  EXPECT_THROW(parse_prompt_spec("pattern:0,a", 0), InvalidArgument);
}

}  // namespace
}  // namespace maskgrpo
