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

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "maskgrpo/policy.h"

namespace fs = std::filesystem;

namespace maskgrpo {
namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" + MASKGRPO_CLI_PATH + "' " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("maskgrpo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& text) {
    const fs::path p = dir_ / "run.cfg";
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

constexpr const char* kHeader =
    "iter,mean_reward,std_reward,filtered_groups,resamples,loss,mean_ratio,clip_frac,mean_kl,"
    "grad_norm,wall_ms\n";

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train").code, 2);
  EXPECT_EQ(run("train -c " + (dir_ / "missing.cfg").string()).code, 2);
  EXPECT_EQ(run("sample -k " + (dir_ / "missing.mgpo").string() + " -p pattern:0").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, UnknownConfigKeyExitsTwo) {
  const fs::path cfg = write_config("iterations=1\nlearnin_rate=0.1\n");
  EXPECT_EQ(run("train -c " + cfg.string(), "MASKGRPO_OUT=" + (dir_ / "out").string()).code, 2);
}

TEST_F(CliTest, ZeroIterationTrainWritesHeaderAndInitialCheckpoint) {
  const fs::path cfg = write_config("iterations=0\nseed=3\ncanvas_n=4\nT=2\nhidden=8\nembed=2\n");
  const fs::path out = dir_ / "out";
  const RunResult r = run("train -c " + cfg.string(), "MASKGRPO_OUT=" + out.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(read_file(out / "metrics.csv"), kHeader);
  const PolicyParams saved = load_checkpoint(out / "final.mgpo");
  const PolicyParams init = PolicyParams::initialized(PolicyArch{4, 4, 8, 2}, 3);
  ASSERT_EQ(saved.size(), init.size());
  EXPECT_TRUE(std::equal(init.values().begin(), init.values().end(), saved.values().begin()));
}

TEST_F(CliTest, TrainWritesMetricsCheckpointsAndSampleReadsThem) {
  const fs::path out = dir_ / "cfg_out";
  const fs::path cfg = write_config("iterations=4\ncanvas_n=4\nT=2\nhidden=8\nembed=2\ngroup_size=4\n"
                                    "checkpoint_every=2\nwall_clock=false\noutput_dir=" +
                                    out.string() + "\n");
  ASSERT_EQ(run("train -c " + cfg.string()).code, 0);
  const std::string csv = read_file(out / "metrics.csv");
  EXPECT_EQ(csv.rfind(kHeader, 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(out / "checkpoint_000002.mgpo"));
  EXPECT_TRUE(fs::exists(out / "checkpoint_000004.mgpo"));

  const std::string ckpt = (out / "final.mgpo").string();
  const RunResult s = run("sample -k " + ckpt + " -p pattern:0,1,2,3 -n 20 -s 4");
  EXPECT_EQ(s.code, 0);
  EXPECT_FALSE(s.out.empty());
  EXPECT_EQ(run("sample -k " + ckpt + " -p pattern:0,1,2,3 -n 20 -s 4").out, s.out);
  EXPECT_EQ(run("sample -k " + ckpt + " -p count:v=1,k=2 -n 5 --kind ar --schedule uniform").code, 0);
  EXPECT_EQ(run("sample -k " + ckpt + " -p pattern:0,1 -n 5").code, 2);
  EXPECT_EQ(run("sample -k " + ckpt + " -p pattern:0,1,2,3 -T 9").code, 2);
  EXPECT_EQ(run("sample -k " + ckpt + " -p pattern:0,1,2,3 --kind sideways").code, 2);
}

TEST_F(CliTest, EnvironmentOverridesOutputDir) {
  const fs::path cfg_dir = dir_ / "from_config";
  const fs::path env_dir = dir_ / "from_env";
  const fs::path cfg = write_config("iterations=1\ncanvas_n=4\nT=2\nhidden=4\nembed=0\ngroup_size=2\n"
                                    "output_dir=" + cfg_dir.string() + "\n");
  ASSERT_EQ(run("train -c " + cfg.string(), "MASKGRPO_OUT=" + env_dir.string()).code, 0);
  EXPECT_TRUE(fs::exists(env_dir / "metrics.csv"));
  EXPECT_TRUE(fs::exists(env_dir / "final.mgpo"));
  EXPECT_FALSE(fs::exists(cfg_dir));
}

TEST_F(CliTest, RuntimeFailureExitsOne) {
  const fs::path out = dir_ / "out";
  fs::create_directories(out / "final.mgpo");
  const fs::path cfg = write_config("iterations=1\ncanvas_n=4\nT=2\nhidden=4\nembed=0\ngroup_size=2\n");
  EXPECT_EQ(run("train -c " + cfg.string(), "MASKGRPO_OUT=" + out.string()).code, 1);
}

TEST_F(CliTest, VerifySuitesPassAndAreReproducible) {
  const RunResult a = run("verify -n 200 -s 7");
  const RunResult b = run("verify -n 200 -s 7");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(run("gradcheck -n 10 -s 1").code, 0);
  EXPECT_EQ(run("d3pm -s 2").code, 0);
}

}  // namespace
}  // namespace maskgrpo
