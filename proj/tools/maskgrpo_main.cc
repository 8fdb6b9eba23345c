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

// maskgrpo: train, sample and self-check the Mask-GRPO toy lab.
//
// Exit status: 0 ok, 1 a check or assertion failed, 2 usage or
// configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "maskgrpo/config.h"
#include "maskgrpo/decoder.h"
#include "maskgrpo/errors.h"
#include "maskgrpo/rewards.h"
#include "maskgrpo/trainer.h"
#include "maskgrpo/transition.h"
#include "maskgrpo/verify.h"

namespace fs = std::filesystem;
using namespace maskgrpo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

// Thrown for bad command-line input that CLI11 cannot catch itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failing to write a checkpoint mid-run is a runtime failure, not bad input.
void write_checkpoint(const PolicyParams& params, const fs::path& path) {
  try {
    save_checkpoint(params, path);
  } catch (const CheckpointError& e) {
    throw std::runtime_error(e.what());
  }
}

fs::path output_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv("MASKGRPO_OUT"); env != nullptr && *env != '\0') return env;
  return config.output_dir;
}

int cmd_train(const std::string& config_path) {
  const ExperimentConfig config = parse_config(config_path);
  const fs::path out = output_dir(config);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw UsageError(fmt::format("cannot create output directory '{}': {}", out.string(), ec.message()));

  std::ofstream csv(out / "metrics.csv", std::ios::trunc);
  if (!csv) throw UsageError(fmt::format("cannot write '{}'", (out / "metrics.csv").string()));
  write_metrics_header(csv);
  csv.flush();

  const PromptSampler sampler = make_prompt_sampler(config);
  TrainCallbacks callbacks;
  callbacks.on_metrics = [&](const MetricsRow& row) {
    write_metrics_row(csv, row);
    csv.flush();
    if ((row.iter + 1) % 25 == 0) {
      std::cerr << fmt::format("iter {:>5}  reward {:.4f}  std {:.4f}  loss {:+.5f}  kl {:.5f}\n",
                               row.iter + 1, row.mean_reward, row.std_reward, row.loss, row.mean_kl);
    }
  };
  callbacks.on_iteration = [&](int iter, const PolicyParams& params) {
    if (config.checkpoint_every > 0 && iter % config.checkpoint_every == 0) {
      write_checkpoint(params, out / fmt::format("checkpoint_{:06d}.mgpo", iter));
    }
  };
  callbacks.on_warning = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };

  const TrainResult result = train(config.train, score, sampler, callbacks);
  write_checkpoint(result.params, out / "final.mgpo");

  std::cout << fmt::format("trained {} iterations; artifacts in {}\n", config.train.grpo.iterations,
                           out.string());
  if (result.budget_exhausted > 0) {
    std::cout << fmt::format("{} groups accepted after exhausting the resample budget\n",
                             result.budget_exhausted);
  }
  if (result.initial_eval_reward && result.final_eval_reward) {
    std::cout << fmt::format("full-T eval reward: {:.4f} -> {:.4f}\n", *result.initial_eval_reward,
                             *result.final_eval_reward);
  }
  return kExitOk;
}

struct SampleOptions {
  std::string checkpoint;
  std::string prompt;
  int count = 1;
  int steps = 0;
  std::string schedule = "cosine";
  std::string kind = "exact";
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int show = 5;
  std::string dump;
};

int cmd_sample(const SampleOptions& opt) {
  if (opt.count < 1) throw UsageError("--count must be >= 1");
  const PolicyParams params = load_checkpoint(opt.checkpoint);
  const PolicyArch& arch = params.arch();
  Prompt prompt;
  try {
    prompt = parse_prompt_spec(opt.prompt, arch.embed);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const int steps = opt.steps > 0 ? opt.steps : std::min(arch.n, 8);
  UnmaskSchedule schedule;
  TransitionKind kind;
  try {
    schedule = make_schedule(parse_schedule_kind(opt.schedule), steps, arch.n);
    kind = parse_transition_kind(opt.kind);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  std::ofstream dump;
  if (!opt.dump.empty()) {
    dump.open(opt.dump, std::ios::trunc);
    if (!dump) throw UsageError(fmt::format("cannot write '{}'", opt.dump));
  }

  std::map<std::string, int> histogram;
  double reward_sum = 0.0;
  for (int i = 0; i < opt.count; ++i) {
    const Trajectory traj = rollout(params, prompt, schedule, kind, opt.temperature,
                                    derive_stream_seed(opt.seed, static_cast<std::uint64_t>(i)));
    const double r = score(traj.final_state(), prompt);
    reward_sum += r;
    ++histogram[traj.final_state().to_string()];
    if (i < opt.show) {
      std::cout << fmt::format("sample {}  reward {:.4f}\n", i, r);
      write_trajectory_text(std::cout, traj);
    }
    if (dump.is_open()) {
      dump << fmt::format("# sample {} reward {:.17g}\n", i, r);
      write_trajectory_text(dump, traj);
    }
  }

  std::cout << fmt::format("prompt {}  samples {}  mean reward {:.6f}\n", prompt.describe(),
                           opt.count, reward_sum / opt.count);
  std::cout << fmt::format("{} distinct canvases\n", histogram.size());
  constexpr std::size_t kMaxRows = 32;
  std::vector<std::pair<std::string, int>> rows(histogram.begin(), histogram.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < rows.size() && i < kMaxRows; ++i) {
    std::cout << fmt::format("  {}  {:>8}  {:.4f}\n", rows[i].first, rows[i].second,
                             static_cast<double>(rows[i].second) / opt.count);
  }
  return kExitOk;
}

int report_status(const SuiteReport& report) {
  print_report(std::cout, report);
  return report.passed() ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask-GRPO toy lab"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train a policy from a config file");
  train_cmd->add_option("-c,--config", config_path, "key=value config file")->required();

  SampleOptions sample;
  auto* sample_cmd = app.add_subcommand("sample", "Decode canvases from a checkpoint");
  sample_cmd->add_option("-k,--checkpoint", sample.checkpoint, "checkpoint file")->required();
  sample_cmd->add_option("-p,--prompt", sample.prompt, "pattern:0,1,.. or count:v=1,k=3")->required();
  sample_cmd->add_option("-n,--count", sample.count, "number of samples");
  sample_cmd->add_option("-T,--steps", sample.steps, "decoding iterations (default min(N, 8))");
  sample_cmd->add_option("--schedule", sample.schedule, "cosine | uniform");
  sample_cmd->add_option("--kind", sample.kind, "ar | exact | unmasked");
  sample_cmd->add_option("--temperature", sample.temperature, "softmax temperature");
  sample_cmd->add_option("-s,--seed", sample.seed, "sampling seed");
  sample_cmd->add_option("--show", sample.show, "print per-step logs for the first N samples");
  sample_cmd->add_option("--dump", sample.dump, "write every per-step log to this file");

  int verify_trials = 1000;
  std::uint64_t verify_seed = 0;
  auto* verify_cmd = app.add_subcommand("verify", "Transition probabilities vs enumeration");
  verify_cmd->add_option("-n,--trials", verify_trials, "random instances");
  verify_cmd->add_option("-s,--seed", verify_seed, "seed");

  int grad_trials = 100;
  std::uint64_t grad_seed = 0;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Analytic gradients vs finite differences");
  grad_cmd->add_option("-n,--trials", grad_trials, "configurations per check");
  grad_cmd->add_option("-s,--seed", grad_seed, "seed");

  std::uint64_t d3pm_seed = 0;
  auto* d3pm_cmd = app.add_subcommand("d3pm", "Discrete diffusion property suite");
  d3pm_cmd->add_option("-s,--seed", d3pm_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(config_path);
    if (*sample_cmd) return cmd_sample(sample);
    if (*verify_cmd) return report_status(run_verify(verify_trials, verify_seed));
    if (*grad_cmd) return report_status(run_gradcheck(grad_trials, grad_seed));
    if (*d3pm_cmd) return report_status(run_d3pm_checks(d3pm_seed));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  return kExitUsage;
}
