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

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "maskgrpo/errors.h"
#include "maskgrpo/rng.h"
#include "maskgrpo/transition.h"

namespace maskgrpo {

namespace {

constexpr std::uint64_t kPromptPoolStream = 99;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_int(std::string_view value, int line, std::string_view key) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError(line, fmt::format("line {}: {} expects an integer, got '{}'", line, key, value));
  }
  return out;
}

double parse_double(std::string_view value, int line, std::string_view key) {
  const std::string copy(value);
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size() || errno == ERANGE) {
    throw ConfigError(line, fmt::format("line {}: {} expects a number, got '{}'", line, key, value));
  }
  return out;
}

bool parse_bool(std::string_view value, int line, std::string_view key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(line, fmt::format("line {}: {} expects true or false, got '{}'", line, key, value));
}

std::vector<Token> parse_tokens(std::string_view value, int line, std::string_view key) {
  std::vector<Token> out;
  if (value.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = value.find(',', start);
    const auto piece = trim(value.substr(start, comma == std::string_view::npos ? comma : comma - start));
    out.push_back(parse_int<Token>(piece, line, key));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Wraps parsers that throw InvalidArgument so the message gains a line.
template <typename Fn>
auto with_line(int line, std::string_view key, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(line, fmt::format("line {}: {}: {}", line, key, e.what()));
  }
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, int, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto int_key = [&t](const char* name, auto member) {
      t[name] = [member](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
        std::invoke(member, c) = parse_int<int>(v, line, k);
      };
    };
    auto double_key = [&t](const char* name, auto member) {
      t[name] = [member](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
        std::invoke(member, c) = parse_double(v, line, k);
      };
    };
    int_key("threads", [](ExperimentConfig& c) -> int& { return c.train.threads; });
    int_key("iterations", [](ExperimentConfig& c) -> int& { return c.train.grpo.iterations; });
    int_key("group_size", [](ExperimentConfig& c) -> int& { return c.train.grpo.group_size; });
    int_key("inner_epochs", [](ExperimentConfig& c) -> int& { return c.train.grpo.inner_epochs; });
    int_key("subset_begin",
            [](ExperimentConfig& c) -> int& { return c.train.grpo.reduction.subset_begin; });
    int_key("subset_end",
            [](ExperimentConfig& c) -> int& { return c.train.grpo.reduction.subset_end; });
    int_key("T", [](ExperimentConfig& c) -> int& { return c.train.steps; });
    int_key("canvas_n", [](ExperimentConfig& c) -> int& { return c.train.arch.n; });
    int_key("canvas_k", [](ExperimentConfig& c) -> int& { return c.train.arch.k; });
    int_key("hidden", [](ExperimentConfig& c) -> int& { return c.train.arch.hidden; });
    int_key("embed", [](ExperimentConfig& c) -> int& { return c.train.arch.embed; });
    int_key("num_prompts", [](ExperimentConfig& c) -> int& { return c.num_prompts; });
    int_key("count_value", [](ExperimentConfig& c) -> int& { return c.count_value; });
    int_key("count_target", [](ExperimentConfig& c) -> int& { return c.count_target; });
    int_key("groups_per_iter", [](ExperimentConfig& c) -> int& { return c.train.groups_per_iter; });
    int_key("filter_window", [](ExperimentConfig& c) -> int& { return c.train.filter.window; });
    int_key("filter_warmup", [](ExperimentConfig& c) -> int& { return c.train.filter.warmup_min; });
    int_key("filter_max_resamples",
            [](ExperimentConfig& c) -> int& { return c.train.filter.max_resamples; });
    int_key("eval_episodes", [](ExperimentConfig& c) -> int& { return c.train.eval_episodes; });
    int_key("checkpoint_every", [](ExperimentConfig& c) -> int& { return c.checkpoint_every; });

    double_key("clip_eps", [](ExperimentConfig& c) -> double& { return c.train.grpo.clip_eps; });
    double_key("kl_beta", [](ExperimentConfig& c) -> double& { return c.train.grpo.kl_beta; });
    double_key("learning_rate",
               [](ExperimentConfig& c) -> double& { return c.train.grpo.learning_rate; });
    double_key("adam_beta1", [](ExperimentConfig& c) -> double& { return c.train.grpo.adam_beta1; });
    double_key("adam_beta2", [](ExperimentConfig& c) -> double& { return c.train.grpo.adam_beta2; });
    double_key("adam_eps", [](ExperimentConfig& c) -> double& { return c.train.grpo.adam_eps; });
    double_key("gamma", [](ExperimentConfig& c) -> double& { return c.train.grpo.gamma; });
    double_key("temperature",
               [](ExperimentConfig& c) -> double& { return c.train.grpo.temperature; });
    double_key("filter_q", [](ExperimentConfig& c) -> double& { return c.train.filter.percentile; });

    t["seed"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      c.train.grpo.seed = parse_int<std::uint64_t>(v, line, k);
    };
    t["T_train"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      c.train.grpo.reduction.train_steps = parse_int<int>(v, line, k);
    };
    t["transition"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      c.train.grpo.transition = with_line(line, k, [&] { return parse_transition_kind(v); });
    };
    t["reduction"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      c.train.grpo.reduction.kind = with_line(line, k, [&] { return parse_reduction_kind(v); });
    };
    t["schedule"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      c.train.schedule = with_line(line, k, [&] { return parse_schedule_kind(v); });
    };
    t["reward"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      if (v == "pattern") {
        c.task = TaskKind::kPatternMatch;
      } else if (v == "count") {
        c.task = TaskKind::kTokenCount;
      } else {
        throw ConfigError(line, fmt::format("line {}: {} must be pattern or count, got '{}'", line,
                                            k, v));
      }
    };
    t["target"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      c.target = parse_tokens(v, line, k);
    };
    t["filter"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      c.train.filter.enabled = parse_bool(v, line, k);
    };
    t["wall_clock"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      c.train.wall_clock = parse_bool(v, line, k);
    };
    t["output_dir"] = [](ExperimentConfig& c, std::string_view v, int line, std::string_view k) {
      if (v.empty()) throw ConfigError(line, fmt::format("line {}: {} must not be empty", line, k));
      c.output_dir = std::filesystem::path(std::string(v));
    };
    return t;
  }();
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(0, e.what());
  }
  const int n = train.arch.n;
  const int k = train.arch.k;
  if (num_prompts < 1) throw ConfigError(0, "num_prompts must be >= 1");
  if (checkpoint_every < 0) throw ConfigError(0, "checkpoint_every must be >= 0");
  if (task == TaskKind::kPatternMatch && !target.empty()) {
    if (static_cast<int>(target.size()) != n) {
      throw ConfigError(0, fmt::format("target has {} tokens, canvas_n is {}", target.size(), n));
    }
    for (Token t : target) {
      if (t < 0 || t >= k) {
        throw ConfigError(0, fmt::format("target token {} outside [0, {})", t, k));
      }
    }
  }
  if (task == TaskKind::kTokenCount) {
    if (count_value < 0 || count_value >= k) {
      throw ConfigError(0, fmt::format("count_value {} outside [0, {})", count_value, k));
    }
    if (count_target < 0 || count_target > n) {
      throw ConfigError(0, fmt::format("count_target {} outside [0, {}]", count_target, n));
    }
  }
}

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string, std::less<>> seen;
  bool reduction_given = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(line_no, fmt::format("line {}: expected key=value, got '{}'", line_no, line));
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, fmt::format("line {}: missing key", line_no));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError(line_no, fmt::format("line {}: unknown key '{}'", line_no, key));
    }
    if (!seen.emplace(key).second) {
      throw ConfigError(line_no, fmt::format("line {}: duplicate key '{}'", line_no, key));
    }
    it->second(config, value, line_no, key);
    if (key == "reduction") reduction_given = true;
  }
  Reduction& red = config.train.grpo.reduction;
  if (seen.contains("T_train") && !reduction_given) red.kind = ReductionKind::kUnmaskReduce;
  if (red.kind == ReductionKind::kUnmaskReduce && !seen.contains("T_train")) {
    throw ConfigError(0, "reduction=unmask_reduce requires T_train");
  }
  if (red.kind != ReductionKind::kUnmaskReduce && seen.contains("T_train")) {
    throw ConfigError(0, "T_train is only meaningful with reduction=unmask_reduce");
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

PromptSampler make_prompt_sampler(const ExperimentConfig& config) {
  const PolicyArch& arch = config.train.arch;
  std::vector<Prompt> pool;
  if (config.task == TaskKind::kPatternMatch && !config.target.empty()) {
    pool.push_back(Prompt::pattern(config.target, arch.embed));
  } else if (config.task == TaskKind::kTokenCount && config.num_prompts == 1) {
    pool.push_back(Prompt::count(config.count_value, config.count_target, arch.embed));
  } else {
    Rng rng(derive_stream_seed(config.train.grpo.seed, kPromptPoolStream));
    for (int i = 0; i < config.num_prompts; ++i) {
      if (config.task == TaskKind::kPatternMatch) {
        std::vector<Token> target(static_cast<std::size_t>(arch.n));
        for (Token& t : target) t = static_cast<Token>(rng.below(static_cast<std::uint64_t>(arch.k)));
        pool.push_back(Prompt::pattern(std::move(target), arch.embed));
      } else {
        const auto v = static_cast<Token>(rng.below(static_cast<std::uint64_t>(arch.k)));
        const auto c = static_cast<int>(rng.below(static_cast<std::uint64_t>(arch.n) + 1));
        pool.push_back(Prompt::count(v, c, arch.embed));
      }
    }
  }
  return [pool = std::move(pool)](Rng& rng) {
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
  };
}

Prompt parse_prompt_spec(std::string_view spec, int embed_dim) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw InvalidArgument(fmt::format("prompt '{}' must look like pattern:... or count:...", spec));
  }
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view body = spec.substr(colon + 1);
  try {
    if (kind == "pattern") return Prompt::pattern(parse_tokens(body, 0, "pattern"), embed_dim);
    if (kind == "count") {
      std::optional<int> v;
      std::optional<int> k;
      std::size_t start = 0;
      while (start <= body.size()) {
        const auto comma = body.find(',', start);
        const auto item = trim(
            body.substr(start, comma == std::string_view::npos ? comma : comma - start));
        start = comma == std::string_view::npos ? body.size() + 1 : comma + 1;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) break;
        const auto key = trim(item.substr(0, eq));
        const int val = parse_int<int>(trim(item.substr(eq + 1)), 0, key);
        if (key == "v") v = val;
        else if (key == "k") k = val;
      }
      if (!v || !k) throw InvalidArgument("count prompt needs v=<token>,k=<count>");
      return Prompt::count(*v, *k, embed_dim);
    }
  } catch (const ConfigError& e) {
    throw InvalidArgument(e.what());
  }
  throw InvalidArgument(fmt::format("unknown prompt kind '{}'", kind));
}

}  // namespace maskgrpo
