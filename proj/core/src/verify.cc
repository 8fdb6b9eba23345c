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

#include "maskgrpo/verify.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include <fmt/format.h>

#include "maskgrpo/decoder.h"
#include "maskgrpo/discrete_diffusion.h"
#include "maskgrpo/errors.h"
#include "maskgrpo/grpo.h"
#include "maskgrpo/transition.h"

namespace maskgrpo {

namespace {

constexpr double kOracleTol = 1e-10;
constexpr double kOrderTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kFdStep = 1e-4;
constexpr int kMaxRedraws = 50;

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

void note(CheckResult& c, double err) {
  ++c.cases;
  c.worst = std::max(c.worst, err);
  if (!(err <= c.tolerance)) c.passed = false;
}

PolicyArch random_arch(Rng& rng) {
  PolicyArch a;
  a.n = uniform_int(rng, 2, 4);
  a.k = uniform_int(rng, 2, 3);
  a.hidden = uniform_int(rng, 2, 4);
  a.embed = uniform_int(rng, 0, 2);
  return a;
}

// Initialized weights scaled up so rows are far from uniform.
PolicyParams random_params(const PolicyArch& arch, Rng& rng, double scale) {
  PolicyParams p = PolicyParams::initialized(arch, rng.next_u64());
  for (double& v : p.values()) v *= scale;
  return p;
}

Prompt random_prompt(const PolicyArch& arch, Rng& rng) {
  std::vector<Token> target(static_cast<std::size_t>(arch.n));
  for (Token& t : target) t = static_cast<Token>(rng.below(static_cast<std::uint64_t>(arch.k)));
  return Prompt::pattern(std::move(target), arch.embed);
}

CanvasState random_partial_canvas(const PolicyArch& arch, Rng& rng) {
  std::vector<Token> tokens(static_cast<std::size_t>(arch.n));
  bool any = false;
  for (Token& t : tokens) {
    if (rng.uniform() < 0.6) {
      t = arch.k;
      any = true;
    } else {
      t = static_cast<Token>(rng.below(static_cast<std::uint64_t>(arch.k)));
    }
  }
  if (!any) tokens[rng.below(tokens.size())] = arch.k;
  return CanvasState::from_tokens(std::move(tokens), arch.k);
}

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// One transition-gradient case; returns the worst coordinate error, or
// nullopt when the stencil straddles a structure change.
std::optional<double> transition_grad_case(TransitionKind kind, Rng& rng) {
  const PolicyArch arch = random_arch(rng);
  PolicyParams params = random_params(arch, rng, 3.0);
  const Prompt prompt = random_prompt(arch, rng);
  const CanvasState state = random_partial_canvas(arch, rng);
  const double temp = rng.uniform(0.7, 1.5);

  ForwardCache cache;
  const ProbMatrix probs = policy_forward(params, state, prompt, temp, &cache);
  const SampledTokens draw = sample_step(probs, rng);
  const int n = uniform_int(rng, 1, probs.rows());
  const StepOutcome outcome = make_outcome(probs, draw.tokens, n);
  const auto key = transition_structure(kind, probs, outcome);

  std::vector<double> upstream(static_cast<std::size_t>(probs.rows() * probs.vocab()), 0.0);
  transition_logprob_grad(kind, probs, outcome, 1.0, upstream);
  std::vector<double> analytic(params.size(), 0.0);
  policy_backward(params, cache, upstream, analytic);

  auto forward_at = [&](std::span<const double> x) {
    return policy_forward(PolicyParams(arch, vec(x)), state, prompt, temp);
  };
  auto f = [&](std::span<const double> x) {
    return transition_logprob_unchecked(kind, forward_at(x), outcome);
  };
  auto valid = [&](std::span<const double> x) {
    const ProbMatrix p = forward_at(x);
    return std::isfinite(transition_logprob_unchecked(kind, p, outcome)) &&
           transition_structure(kind, p, outcome) == key;
  };
  if (!std::isfinite(f(params.values()))) return std::nullopt;
  std::vector<double> numeric(params.size());
  if (!central_difference(f, params.values(), kFdStep, numeric, valid)) return std::nullopt;
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    worst = std::max(worst, gradient_error(analytic[i], numeric[i]));
  }
  return worst;
}

std::optional<double> objective_grad_case(TransitionKind kind, double beta, Rng& rng) {
  const PolicyArch arch = random_arch(rng);
  const PolicyParams old_params = random_params(arch, rng, 3.0);
  const int steps = uniform_int(rng, 1, std::min(arch.n, 3));
  const UnmaskSchedule schedule = schedule_cosine(steps, arch.n);

  GrpoConfig cfg;
  cfg.group_size = uniform_int(rng, 2, 3);
  cfg.clip_eps = 0.2;
  cfg.kl_beta = beta;
  cfg.transition = kind;
  cfg.temperature = rng.uniform(0.7, 1.5);
  if (steps > 1 && rng.uniform() < 0.5) {
    cfg.reduction.kind = ReductionKind::kComputeSubset;
    cfg.reduction.subset_begin = uniform_int(rng, 0, steps - 1);
    cfg.reduction.subset_end = uniform_int(rng, cfg.reduction.subset_begin + 1, steps);
  }

  std::vector<Group> groups(static_cast<std::size_t>(uniform_int(rng, 1, 2)));
  for (Group& g : groups) {
    g.prompt = random_prompt(arch, rng);
    for (int j = 0; j < cfg.group_size; ++j) {
      Trajectory t = rollout(old_params, g.prompt, schedule, kind, cfg.temperature, rng.next_u64());
      if (!std::all_of(t.old_logprobs.begin(), t.old_logprobs.end(),
                       [](double v) { return std::isfinite(v); })) {
        return std::nullopt;
      }
      t.reward = rng.uniform();
      g.rewards.push_back(t.reward);
      g.trajectories.push_back(std::move(t));
    }
    Advantages adv = group_advantages(g.rewards);
    g.advantages = std::move(adv.values);
    g.vanishing = adv.vanishing;
  }

  auto perturbed = [&](double sigma) {
    std::vector<double> v = vec(old_params.values());
    for (double& x : v) x += sigma * rng.normal();
    return PolicyParams(arch, std::move(v));
  };
  PolicyParams params = perturbed(0.1);
  std::optional<PolicyParams> ref;
  if (beta > 0.0) ref.emplace(perturbed(0.1));
  const PolicyParams* ref_ptr = ref ? &*ref : nullptr;

  params.zero_grads();
  grpo_loss_and_grad(groups, params, ref_ptr, cfg);
  const std::vector<double> analytic = vec(params.grads());

  std::vector<std::uint64_t> key;
  grpo_objective(groups, params, ref_ptr, cfg, &key);
  auto f = [&](std::span<const double> x) {
    return -grpo_objective(groups, PolicyParams(arch, vec(x)), ref_ptr, cfg).objective;
  };
  auto valid = [&](std::span<const double> x) {
    std::vector<std::uint64_t> k;
    grpo_objective(groups, PolicyParams(arch, vec(x)), ref_ptr, cfg, &k);
    return k == key;
  };
  std::vector<double> numeric(params.size());
  if (!central_difference(f, params.values(), kFdStep, numeric, valid)) return std::nullopt;
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    worst = std::max(worst, gradient_error(analytic[i], numeric[i]));
  }
  return worst;
}

template <typename Case>
void run_grad_cases(CheckResult& check, int trials, Rng& rng, Case&& one) {
  int redraws = 0;
  for (int t = 0; t < trials; ++t) {
    std::optional<double> err;
    for (int attempt = 0; attempt < kMaxRedraws && !err; ++attempt) {
      err = one(rng);
      if (!err) ++redraws;
    }
    if (!err) {
      check.passed = false;
      check.detail = "could not find a smooth point";
      return;
    }
    note(check, *err);
  }
  check.detail = fmt::format("{} redrawn", redraws);
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void print_report(std::ostream& out, const SuiteReport& report) {
  for (const CheckResult& c : report.checks) {
    out << fmt::format("{} {:<34} cases={:<5} worst={:.3e} tol={:.1e}{}\n",
                       c.passed ? "PASS" : "FAIL", c.name, c.cases, c.worst, c.tolerance,
                       c.detail.empty() ? "" : "  (" + c.detail + ")");
  }
  out << (report.passed() ? "ALL PASS\n" : "FAILURES\n");
}

double gradient_error(double analytic, double numeric, double floor) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double diff = std::abs(analytic - numeric);
  return scale < floor ? diff : diff / scale;
}

bool central_difference(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> x, double h, std::span<double> out,
                        const std::function<bool(std::span<const double>)>& valid) {
  if (out.size() != x.size()) throw InvalidArgument("central_difference: size mismatch");
  std::vector<double> p(x.begin(), x.end());
  auto at = [&](std::size_t i, double offset, double& value) {
    p[i] = x[i] + offset;
    const bool ok = !valid || valid(p);
    value = ok ? f(p) : 0.0;
    p[i] = x[i];
    return ok;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    double fp2 = 0.0, fp1 = 0.0, fm1 = 0.0, fm2 = 0.0;
    if (!at(i, 2 * h, fp2) || !at(i, h, fp1) || !at(i, -h, fm1) || !at(i, -2 * h, fm2)) {
      return false;
    }
    out[i] = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
  }
  return true;
}

ProbMatrix random_tie_free_probs(Rng& rng, int rows, int k) {
  std::vector<int> positions(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) positions[static_cast<std::size_t>(r)] = r;
  while (true) {
    std::vector<double> logp(static_cast<std::size_t>(rows * k));
    for (int r = 0; r < rows; ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        logp[static_cast<std::size_t>(r * k + c)] = 1.5 * rng.normal();
        mx = std::max(mx, logp[static_cast<std::size_t>(r * k + c)]);
      }
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(logp[static_cast<std::size_t>(r * k + c)] - mx);
      const double lse = mx + std::log(sum);
      for (int c = 0; c < k; ++c) logp[static_cast<std::size_t>(r * k + c)] -= lse;
    }
    ProbMatrix probs(positions, k, std::move(logp));
    if (is_tie_free(probs)) return probs;
  }
}

SuiteReport run_verify(int trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("verify: trials must be >= 1");
  Rng rng(derive_stream_seed(seed, 0));
  CheckResult exact{"exact_vs_enumeration", true, 0.0, kOracleTol, 0, {}};
  CheckResult norm_enum{"enumeration_sums_to_one", true, 0.0, kOracleTol, 0, {}};
  CheckResult norm_exact{"exact_sums_to_one", true, 0.0, kOracleTol, 0, {}};
  CheckResult order{"ar <= exact <= unmasked", true, 0.0, kOrderTol, 0, {}};
  CheckResult full{"all_chosen_kinds_equal", true, 0.0, 0.0, 0, {}};
  double ar_gap = 0.0;
  double unmasked_gap = 0.0;

  for (int t = 0; t < trials; ++t) {
    const int k = uniform_int(rng, 2, 4);
    const int rows = uniform_int(rng, 1, 4);
    const int n = uniform_int(rng, 1, std::min(rows, 2));
    const ProbMatrix probs = random_tie_free_probs(rng, rows, k);
    const SampledTokens draw = sample_step(probs, rng);
    const StepOutcome outcome = make_outcome(probs, draw.tokens, n);

    const OracleReport rep = oracle_check(probs, outcome);
    note(exact, rep.abs_diff);

    const auto states = enumerate_next_states(probs, n);
    double total = 0.0;
    double total_exact = 0.0;
    for (const auto& s : states) {
      total += s.probability;
      total_exact += std::exp(trans_logprob_exact(probs, s.representative));
    }
    note(norm_enum, std::abs(total - 1.0));
    note(norm_exact, std::abs(total_exact - 1.0));

    const double ar = trans_logprob_ar(probs, outcome);
    const double ex = trans_logprob_exact(probs, outcome);
    const double un = trans_logprob_unmasked(probs, outcome);
    note(order, std::max({ar - ex, ex - un, 0.0}));
    ar_gap = std::max(ar_gap, std::abs(std::exp(ar) - rep.enumerated));
    unmasked_gap = std::max(unmasked_gap, std::abs(std::exp(un) - rep.enumerated));
    const StepOutcome all = make_outcome(probs, draw.tokens, rows);
    const double ar_all = trans_logprob_ar(probs, all);
    const double ex_all = trans_logprob_exact(probs, all);
    const double un_all = trans_logprob_unmasked(probs, all);
    note(full, std::max(std::abs(ar_all - ex_all), std::abs(un_all - ex_all)));
  }
  exact.detail = fmt::format("ar max gap {:.3e}, unmasked max gap {:.3e}", ar_gap, unmasked_gap);
  return SuiteReport{{exact, norm_enum, norm_exact, order, full}};
}

SuiteReport run_gradcheck(int trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("gradcheck: trials must be >= 1");
  SuiteReport report;
  const TransitionKind kinds[] = {TransitionKind::kArStyle, TransitionKind::kExact,
                                  TransitionKind::kUnmaskedOnly};
  std::uint64_t stream = 0;
  for (TransitionKind kind : kinds) {
    Rng rng(derive_stream_seed(seed, stream++));
    CheckResult c{fmt::format("logprob_grad[{}]", to_string(kind)), true, 0.0, kGradTol, 0, {}};
    run_grad_cases(c, trials, rng, [&](Rng& r) { return transition_grad_case(kind, r); });
    report.checks.push_back(std::move(c));
  }
  for (double beta : {0.0, 0.5}) {
    for (TransitionKind kind : kinds) {
      Rng rng(derive_stream_seed(seed, stream++));
      CheckResult c{fmt::format("objective_grad[{},beta={}]", to_string(kind), beta), true, 0.0,
                    kGradTol, 0, {}};
      run_grad_cases(c, trials, rng, [&](Rng& r) { return objective_grad_case(kind, beta, r); });
      report.checks.push_back(std::move(c));
    }
  }
  return report;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> random_betas(Rng& rng, int steps) {
  std::vector<double> b(static_cast<std::size_t>(steps));
  for (double& x : b) x = rng.uniform(0.01, 0.6);
  return b;
}

// Joint weights q(x_{t-1} = a, x_t = b | x0) by summing over every path.
MatrixXd path_joint(const d3pm::ForwardChain& chain, int x0, int t) {
  const int s = chain.states;
  std::vector<MatrixXd> q;
  for (int i = 1; i <= t; ++i) q.push_back(chain.step_matrix(i).q);
  MatrixXd joint = MatrixXd::Zero(s, s);
  std::vector<int> path(static_cast<std::size_t>(t), 0);
  while (true) {
    double w = 1.0;
    int prev = x0;
    for (int i = 0; i < t; ++i) {
      w *= q[static_cast<std::size_t>(i)](prev, path[static_cast<std::size_t>(i)]);
      prev = path[static_cast<std::size_t>(i)];
    }
    const int before = t >= 2 ? path[static_cast<std::size_t>(t - 2)] : x0;
    joint(before, path[static_cast<std::size_t>(t - 1)]) += w;
    int i = 0;
    while (i < t && ++path[static_cast<std::size_t>(i)] == s) path[static_cast<std::size_t>(i++)] = 0;
    if (i == t) break;
  }
  return joint;
}

}  // namespace

SuiteReport run_d3pm_checks(std::uint64_t seed) {
  Rng rng(derive_stream_seed(seed, 0));
  CheckResult stochastic{"row_stochastic", true, 0.0, 1e-12, 0, {}};
  CheckResult closed{"absorbing_closed_form", true, 0.0, 1e-12, 0, {}};
  CheckResult posterior{"reverse_posterior_vs_paths", true, 0.0, 1e-12, 0, {}};
  CheckResult nonneg{"elbo_terms_nonnegative", true, 0.0, 1e-12, 0, {}};
  CheckResult zero{"elbo_zero_at_true_x0", true, 0.0, 1e-12, 0, {}};
  CheckResult first{"elbo_first_term_is_nll", true, 0.0, 1e-12, 0, {}};

  auto row_error = [](const MatrixXd& m) {
    const double sums = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
    return std::max(sums, std::max(0.0, -m.minCoeff()));
  };

  for (d3pm::Kind kind : {d3pm::Kind::kUniform, d3pm::Kind::kAbsorbing}) {
    for (int states = 2; states <= 6; ++states) {
      const d3pm::ForwardChain chain{kind, states, random_betas(rng, 64)};
      for (int t = 1; t <= chain.steps(); ++t) {
        note(stochastic, row_error(chain.step_matrix(t).q));
        note(stochastic, row_error(chain.cumulative(t)));
      }
      if (kind != d3pm::Kind::kAbsorbing) continue;
      double keep = 1.0;
      for (int t = 0; t <= chain.steps(); ++t) {
        if (t > 0) keep *= 1.0 - chain.betas[static_cast<std::size_t>(t - 1)];
        MatrixXd expect = MatrixXd::Zero(states, states);
        for (int x = 0; x + 1 < states; ++x) {
          expect(x, x) = keep;
          expect(x, states - 1) = 1.0 - keep;
        }
        expect(states - 1, states - 1) = 1.0;
        note(closed, (chain.cumulative(t) - expect).cwiseAbs().maxCoeff());
      }
    }
  }

  for (int trial = 0; trial < 40; ++trial) {
    const auto kind = trial % 2 ? d3pm::Kind::kAbsorbing : d3pm::Kind::kUniform;
    const int states = uniform_int(rng, 2, 4);
    int max_t = 1;
    while (std::pow(states, max_t + 1) <= 1e4) ++max_t;
    const int t = uniform_int(rng, 1, max_t);
    const d3pm::ForwardChain chain{kind, states, random_betas(rng, t)};
    const MatrixXd qt = chain.step_matrix(t).q;
    const MatrixXd qbar_prev = chain.cumulative(t - 1);
    for (int x0 = 0; x0 < states; ++x0) {
      const MatrixXd joint = path_joint(chain, x0, t);
      for (int xt = 0; xt < states; ++xt) {
        const double mass = joint.col(xt).sum();
        if (mass <= 0.0) continue;
        const VectorXd expect = joint.col(xt) / mass;
        note(posterior, (d3pm::reverse_posterior(xt, x0, qt, qbar_prev) - expect).cwiseAbs().maxCoeff());
      }
    }

    std::vector<MatrixXd> predicted;
    std::vector<MatrixXd> perfect;
    const int x0 = uniform_int(rng, 0, kind == d3pm::Kind::kAbsorbing ? states - 2 : states - 1);
    for (int i = 0; i < t; ++i) {
      MatrixXd p(states, states);
      for (int r = 0; r < states; ++r) {
        for (int c = 0; c < states; ++c) p(r, c) = std::exp(rng.normal());
        p.row(r) /= p.row(r).sum();
      }
      predicted.push_back(p);
      MatrixXd one_hot = MatrixXd::Zero(states, states);
      one_hot.col(x0).setOnes();
      perfect.push_back(one_hot);
    }
    const d3pm::ElboTerms terms = d3pm::elbo_terms(chain, x0, predicted);
    for (double v : terms.per_step) note(nonneg, std::isfinite(v) ? std::max(0.0, -v) : 1.0);
    note(zero, std::abs(d3pm::elbo_terms(chain, x0, perfect).total));

    const VectorXd q1 = d3pm::forward_marginal(x0, std::span(chain.betas).first(1), kind, states);
    double nll = 0.0;
    for (int x1 = 0; x1 < states; ++x1) {
      if (q1(x1) <= 0.0) continue;
      nll -= q1(x1) * std::log(d3pm::model_reverse(chain, 1, x1, predicted[0].row(x1).transpose())(x0));
    }
    note(first, std::abs(terms.per_step[0] - nll));
  }
  return SuiteReport{{stochastic, closed, posterior, nonneg, zero, first}};
}

}  // namespace maskgrpo
