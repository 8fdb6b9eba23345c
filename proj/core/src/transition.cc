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

#include "maskgrpo/transition.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "maskgrpo/errors.h"

namespace maskgrpo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_consistent(const ProbMatrix& probs, const StepOutcome& outcome) {
  const auto rows = static_cast<std::size_t>(probs.rows());
  if (outcome.positions.size() != rows || outcome.sampled.size() != rows ||
      outcome.chosen.size() != rows) {
    throw InvalidArgument(fmt::format("outcome covers {} positions but probs has {} rows",
                                      outcome.positions.size(), rows));
  }
  if (!std::equal(outcome.positions.begin(), outcome.positions.end(), probs.positions().begin())) {
    throw InvalidArgument("outcome and probs refer to different masked positions");
  }
  for (Token s : outcome.sampled) {
    if (s < 0 || s >= probs.vocab()) {
      throw InvalidArgument(fmt::format("sampled token {} outside [0, {})", s, probs.vocab()));
    }
  }
}

// Smallest chosen confidence, recomputed from `probs`.
double min_chosen_confidence(const ProbMatrix& probs, const StepOutcome& outcome) {
  double m = std::numeric_limits<double>::infinity();
  for (int r = 0; r < probs.rows(); ++r) {
    if (outcome.chosen[static_cast<std::size_t>(r)]) {
      m = std::min(m, probs.prob(r, outcome.sampled[static_cast<std::size_t>(r)]));
    }
  }
  return m;
}

// log of the mass strictly below `threshold` in row r; -inf if none.
double log_mass_below(const ProbMatrix& probs, int r, double threshold) {
  double mx = kNegInf;
  for (int c = 0; c < probs.vocab(); ++c) {
    if (probs.prob(r, c) < threshold) mx = std::max(mx, probs.log_prob(r, c));
  }
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (int c = 0; c < probs.vocab(); ++c) {
    if (probs.prob(r, c) < threshold) s += std::exp(probs.log_prob(r, c) - mx);
  }
  return mx + std::log(s);
}

double checked(double v, TransitionKind kind) {
  if (v == kNegInf || std::isnan(v)) {
    throw NumericalError(
        fmt::format("{} transition probability is zero for this outcome", to_string(kind)));
  }
  return v;
}

}  // namespace

std::string_view to_string(TransitionKind kind) {
  switch (kind) {
    case TransitionKind::kArStyle: return "ar";
    case TransitionKind::kExact: return "exact";
    case TransitionKind::kUnmaskedOnly: return "unmasked";
  }
  return "?";
}

TransitionKind parse_transition_kind(std::string_view name) {
  if (name == "ar" || name == "ar_style") return TransitionKind::kArStyle;
  if (name == "exact") return TransitionKind::kExact;
  if (name == "unmasked" || name == "unmasked_only") return TransitionKind::kUnmaskedOnly;
  throw InvalidArgument(fmt::format("unknown transition kind '{}' (expected ar|exact|unmasked)", name));
}

double transition_logprob_unchecked(TransitionKind kind, const ProbMatrix& probs,
                                    const StepOutcome& outcome) {
  check_consistent(probs, outcome);
  double sum = 0.0;
  const double threshold =
      kind == TransitionKind::kExact ? min_chosen_confidence(probs, outcome) : 0.0;
  for (int r = 0; r < probs.rows(); ++r) {
    const auto j = static_cast<std::size_t>(r);
    if (outcome.chosen[j] || kind == TransitionKind::kArStyle) {
      sum += probs.log_prob(r, outcome.sampled[j]);
    } else if (kind == TransitionKind::kExact) {
      sum += log_mass_below(probs, r, threshold);
    }
  }
  return sum;
}

double trans_logprob_ar(const ProbMatrix& probs, const StepOutcome& outcome) {
  return transition_logprob(TransitionKind::kArStyle, probs, outcome);
}

double trans_logprob_exact(const ProbMatrix& probs, const StepOutcome& outcome) {
  return transition_logprob(TransitionKind::kExact, probs, outcome);
}

double trans_logprob_unmasked(const ProbMatrix& probs, const StepOutcome& outcome) {
  return transition_logprob(TransitionKind::kUnmaskedOnly, probs, outcome);
}

double transition_logprob(TransitionKind kind, const ProbMatrix& probs, const StepOutcome& outcome) {
  return checked(transition_logprob_unchecked(kind, probs, outcome), kind);
}

void transition_logprob_grad(TransitionKind kind, const ProbMatrix& probs,
                             const StepOutcome& outcome, double scale, std::span<double> upstream) {
  check_consistent(probs, outcome);
  const auto kk = static_cast<std::size_t>(probs.vocab());
  if (upstream.size() != static_cast<std::size_t>(probs.rows()) * kk) {
    throw InvalidArgument("transition_logprob_grad: upstream buffer has the wrong length");
  }
  const double threshold =
      kind == TransitionKind::kExact ? min_chosen_confidence(probs, outcome) : 0.0;
  for (int r = 0; r < probs.rows(); ++r) {
    const auto j = static_cast<std::size_t>(r);
    double* g = upstream.data() + j * kk;
    if (outcome.chosen[j] || kind == TransitionKind::kArStyle) {
      g[outcome.sampled[j]] += scale;
    } else if (kind == TransitionKind::kExact) {
      const double lse = log_mass_below(probs, r, threshold);
      if (lse == kNegInf) continue;
      for (int c = 0; c < probs.vocab(); ++c) {
        if (probs.prob(r, c) < threshold) {
          g[static_cast<std::size_t>(c)] += scale * std::exp(probs.log_prob(r, c) - lse);
        }
      }
    }
  }
}

std::vector<std::uint64_t> transition_structure(TransitionKind kind, const ProbMatrix& probs,
                                                const StepOutcome& outcome) {
  check_consistent(probs, outcome);
  std::vector<std::uint64_t> key;
  if (kind != TransitionKind::kExact) return key;
  const double threshold = min_chosen_confidence(probs, outcome);
  for (int r = 0; r < probs.rows(); ++r) {
    if (outcome.chosen[static_cast<std::size_t>(r)]) continue;
    for (int c = 0; c < probs.vocab(); ++c) {
      key.push_back(probs.prob(r, c) < threshold ? 1u : 0u);
    }
  }
  return key;
}

NextStateSignature signature_of(const StepOutcome& outcome) {
  return NextStateSignature{outcome.chosen_positions(), outcome.chosen_values()};
}

StepOutcome make_outcome(const ProbMatrix& probs, std::vector<Token> sampled, int n_chosen) {
  if (sampled.size() != static_cast<std::size_t>(probs.rows())) {
    throw InvalidArgument("make_outcome: one sampled token per row required");
  }
  StepOutcome o;
  o.positions.assign(probs.positions().begin(), probs.positions().end());
  o.confidences.resize(sampled.size());
  for (std::size_t j = 0; j < sampled.size(); ++j) {
    if (sampled[j] < 0 || sampled[j] >= probs.vocab()) {
      throw InvalidArgument(fmt::format("make_outcome: token {} out of range", sampled[j]));
    }
    o.confidences[j] = probs.prob(static_cast<int>(j), sampled[j]);
  }
  o.sampled = std::move(sampled);
  o.chosen = cam_select(o.confidences, n_chosen);
  return o;
}

std::vector<NextStateProbability> enumerate_next_states(const ProbMatrix& probs, int n_chosen) {
  const int rows = probs.rows();
  const int k = probs.vocab();
  if (n_chosen < 1 || n_chosen > rows) {
    throw InvalidArgument(fmt::format("enumerate_next_states: n={} with {} masked rows", n_chosen, rows));
  }
  std::uint64_t total = 1;
  for (int r = 0; r < rows; ++r) {
    total *= static_cast<std::uint64_t>(k);
    if (total > kMaxEnumeratedSamplings) {
      throw InvalidArgument(fmt::format(
          "enumerate_next_states: K^rows = {}^{} exceeds the {} sampling limit", k, rows,
          kMaxEnumeratedSamplings));
    }
  }

  std::map<NextStateSignature, NextStateProbability> acc;
  std::vector<Token> sample(static_cast<std::size_t>(rows), 0);
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    double joint = 1.0;
    for (int r = 0; r < rows; ++r) joint *= probs.prob(r, sample[static_cast<std::size_t>(r)]);
    if (joint > 0.0) {
      StepOutcome o = make_outcome(probs, sample, n_chosen);
      NextStateSignature sig = signature_of(o);
      auto it = acc.find(sig);
      if (it == acc.end()) {
        acc.emplace(sig, NextStateProbability{sig, joint, std::move(o)});
      } else {
        it->second.probability += joint;
      }
    }
    for (int r = rows - 1; r >= 0; --r) {
      if (++sample[static_cast<std::size_t>(r)] < k) break;
      sample[static_cast<std::size_t>(r)] = 0;
    }
  }

  std::vector<NextStateProbability> out;
  out.reserve(acc.size());
  for (auto& [sig, entry] : acc) out.push_back(std::move(entry));
  return out;
}

OracleReport oracle_check(const ProbMatrix& probs, const StepOutcome& outcome) {
  check_consistent(probs, outcome);
  const NextStateSignature target = signature_of(outcome);
  OracleReport rep;
  for (const auto& e : enumerate_next_states(probs, outcome.num_chosen())) {
    if (e.signature == target) {
      rep.enumerated = e.probability;
      break;
    }
  }
  rep.exact = std::exp(transition_logprob_unchecked(TransitionKind::kExact, probs, outcome));
  rep.abs_diff = std::abs(rep.enumerated - rep.exact);
  return rep;
}

bool is_tie_free(const ProbMatrix& probs) {
  std::map<double, int> owner;
  for (int r = 0; r < probs.rows(); ++r) {
    std::set<double> seen(probs.row(r).begin(), probs.row(r).end());
    for (double v : seen) {
      auto [it, inserted] = owner.emplace(v, r);
      if (!inserted && it->second != r) return false;
    }
  }
  return true;
}

}  // namespace maskgrpo
