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

#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "maskgrpo/decoder.h"
#include "maskgrpo/policy.h"

namespace maskgrpo {

// Per-step transition probability p(s_{t+1} | s_t, a_t) of a masked
// generative policy. All three are evaluated against `probs` (which may come
// from parameters other than the ones that produced the outcome) using the
// outcome's sampled tokens and Choose-and-Move selection:
//
//   ArStyle       sum over every masked j of log p_j(sampled_j)
//   UnmaskedOnly  sum over chosen j of log p_j(sampled_j)
//   Exact         UnmaskedOnly + sum over remasked j of
//                 log( sum_{c : p_j(c) < m} p_j(c) ),  m = min over chosen of p_j(sampled_j)
//
// Exact is the probability that sampling-then-selection lands on the same
// next canvas: the revealed tokens must match and every remasked position
// must draw something less confident than the weakest revealed token.

std::string_view to_string(TransitionKind kind);
TransitionKind parse_transition_kind(std::string_view name);

// These throw NumericalError when the probability is zero.
double trans_logprob_ar(const ProbMatrix& probs, const StepOutcome& outcome);
double trans_logprob_exact(const ProbMatrix& probs, const StepOutcome& outcome);
double trans_logprob_unmasked(const ProbMatrix& probs, const StepOutcome& outcome);
double transition_logprob(TransitionKind kind, const ProbMatrix& probs, const StepOutcome& outcome);

// Like transition_logprob but returns -inf for a zero probability.
double transition_logprob_unchecked(TransitionKind kind, const ProbMatrix& probs,
                                    const StepOutcome& outcome);

// upstream[j * K + c] += scale * d logp / d log_probs(j, c). For Exact the
// below-threshold sets are held fixed, which is the gradient almost
// everywhere. Rows whose set is empty contribute nothing.
void transition_logprob_grad(TransitionKind kind, const ProbMatrix& probs,
                             const StepOutcome& outcome, double scale, std::span<double> upstream);

// Discrete choices the value depends on (the below-threshold token sets for
// Exact; empty otherwise). Equal keys at two parameter points mean the
// function is smooth between them.
std::vector<std::uint64_t> transition_structure(TransitionKind kind, const ProbMatrix& probs,
                                                const StepOutcome& outcome);

// Next canvas given the current one: which positions are revealed, and with
// what tokens. Positions are canvas indices in ascending order.
struct NextStateSignature {
  std::vector<int> positions;
  std::vector<Token> values;

  friend auto operator<=>(const NextStateSignature&, const NextStateSignature&) = default;
};

NextStateSignature signature_of(const StepOutcome& outcome);

struct NextStateProbability {
  NextStateSignature signature;
  double probability = 0.0;
  // First joint sampling (in odometer order) that reaches this signature.
  StepOutcome representative;
};

inline constexpr std::uint64_t kMaxEnumeratedSamplings = 1'000'000;

// Brute-force distribution over next canvases: enumerates all K^rows joint
// samplings, applies cam_select to each, and accumulates the joint
// probability per signature. Signatures are sorted; only reachable ones are
// returned. Throws InvalidArgument past kMaxEnumeratedSamplings.
std::vector<NextStateProbability> enumerate_next_states(const ProbMatrix& probs, int n_chosen);

struct OracleReport {
  double enumerated = 0.0;  // exact probability of the outcome's next canvas
  double exact = 0.0;      // exp(trans_logprob_exact)
  double abs_diff = 0.0;
};

OracleReport oracle_check(const ProbMatrix& probs, const StepOutcome& outcome);

// True when no probability value appears in two different rows; on such
// instances the Exact formula equals enumeration.
bool is_tie_free(const ProbMatrix& probs);

// Builds an outcome from explicit samples, computing confidences from
// `probs` and running cam_select.
StepOutcome make_outcome(const ProbMatrix& probs, std::vector<Token> sampled, int n_chosen);

}  // namespace maskgrpo
