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

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace maskgrpo::d3pm {

// Discrete-state forward corruption q(x_t | x_{t-1}) = Cat(x_{t-1} Q_t).
// Matrices are row-stochastic; row = from-state, column = to-state. For the
// absorbing kind the last state is the mask.

enum class Kind { kUniform, kAbsorbing };

std::string_view to_string(Kind kind);

struct TransitionMatrix {
  Eigen::MatrixXd q;
  Kind kind = Kind::kUniform;
  double beta = 0.0;

  int states() const { return static_cast<int>(q.rows()); }
  int mask_state() const { return states() - 1; }
};

// (1 - beta) I + beta / K' * ones.
TransitionMatrix build_uniform_q(int states, double beta);
// Non-mask rows keep their state with 1 - beta and move to the mask with
// beta; the mask row is the identity row.
TransitionMatrix build_absorbing_q(int states, double beta);
TransitionMatrix build_q(Kind kind, int states, double beta);

struct ForwardChain {
  Kind kind = Kind::kAbsorbing;
  int states = 2;
  std::vector<double> betas;  // beta_1 .. beta_T

  int steps() const { return static_cast<int>(betas.size()); }
  TransitionMatrix step_matrix(int t) const;  // Q_t, t in [1, T]
  // Q_1 Q_2 ... Q_t; identity for t = 0.
  Eigen::MatrixXd cumulative(int t) const;
};

// Row x0 of Q_1 ... Q_t, i.e. q(x_t | x_0).
Eigen::VectorXd forward_marginal(int x0, std::span<const double> betas, Kind kind, int states);

// q(x_{t-1} | x_t, x_0) proportional to Q_t[x_{t-1}, x_t] * Qbar_{t-1}[x_0, x_{t-1}].
// Throws InvalidArgument when x_t cannot be reached from x_0.
Eigen::VectorXd reverse_posterior(int x_t, int x0, const Eigen::MatrixXd& q_t,
                                  const Eigen::MatrixXd& qbar_prev);

// Model reverse step p(x_{t-1} | x_t) built from a predicted distribution over
// x_0: proportional to sum_{x0'} Q_t[x_{t-1}, x_t] Qbar_{t-1}[x0', x_{t-1}] p(x0' | x_t).
Eigen::VectorXd model_reverse(const ForwardChain& chain, int t, int x_t,
                              const Eigen::VectorXd& predicted_x0);

// KL(p || q) for categorical vectors; +inf when q misses p's support.
double categorical_kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct ElboTerms {
  std::vector<double> per_step;  // index t-1 holds the step-t term
  double total = 0.0;
};

// Sum over t = 1..T of E_{q(x_t | x_0)} KL(q(x_{t-1} | x_t, x_0) || p(x_{t-1} | x_t)).
// predicted[t-1] is a states x states matrix whose row x_t is the model's
// distribution over x_0 at step t. The t = 1 term reduces to -log p(x_0 | x_1).
ElboTerms elbo_terms(const ForwardChain& chain, int x0, std::span<const Eigen::MatrixXd> predicted);

bool is_row_stochastic(const Eigen::MatrixXd& m, double tol);

}  // namespace maskgrpo::d3pm
