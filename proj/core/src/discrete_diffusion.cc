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

#include "maskgrpo/discrete_diffusion.h"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "maskgrpo/errors.h"

namespace maskgrpo::d3pm {

namespace {

void check_args(int states, double beta) {
  if (states < 2) throw InvalidArgument(fmt::format("need at least 2 states, got {}", states));
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw InvalidArgument(fmt::format("beta must be in [0, 1], got {}", beta));
  }
}

void check_state(int x, int states, const char* what) {
  if (x < 0 || x >= states) {
    throw InvalidArgument(fmt::format("{} = {} outside [0, {})", what, x, states));
  }
}

}  // namespace

std::string_view to_string(Kind kind) { return kind == Kind::kUniform ? "uniform" : "absorbing"; }

TransitionMatrix build_uniform_q(int states, double beta) {
  check_args(states, beta);
  TransitionMatrix m;
  m.kind = Kind::kUniform;
  m.beta = beta;
  m.q = Eigen::MatrixXd::Constant(states, states, beta / states);
  m.q.diagonal().array() += 1.0 - beta;
  return m;
}

TransitionMatrix build_absorbing_q(int states, double beta) {
  check_args(states, beta);
  TransitionMatrix m;
  m.kind = Kind::kAbsorbing;
  m.beta = beta;
  const int mask = states - 1;
  m.q = Eigen::MatrixXd::Zero(states, states);
  for (int i = 0; i < mask; ++i) {
    m.q(i, i) = 1.0 - beta;
    m.q(i, mask) = beta;
  }
  m.q(mask, mask) = 1.0;
  return m;
}

TransitionMatrix build_q(Kind kind, int states, double beta) {
  return kind == Kind::kUniform ? build_uniform_q(states, beta) : build_absorbing_q(states, beta);
}

TransitionMatrix ForwardChain::step_matrix(int t) const {
  if (t < 1 || t > steps()) throw InvalidArgument(fmt::format("step {} outside [1, {}]", t, steps()));
  return build_q(kind, states, betas[static_cast<std::size_t>(t - 1)]);
}

Eigen::MatrixXd ForwardChain::cumulative(int t) const {
  if (t < 0 || t > steps()) throw InvalidArgument(fmt::format("step {} outside [0, {}]", t, steps()));
  Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(states, states);
  for (int s = 1; s <= t; ++s) acc = acc * step_matrix(s).q;
  return acc;
}

Eigen::VectorXd forward_marginal(int x0, std::span<const double> betas, Kind kind, int states) {
  ForwardChain chain{kind, states, std::vector<double>(betas.begin(), betas.end())};
  check_state(x0, states, "x0");
  return chain.cumulative(chain.steps()).row(x0).transpose();
}

Eigen::VectorXd reverse_posterior(int x_t, int x0, const Eigen::MatrixXd& q_t,
                                  const Eigen::MatrixXd& qbar_prev) {
  const int states = static_cast<int>(q_t.rows());
  if (q_t.cols() != states || qbar_prev.rows() != states || qbar_prev.cols() != states) {
    throw InvalidArgument("reverse_posterior: matrices must be square and the same size");
  }
  check_state(x_t, states, "x_t");
  check_state(x0, states, "x0");
  Eigen::VectorXd post(states);
  for (int a = 0; a < states; ++a) post(a) = q_t(a, x_t) * qbar_prev(x0, a);
  const double z = post.sum();
  if (!(z > 0.0)) {
    throw InvalidArgument(fmt::format("reverse_posterior: x_t={} is unreachable from x0={}", x_t, x0));
  }
  return post / z;
}

Eigen::VectorXd model_reverse(const ForwardChain& chain, int t, int x_t,
                              const Eigen::VectorXd& predicted_x0) {
  check_state(x_t, chain.states, "x_t");
  if (predicted_x0.size() != chain.states) throw InvalidArgument("model_reverse: bad prediction size");
  const Eigen::MatrixXd q_t = chain.step_matrix(t).q;
  const Eigen::MatrixXd qbar_prev = chain.cumulative(t - 1);
  Eigen::VectorXd out(chain.states);
  for (int a = 0; a < chain.states; ++a) {
    double s = 0.0;
    for (int x0 = 0; x0 < chain.states; ++x0) s += qbar_prev(x0, a) * predicted_x0(x0);
    out(a) = q_t(a, x_t) * s;
  }
  const double z = out.sum();
  if (!(z > 0.0)) {
    throw InvalidArgument(fmt::format("model_reverse: prediction gives x_t={} zero mass at step {}", x_t, t));
  }
  return out / z;
}

double categorical_kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw InvalidArgument("categorical_kl: size mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) == 0.0) continue;
    if (q(i) == 0.0) return std::numeric_limits<double>::infinity();
    kl += p(i) * std::log(p(i) / q(i));
  }
  return std::max(kl, 0.0);
}

ElboTerms elbo_terms(const ForwardChain& chain, int x0, std::span<const Eigen::MatrixXd> predicted) {
  check_state(x0, chain.states, "x0");
  if (static_cast<int>(predicted.size()) != chain.steps()) {
    throw InvalidArgument(fmt::format("elbo_terms: {} prediction tables for {} steps",
                                      predicted.size(), chain.steps()));
  }
  ElboTerms out;
  for (int t = 1; t <= chain.steps(); ++t) {
    const Eigen::MatrixXd& table = predicted[static_cast<std::size_t>(t - 1)];
    if (table.rows() != chain.states || table.cols() != chain.states) {
      throw InvalidArgument("elbo_terms: prediction table has the wrong shape");
    }
    const Eigen::VectorXd marginal = chain.cumulative(t).row(x0).transpose();
    const Eigen::MatrixXd q_t = chain.step_matrix(t).q;
    const Eigen::MatrixXd qbar_prev = chain.cumulative(t - 1);
    double term = 0.0;
    for (int xt = 0; xt < chain.states; ++xt) {
      if (marginal(xt) == 0.0) continue;
      const Eigen::VectorXd truth = reverse_posterior(xt, x0, q_t, qbar_prev);
      double kl = std::numeric_limits<double>::infinity();
      try {
        kl = categorical_kl(truth, model_reverse(chain, t, xt, table.row(xt).transpose()));
      } catch (const InvalidArgument&) {
        // The prediction puts no mass on any x0 that can produce x_t.
      }
      term += marginal(xt) * kl;
    }
    out.per_step.push_back(term);
    out.total += term;
  }
  return out;
}

bool is_row_stochastic(const Eigen::MatrixXd& m, double tol) {
  if ((m.array() < 0.0).any()) return false;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (std::abs(m.row(r).sum() - 1.0) > tol) return false;
  }
  return true;
}

}  // namespace maskgrpo::d3pm
