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

#include "maskgrpo/policy.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "maskgrpo/errors.h"
#include "maskgrpo/rng.h"

namespace maskgrpo {

namespace {

// Log-probabilities below this are treated as this when exponentiated so no
// stored probability underflows to zero.
constexpr double kLogProbFloor = -80.0;

double log_sum_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

const PolicyArch& validated(const PolicyArch& arch) {
  arch.validate();
  return arch;
}

}  // namespace

std::size_t PolicyArch::param_count() const {
  const auto h = static_cast<std::size_t>(hidden);
  const auto d = static_cast<std::size_t>(input_dim());
  const auto out = static_cast<std::size_t>(n) * static_cast<std::size_t>(k);
  return h * d + h + out * h + out;
}

void PolicyArch::validate() const {
  if (n < 1 || k < 2 || hidden < 1 || embed < 0) {
    throw InvalidArgument(
        fmt::format("invalid policy architecture N={} K={} H={} E={}", n, k, hidden, embed));
  }
}

PolicyParams::PolicyParams(PolicyArch arch)
    : arch_(validated(arch)), values_(arch.param_count(), 0.0), grads_(arch.param_count(), 0.0) {}

PolicyParams::PolicyParams(PolicyArch arch, std::vector<double> values)
    : arch_(validated(arch)), values_(std::move(values)) {
  if (values_.size() != arch_.param_count()) {
    throw InvalidArgument(fmt::format("architecture needs {} parameters, got {}",
                                      arch_.param_count(), values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("policy parameters must be finite");
  }
  grads_.assign(values_.size(), 0.0);
}

PolicyParams PolicyParams::initialized(PolicyArch arch, std::uint64_t seed) {
  PolicyParams p(arch);
  Rng rng(seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(arch.input_dim()));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(arch.hidden));
  auto v = p.values();
  for (std::size_t i = p.w1_offset(); i < p.b1_offset(); ++i) v[i] = rng.uniform(-bound1, bound1);
  for (std::size_t i = p.w2_offset(); i < p.b2_offset(); ++i) v[i] = rng.uniform(-bound2, bound2);
  return p;
}

void PolicyParams::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

std::size_t PolicyParams::b1_offset() const {
  return static_cast<std::size_t>(arch_.hidden) * static_cast<std::size_t>(arch_.input_dim());
}

std::size_t PolicyParams::w2_offset() const {
  return b1_offset() + static_cast<std::size_t>(arch_.hidden);
}

std::size_t PolicyParams::b2_offset() const {
  return w2_offset() + static_cast<std::size_t>(arch_.n) * static_cast<std::size_t>(arch_.k) *
                           static_cast<std::size_t>(arch_.hidden);
}

ProbMatrix::ProbMatrix(std::vector<int> positions, int k, std::vector<double> log_probs)
    : positions_(std::move(positions)), k_(k), log_probs_(std::move(log_probs)) {
  if (k_ < 1) throw InvalidArgument("ProbMatrix: vocabulary must be positive");
  if (log_probs_.size() != positions_.size() * static_cast<std::size_t>(k_)) {
    throw InvalidArgument("ProbMatrix: log_probs size does not match rows x K");
  }
  probs_.resize(log_probs_.size());
  for (int r = 0; r < rows(); ++r) {
    const double lse = log_sum_exp(log_row(r));
    if (!(std::abs(lse) <= 1e-12)) {
      throw InvalidArgument(fmt::format("ProbMatrix: row {} is not normalized (lse={})", r, lse));
    }
    for (int c = 0; c < k_; ++c) {
      const double lp = log_probs_[index(r, c)];
      probs_[index(r, c)] = std::exp(std::max(lp, kLogProbFloor));
    }
  }
}

ProbMatrix ProbMatrix::from_probs(std::vector<int> positions, int k, std::vector<double> probs) {
  if (k < 1) throw InvalidArgument("ProbMatrix: vocabulary must be positive");
  if (probs.size() != positions.size() * static_cast<std::size_t>(k)) {
    throw InvalidArgument("ProbMatrix: probs size does not match rows x K");
  }
  ProbMatrix m;
  m.positions_ = std::move(positions);
  m.k_ = k;
  m.probs_ = std::move(probs);
  m.log_probs_.resize(m.probs_.size());
  for (int r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
      const double p = m.probs_[m.index(r, c)];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidArgument(fmt::format("ProbMatrix: entry ({}, {}) = {} outside [0, 1]", r, c, p));
      }
      sum += p;
      m.log_probs_[m.index(r, c)] = std::log(p);
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidArgument(fmt::format("ProbMatrix: row {} sums to {}", r, sum));
    }
  }
  return m;
}

std::span<const double> ProbMatrix::row(int r) const {
  return std::span<const double>(probs_).subspan(index(r, 0), static_cast<std::size_t>(k_));
}

std::span<const double> ProbMatrix::log_row(int r) const {
  return std::span<const double>(log_probs_).subspan(index(r, 0), static_cast<std::size_t>(k_));
}

ProbMatrix ProbMatrix::select_rows(std::span<const int> rows_to_keep) const {
  ProbMatrix m;
  m.k_ = k_;
  for (int r : rows_to_keep) {
    if (r < 0 || r >= rows()) throw InvalidArgument("ProbMatrix::select_rows: row out of range");
    m.positions_.push_back(positions_[static_cast<std::size_t>(r)]);
    auto lr = log_row(r);
    auto pr = row(r);
    m.log_probs_.insert(m.log_probs_.end(), lr.begin(), lr.end());
    m.probs_.insert(m.probs_.end(), pr.begin(), pr.end());
  }
  return m;
}

ProbMatrix policy_forward(const PolicyParams& params, const CanvasState& state,
                          const Prompt& prompt, double temperature, ForwardCache* cache) {
  const PolicyArch& arch = params.arch();
  if (state.size() != arch.n || state.vocab() != arch.k) {
    throw InvalidArgument(fmt::format("policy_forward: canvas N={} K={} but policy N={} K={}",
                                      state.size(), state.vocab(), arch.n, arch.k));
  }
  if (static_cast<int>(prompt.embedding.size()) != arch.embed) {
    throw InvalidArgument(fmt::format("policy_forward: prompt embedding width {} but policy E={}",
                                      prompt.embedding.size(), arch.embed));
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument(fmt::format("policy_forward: temperature must be positive, got {}",
                                      temperature));
  }
  std::vector<int> positions = state.masked_positions();
  if (positions.empty()) throw InvalidArgument("policy_forward: canvas has no masked positions");

  const auto values = params.values();
  const auto hdim = static_cast<std::size_t>(arch.hidden);
  const auto din = static_cast<std::size_t>(arch.input_dim());
  const auto kk = static_cast<std::size_t>(arch.k);
  const std::size_t embed_base = static_cast<std::size_t>(arch.n) * (kk + 1);

  std::vector<int> active(static_cast<std::size_t>(arch.n));
  for (int i = 0; i < arch.n; ++i) {
    active[static_cast<std::size_t>(i)] = i * (arch.k + 1) + state.token(i);
  }

  std::vector<double> hidden(hdim);
  const double* w1 = values.data() + params.w1_offset();
  const double* b1 = values.data() + params.b1_offset();
  for (std::size_t h = 0; h < hdim; ++h) {
    const double* wrow = w1 + h * din;
    double a = b1[h];
    for (int col : active) a += wrow[col];
    for (std::size_t e = 0; e < prompt.embedding.size(); ++e) {
      a += wrow[embed_base + e] * prompt.embedding[e];
    }
    hidden[h] = std::tanh(a);
  }

  const double* w2 = values.data() + params.w2_offset();
  const double* b2 = values.data() + params.b2_offset();
  std::vector<double> log_probs(positions.size() * kk);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    double* out = log_probs.data() + r * kk;
    for (std::size_t c = 0; c < kk; ++c) {
      const std::size_t o = static_cast<std::size_t>(positions[r]) * kk + c;
      const double* wrow = w2 + o * hdim;
      double z = b2[o];
      for (std::size_t h = 0; h < hdim; ++h) z += wrow[h] * hidden[h];
      z /= temperature;
      if (!std::isfinite(z)) {
        throw NumericalError(
            fmt::format("policy_forward: non-finite logit at position {} token {}", positions[r], c));
      }
      out[c] = z;
    }
    const double lse = log_sum_exp(std::span<const double>(out, kk));
    for (std::size_t c = 0; c < kk; ++c) out[c] -= lse;
  }

  if (cache != nullptr) {
    cache->arch = arch;
    cache->active_inputs = std::move(active);
    cache->embedding = prompt.embedding;
    cache->hidden = hidden;
    cache->positions = positions;
    cache->log_probs = log_probs;
    cache->temperature = temperature;
  }
  return ProbMatrix(std::move(positions), arch.k, std::move(log_probs));
}

void policy_backward(const PolicyParams& params, const ForwardCache& cache,
                     std::span<const double> upstream, std::span<double> grad_out) {
  const PolicyArch& arch = params.arch();
  if (!(cache.arch == arch)) throw InvalidArgument("policy_backward: cache from another architecture");
  const auto kk = static_cast<std::size_t>(arch.k);
  const auto hdim = static_cast<std::size_t>(arch.hidden);
  const auto din = static_cast<std::size_t>(arch.input_dim());
  const std::size_t rows = cache.positions.size();
  if (upstream.size() != rows * kk) {
    throw InvalidArgument(fmt::format("policy_backward: upstream has {} entries, expected {}",
                                      upstream.size(), rows * kk));
  }
  if (grad_out.size() != params.size()) {
    throw InvalidArgument("policy_backward: gradient buffer has the wrong length");
  }
  if (std::all_of(upstream.begin(), upstream.end(), [](double g) { return g == 0.0; })) return;

  const auto values = params.values();
  const double* w2 = values.data() + params.w2_offset();
  double* gw2 = grad_out.data() + params.w2_offset();
  double* gb2 = grad_out.data() + params.b2_offset();

  // d logp_c / d z_j = [c == j] - p_j, and z = logits / temperature.
  std::vector<double> dhidden(hdim, 0.0);
  std::vector<double> dz(kk);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = upstream.data() + r * kk;
    const double* lp = cache.log_probs.data() + r * kk;
    double gsum = 0.0;
    for (std::size_t c = 0; c < kk; ++c) gsum += g[c];
    for (std::size_t c = 0; c < kk; ++c) dz[c] = (g[c] - std::exp(lp[c]) * gsum) / cache.temperature;
    for (std::size_t c = 0; c < kk; ++c) {
      if (dz[c] == 0.0) continue;
      const std::size_t o = static_cast<std::size_t>(cache.positions[r]) * kk + c;
      gb2[o] += dz[c];
      const double* wrow = w2 + o * hdim;
      double* grow = gw2 + o * hdim;
      for (std::size_t h = 0; h < hdim; ++h) {
        grow[h] += dz[c] * cache.hidden[h];
        dhidden[h] += dz[c] * wrow[h];
      }
    }
  }

  double* gw1 = grad_out.data() + params.w1_offset();
  double* gb1 = grad_out.data() + params.b1_offset();
  const std::size_t embed_base = static_cast<std::size_t>(arch.n) * (kk + 1);
  for (std::size_t h = 0; h < hdim; ++h) {
    const double da = dhidden[h] * (1.0 - cache.hidden[h] * cache.hidden[h]);
    if (da == 0.0) continue;
    gb1[h] += da;
    double* grow = gw1 + h * din;
    for (int col : cache.active_inputs) grow[col] += da;
    for (std::size_t e = 0; e < cache.embedding.size(); ++e) {
      grow[embed_base + e] += da * cache.embedding[e];
    }
  }
}

void policy_backward(PolicyParams& params, const ForwardCache& cache,
                     std::span<const double> upstream) {
  policy_backward(params, cache, upstream, params.grads());
}

}  // namespace maskgrpo
