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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "maskgrpo/canvas.h"

namespace maskgrpo {

// Shape of the categorical policy network:
//
//   x      = [one_hot_{K+1}(tokens[0]), ..., one_hot_{K+1}(tokens[N-1]), prompt.embedding]
//   h      = tanh(W1 x + b1)                  W1: H x (N(K+1) + E)
//   logits = W2 h + b2                        W2: NK x H
//
// Row i of the N x K logit block is the prediction for canvas position i;
// only masked rows are materialized.
struct PolicyArch {
  int n = 16;
  int k = 4;
  int hidden = 64;
  int embed = 16;

  int input_dim() const { return n * (k + 1) + embed; }
  std::size_t param_count() const;
  void validate() const;

  friend bool operator==(const PolicyArch&, const PolicyArch&) = default;
};

// Flat parameter vector with a same-shaped gradient accumulator.
class PolicyParams {
 public:
  // All-zero parameters: every row of every forward pass is uniform.
  explicit PolicyParams(PolicyArch arch);
  PolicyParams(PolicyArch arch, std::vector<double> values);

  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static PolicyParams initialized(PolicyArch arch, std::uint64_t seed);

  const PolicyArch& arch() const { return arch_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }
  void zero_grads();

  // Offsets of the four blocks inside values().
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const;
  std::size_t w2_offset() const;
  std::size_t b2_offset() const;

 private:
  PolicyArch arch_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

// Per-masked-position categorical distributions p_t, stored as log
// probabilities with a linear-space copy. Row r belongs to canvas position
// positions()[r]; positions are in ascending canvas order.
class ProbMatrix {
 public:
  ProbMatrix() = default;
  // Rows must each log-sum-exp to 0 within 1e-12.
  ProbMatrix(std::vector<int> positions, int k, std::vector<double> log_probs);

  // Build from linear probabilities (zeros allowed). Rows must sum to 1
  // within 1e-9. Intended for fixtures and oracle instances.
  static ProbMatrix from_probs(std::vector<int> positions, int k, std::vector<double> probs);

  int rows() const { return static_cast<int>(positions_.size()); }
  int vocab() const { return k_; }
  std::span<const int> positions() const { return positions_; }

  double prob(int r, int c) const { return probs_[index(r, c)]; }
  double log_prob(int r, int c) const { return log_probs_[index(r, c)]; }
  std::span<const double> row(int r) const;
  std::span<const double> log_row(int r) const;

  // Gathers the given rows into a new matrix.
  ProbMatrix select_rows(std::span<const int> rows) const;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(c);
  }

  std::vector<int> positions_;
  int k_ = 0;
  std::vector<double> log_probs_;
  std::vector<double> probs_;
};

// Everything policy_backward needs from the matching forward pass.
struct ForwardCache {
  PolicyArch arch;
  std::vector<int> active_inputs;  // indices of the one-hot inputs that are 1
  std::vector<double> embedding;
  std::vector<double> hidden;      // tanh activations
  std::vector<int> positions;      // masked positions, one per output row
  std::vector<double> log_probs;   // rows x K, unclamped
  double temperature = 1.0;
};

// Softmax(logits / temperature) for every masked position. Deterministic in
// its inputs. Throws InvalidArgument when nothing is masked or shapes
// disagree, NumericalError on non-finite logits.
ProbMatrix policy_forward(const PolicyParams& params, const CanvasState& state,
                          const Prompt& prompt, double temperature,
                          ForwardCache* cache = nullptr);

// grad_out += d(sum_{r,c} upstream[r,c] * log_prob[r,c]) / d params, where
// `upstream` is rows x K in the same order as the forward pass output.
void policy_backward(const PolicyParams& params, const ForwardCache& cache,
                     std::span<const double> upstream, std::span<double> grad_out);

// Same, accumulating into params.grads().
void policy_backward(PolicyParams& params, const ForwardCache& cache,
                     std::span<const double> upstream);

// Binary checkpoint, little-endian:
//   "MGPO" | u32 version=1 | u32 N | u32 K | u32 H | u32 E | u64 count | f64 x count
// Written to a temporary sibling and renamed into place.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);
// Additionally rejects checkpoints whose architecture differs from `expected`.
PolicyParams load_checkpoint(const std::filesystem::path& path, const PolicyArch& expected);

}  // namespace maskgrpo
