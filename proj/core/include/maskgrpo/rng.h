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

#include <cstdint>
#include <random>

namespace maskgrpo {

// SplitMix64 finalizer. Used as a counter-based mixer for stream derivation
// and payload hashing.
std::uint64_t mix64(std::uint64_t x);

// Seed of the `index`-th independent stream under `seed`.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index);

// Thin wrapper over mt19937_64. The conversions to real numbers are done by
// hand so sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();

  Rng split(std::uint64_t index) { return Rng(derive_stream_seed(next_u64(), index)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace maskgrpo
