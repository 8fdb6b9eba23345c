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
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "maskgrpo/policy.h"
#include "maskgrpo/rng.h"

namespace maskgrpo {

// Randomized self-checks behind the `verify`, `gradcheck` and `d3pm`
// commands. Every suite is deterministic in its seed.

struct CheckResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;      // largest observed error
  double tolerance = 0.0;
  int cases = 0;
  std::string detail;
};

struct SuiteReport {
  std::vector<CheckResult> checks;

  bool passed() const;
};

void print_report(std::ostream& out, const SuiteReport& report);

// Random masked-position distributions with no repeated value across rows.
ProbMatrix random_tie_free_probs(Rng& rng, int rows, int k);

// Transition probabilities against brute-force enumeration, normalization
// over next canvases, and the AR <= Exact <= UnmaskedOnly ordering.
SuiteReport run_verify(int trials, std::uint64_t seed);

// Analytic gradients of every transition kind and of the full surrogate
// objective (beta = 0 and 0.5) against five-point central differences.
// Points whose discrete structure changes inside the stencil are redrawn.
SuiteReport run_gradcheck(int trials, std::uint64_t seed);

// Row-stochasticity, absorbing closed form, reverse posteriors against path
// enumeration, and ELBO term sanity.
SuiteReport run_d3pm_checks(std::uint64_t seed);

// Relative error |a - f| / max(|a|, |f|), or the absolute error when both
// magnitudes are below `floor`.
double gradient_error(double analytic, double numeric, double floor = 1e-8);

// Five-point central difference of f at x along every coordinate. `valid`
// is called at each stencil point and may veto it, in which case the
// function returns false.
bool central_difference(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> x, double h, std::span<double> out,
                        const std::function<bool(std::span<const double>)>& valid = {});

}  // namespace maskgrpo
