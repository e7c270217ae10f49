/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <random>
#include <span>
#include <vector>

#include "pdsim/core.hpp"

namespace pdsim {

// Prefill time as a quadratic in prompt length: a2*L^2 + a1*L + a0.
struct PrefillCostParams {
  double a2 = 0.0;
  double a1 = 0.0;
  double a0 = 0.0;

  friend bool operator==(const PrefillCostParams&, const PrefillCostParams&) = default;
};

// One batched iteration: b1*tokens + b0.
struct DecodeCostParams {
  double b1 = 2e-5;
  double b0 = 5e-3;

  void validate() const;
};

struct TransferParams {
  double bytes_per_token = 131072.0;
  double bandwidth = 5e10;  // bytes / second
  Seconds base_latency = 1e-3;

  void validate() const;
};

struct ProfilingSample {
  TokenCount input_len = 0;
  Seconds measured_time = 0.0;
};

Seconds predict_prefill_time(const PrefillCostParams& params, TokenCount input_len);

// Cost of extending an already prefilled context of `done` tokens by `chunk` tokens,
// without the fixed per-iteration term. Summing chunks reproduces the full quadratic.
Seconds marginal_prefill_time(const PrefillCostParams& params, TokenCount done, TokenCount chunk);

// Least squares on the basis {L^2, L, 1}, minimizing relative residuals.
PrefillCostParams fit_quadratic(std::span<const ProfilingSample> samples);

// Root-mean-square residual of `params` over `samples`.
double fit_residual(const PrefillCostParams& params, std::span<const ProfilingSample> samples);

Seconds decode_iter_time(const DecodeCostParams& params, TokenCount batch_tokens);

Seconds transfer_time(const TransferParams& params, TokenCount tokens);

// Largest resident decode token count an instance can hold while one iteration stays within
// the TPOT SLO, capped by KV capacity. Throws if the SLO is below the fixed iteration cost.
TokenCount max_running_tokens(const DecodeCostParams& params, TokenCount kv_capacity_tokens,
                              Seconds tpot_slo);

// Geometric grid of `points` prompt lengths from `min_len` to `max_context` (deduplicated).
std::vector<TokenCount> profiling_grid(TokenCount max_context, int points = 16,
                                       TokenCount min_len = 64);

// Samples the ground-truth prefill model on `grid` with multiplicative noise
// t * (1 + noise * N(0,1)).
std::vector<ProfilingSample> profile_prefill(const PrefillCostParams& truth,
                                             std::span<const TokenCount> grid, double noise,
                                             std::mt19937_64& rng);

}  // namespace pdsim
