/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

// Independent reference computations shared by the unit and acceptance tests. None of
// these call into the simulator; they only use the closed-form cost functions.

#include <algorithm>
#include <random>
#include <vector>

#include "pdsim/config.hpp"
#include "pdsim/core.hpp"
#include "pdsim/cost_model.hpp"
#include "pdsim/traces.hpp"

namespace pdsim::testing {

// Two instances (one prefill, one decode), static pools, and a token budget large enough
// that every prompt runs as one dedicated iteration.
inline RunConfig serial_prefill_config(TokenCount max_prompt) {
  RunConfig c;
  c.instances = 2;
  c.init_prefill = 1;
  c.init_decode = 1;
  c.instance.chunk_budget = std::max<TokenCount>(512, max_prompt);
  c.instance.kv_capacity_tokens = std::max<TokenCount>(262144, 2 * max_prompt);
  c.scheduler.strategy = Strategy::kMinimalLoad;
  return c;
}

// FCFS single-server queue: start = max(arrival, previous finish), service = quadratic cost.
inline std::vector<Seconds> prefill_recurrence_ttft(const std::vector<TraceRequest>& trace,
                                                    const PrefillCostParams& p) {
  std::vector<Seconds> out;
  Seconds free_at = 0.0;
  for (const auto& r : trace) {
    const Seconds start = std::max(r.arrival, free_at);
    free_at = start + p.a0 + p.a1 * static_cast<double>(r.input_len) +
              p.a2 * static_cast<double>(r.input_len) * static_cast<double>(r.input_len);
    out.push_back(free_at - r.arrival);
  }
  return out;
}

inline std::vector<TraceRequest> random_workload(std::mt19937_64& rng, int n,
                                                 TokenCount max_prompt, double rate) {
  std::exponential_distribution<double> gap(rate);
  std::uniform_int_distribution<TokenCount> len(1, max_prompt);
  std::bernoulli_distribution tie(0.1);
  std::vector<TraceRequest> out;
  Seconds t = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i == 0 || !tie(rng)) t += gap(rng);
    out.push_back({RequestId{static_cast<std::uint32_t>(i)}, t, len(rng), 1});
  }
  return out;
}

// Token timestamps of a lone request: dedicated prefill, one KV pull, then one decode
// iteration per token costed by resident context.
inline std::vector<Seconds> lone_request_times(const TraceRequest& r, const RunConfig& c) {
  const auto& pre = c.instance.true_prefill;
  const auto& dec = c.instance.true_decode;
  const double l = static_cast<double>(r.input_len);
  std::vector<Seconds> times;
  Seconds t = r.arrival + pre.a0 + pre.a1 * l + pre.a2 * l * l;
  times.push_back(t);
  if (r.output_len == 1) return times;
  t += c.transfer.base_latency + l * c.transfer.bytes_per_token / c.transfer.bandwidth;
  for (TokenCount g = 1; g < r.output_len; ++g) {
    t += dec.b0 + dec.b1 * (l + static_cast<double>(g));
    times.push_back(t);
  }
  return times;
}

// Bursty synthetic workload used by the scheduler comparisons.
inline SyntheticParams bursty_params(double base_rate, Seconds duration, std::uint64_t seed) {
  SyntheticParams p;
  p.duration = duration;
  p.base_rate = base_rate;
  p.bursts = {{duration * 0.13, duration * 0.07, 5.0},
              {duration * 0.4, duration * 0.08, 5.0},
              {duration * 0.73, duration * 0.07, 5.0}};
  p.input = {7.4, 0.8, 16000};
  p.output = {3.0, 0.8, 500};
  p.length_correlation = 0.9;
  p.seed = seed;
  return p;
}

}  // namespace pdsim::testing
