/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "pdsim/core.hpp"
#include "pdsim/cost_model.hpp"

namespace pdsim {

// What a decode request contributes to the cost of a shared iteration.
enum class DecodeCostBasis : std::uint8_t {
  // Resident context (prompt + generated tokens); prefill chunks pay their marginal
  // quadratic cost. Consistent with running_tokens as the decode load metric.
  kContextTokens,
  // One token per decode request; prefill chunks pay b1 per token.
  kBatchTokens,
};

struct InstanceConfig {
  TokenCount kv_capacity_tokens = 262144;
  TokenCount chunk_budget = 512;
  TokenCount max_batch_requests = 256;
  PrefillCostParams true_prefill{2.5e-9, 8e-5, 1e-2};
  DecodeCostParams true_decode{5e-7, 1e-2};
  DecodeCostBasis cost_basis = DecodeCostBasis::kContextTokens;
  // How long emission history is kept for interval queries.
  Seconds emission_retention = 120.0;

  void validate() const;
};

struct BatchEntry {
  RequestId request{};
  TokenCount tokens = 0;
  // kDecode: one generated token. kPrefill: a chunk of prompt (or recompute) tokens.
  Phase kind = Phase::kPrefill;
};

struct IterationBatch {
  std::vector<BatchEntry> entries;
  // Single whole-remaining-prompt iteration with no decode residents; costed by the
  // quadratic prefill model.
  bool dedicated_prefill = false;

  bool empty() const { return entries.empty(); }
  TokenCount total_tokens() const;
  TokenCount decode_tokens() const;
  TokenCount prefill_tokens() const;
};

struct TokenEmission {
  RequestId request{};
  Seconds time = 0.0;
  TokenCount index = 0;  // 1-based position in the output stream
};

struct IterationResult {
  Seconds start = 0.0;
  Seconds finish = 0.0;
  std::vector<TokenEmission> emissions;
  // Requests whose prompt finished on this iteration and still need decoding.
  std::vector<RequestId> prefill_completed;
  std::vector<RequestId> completed;
};

struct MigrationStart {
  RequestId request{};
  InstanceId source{};
  Seconds start = 0.0;
  Seconds finish = 0.0;
};

// Sliding record of decode-token emission instants on one instance. Gaps are only
// measured between emissions of an uninterrupted decode stream.
class EmissionLog {
 public:
  explicit EmissionLog(Seconds retention = 120.0) : retention_(retention) {}

  void record(Seconds time, TokenCount tokens, bool chained);

  // Mean gap between consecutive emissions that both fall in [now - window, now].
  std::optional<Seconds> average_interval(Seconds window, Seconds now) const;

  struct Entry {
    Seconds time = 0.0;
    TokenCount tokens = 0;
    std::optional<Seconds> gap;
  };
  const std::deque<Entry>& entries() const { return entries_; }

 private:
  Seconds retention_;
  std::deque<Entry> entries_;
};

// A stateless serving instance: it runs whatever prefill and decode work it is given with
// a chunked-prefill local scheduler. Pool membership is tracked by the global scheduler.
class Instance {
 public:
  Instance(InstanceId id, InstanceConfig config);

  InstanceId id() const { return id_; }
  const InstanceConfig& config() const { return config_; }

  // Decode requests whose KV lives elsewhere enter the migration queue; everything else
  // goes straight to the wait queue. A local decode request adopts the parked KV left
  // by its own prefill.
  void enqueue(const PhaseRequest& request, Seconds now);

  // Starts queued KV pulls in FIFO order while destination memory allows.
  std::vector<MigrationStart> advance_migrations(const TransferParams& transfer, Seconds now);
  void complete_migration(RequestId request);
  // Frees KV left behind by a finished prefill once the decode instance pulled it.
  void release_parked(RequestId request);

  // Decode tokens first (up to the batch limit), then prefill chunks FCFS in the
  // remaining token budget, subject to KV capacity. Pure.
  IterationBatch build_iteration_batch() const;
  // build_iteration_batch, preempting the newest resident when memory is exhausted and
  // nothing could otherwise make progress.
  IterationBatch plan_iteration();
  Seconds iteration_time(const IterationBatch& batch) const;
  Seconds begin_iteration(IterationBatch batch, Seconds now);
  IterationResult complete_iteration();
  IterationResult execute_iteration(IterationBatch batch, Seconds now);

  bool busy() const { return in_flight_.has_value(); }
  std::optional<Seconds> busy_until() const;

  Seconds predicted_prefill_delay(const PrefillCostParams& predictor, Seconds now) const;
  TokenCount running_tokens() const;
  std::optional<Seconds> avg_token_interval(Seconds window, Seconds now) const {
    return emissions_.average_interval(window, now);
  }
  const EmissionLog& emission_log() const { return emissions_; }

  TokenCount kv_used() const { return kv_used_; }
  // Recomputed from residents; equals kv_used() whenever accounting is consistent.
  TokenCount kv_resident_sum() const;
  TokenCount decode_kv() const;
  bool has_prefill_work() const;
  bool has_decode_work() const;
  bool has_any_work() const;
  bool contains(RequestId request) const;
  std::size_t prefill_request_count() const;
  std::size_t decode_request_count() const;
  std::size_t migration_queue_len() const { return migration_queue_.size(); }
  std::size_t wait_queue_len() const { return wait_queue_.size(); }
  std::size_t running_len() const { return running_.size(); }
  std::size_t parked_len() const { return parked_.size(); }
  std::uint64_t preemptions() const { return preemptions_; }

 private:
  struct Resident {
    PhaseRequest req;
    TokenCount target = 0;    // tokens to compute before decoding can proceed
    TokenCount computed = 0;  // prompt tokens already processed
    TokenCount kv = 0;        // KV tokens held here
    bool recompute = false;   // preempted decode request rebuilding its context
    InstanceId source{};
    Seconds migration_finish = 0.0;

    bool prefill_like() const { return req.phase == Phase::kPrefill || recompute; }
    bool decoding() const { return req.phase == Phase::kDecode && !recompute; }
    bool fresh_prefill() const { return req.phase == Phase::kPrefill; }
  };

  struct InFlight {
    IterationBatch batch;
    Seconds start = 0.0;
    Seconds finish = 0.0;
  };

  Resident* find_running(RequestId id);
  bool preempt_one();
  void require_absent(RequestId id) const;

  InstanceId id_;
  InstanceConfig config_;
  std::deque<Resident> migration_queue_;
  std::vector<Resident> migrating_;
  std::deque<Resident> wait_queue_;
  std::vector<Resident> running_;
  std::vector<Resident> parked_;
  TokenCount kv_used_ = 0;
  std::optional<InFlight> in_flight_;
  EmissionLog emissions_;
  bool decode_chain_ = false;
  std::uint64_t preemptions_ = 0;
};

}  // namespace pdsim
