/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "pdsim/config.hpp"
#include "pdsim/core.hpp"
#include "pdsim/instance.hpp"
#include "pdsim/monitor.hpp"
#include "pdsim/scheduler.hpp"

namespace pdsim {

struct MigrationRecord {
  RequestId request{};
  InstanceId source{};
  InstanceId destination{};
  Seconds start = 0.0;
  Seconds finish = 0.0;
};

struct RunResult {
  std::vector<RequestRecord> records;  // in trace order
  std::vector<MonitorSnapshot> snapshots;
  std::vector<Decision> decisions;
  std::vector<MigrationRecord> migrations;
  PrefillCostParams predictor;
  TokenCount max_running_tokens = 0;
  Seconds end_time = 0.0;
  std::uint64_t events_processed = 0;
  std::uint64_t preemptions = 0;
};

enum class EventKind : std::uint8_t {
  kMigrationComplete,
  kIterationComplete,
  kPrefillComplete,
  kArrival,
  kMonitorTick,
};

struct Event {
  Seconds time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kArrival;
  InstanceId instance{};
  RequestId request{};
};

// Earlier time first, then kind order, then insertion order.
bool event_after(const Event& a, const Event& b);

// Profiles the true prefill model at startup and fits the predictor used for dispatch.
PrefillCostParams profile_predictor(const RunConfig& config);

class Simulator {
 public:
  // Throws std::invalid_argument for an invalid config or an unsorted / inconsistent trace.
  Simulator(std::vector<TraceRequest> trace, RunConfig config);

  // Processes the next event (or the batching pass that closes a timestamp).
  // Returns false once the run is finished.
  bool step();
  // Steps to completion and returns the results. Throws std::runtime_error on a stall.
  RunResult run();
  RunResult result() const;

  // Throws std::logic_error if KV accounting or the pool partition is broken.
  void check_invariants() const;

  bool finished() const;
  Seconds now() const { return now_; }
  std::span<const Instance> instances() const { return instances_; }
  const GlobalScheduler& scheduler() const { return scheduler_; }
  std::size_t completed() const { return completed_; }
  const std::vector<MonitorSnapshot>& snapshots() const { return snapshots_; }

 private:
  class View;

  void push(Seconds time, EventKind kind, InstanceId instance = {}, RequestId request = {});
  void handle(const Event& event);
  void on_arrival(const Event& event);
  void on_iteration_complete(const Event& event);
  void on_prefill_complete(const Event& event);
  void on_migration_complete(const Event& event);
  void on_monitor_tick(const Event& event);
  void flush();
  void mark_dirty(InstanceId id) { dirty_[to_index(id)] = true; }
  bool any_dirty() const;
  std::size_t index_of(RequestId id) const;

  RunConfig config_;
  std::vector<TraceRequest> trace_;
  std::unordered_map<std::uint32_t, std::size_t> index_;
  PrefillCostParams predictor_;
  TokenCount max_running_tokens_;
  std::vector<Instance> instances_;
  GlobalScheduler scheduler_;

  std::priority_queue<Event, std::vector<Event>, decltype(&event_after)> queue_{&event_after};
  std::uint64_t next_seq_ = 0;
  Seconds now_ = 0.0;
  std::vector<bool> dirty_;
  bool flush_pending_ = false;
  std::uint64_t tick_count_ = 0;

  std::vector<std::vector<Seconds>> token_times_;
  std::vector<std::optional<InstanceId>> prefill_instance_;
  std::vector<std::optional<InstanceId>> kv_source_;
  std::vector<std::optional<RequestRecord>> records_;
  std::size_t completed_ = 0;
  std::vector<MonitorSnapshot> snapshots_;
  std::vector<MigrationRecord> migrations_;
  std::uint64_t events_processed_ = 0;
  std::uint64_t idle_events_ = 0;
  std::uint64_t pending_work_ = 0;  // queued events other than monitor ticks
  std::uint64_t tokens_emitted_ = 0;
};

RunResult run(std::span<const TraceRequest> trace, const RunConfig& config);

// Multiplies every arrival time by `factor`; factor < 1 raises the request rate.
std::vector<TraceRequest> scale_trace(std::span<const TraceRequest> trace, double factor);

}  // namespace pdsim
