/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdsim/core.hpp"
#include "pdsim/cost_model.hpp"
#include "pdsim/pools.hpp"

namespace pdsim {

enum class Strategy : std::uint8_t { kSloAware, kMinimalLoad, kRoundRobin };

std::string_view to_string(Strategy strategy);
// Accepts "slo-aware", "minimal-load", "round-robin" (and the underscore forms).
Strategy parse_strategy(std::string_view text);

struct SchedulerConfig {
  Strategy strategy = Strategy::kSloAware;
  // Unset thresholds default to the SLO values; ttft_margin scales the TTFT default.
  std::optional<Seconds> ttft_threshold;
  std::optional<Seconds> tpot_threshold;
  double ttft_margin = 1.0;
  // Decode load counts as low when the least loaded decode-capable instance holds at most
  // theta_d * MaxRunningTokens.
  double theta_d = 0.5;
  // Idle prefill instances join decode when aggregate decode occupancy exceeds this.
  double theta_busy = 0.75;
  // How long the decode pool interval must exceed the TPOT threshold before a flip.
  // Unset means two monitor periods.
  std::optional<Seconds> tpot_breach_duration;
  // Instance scheduling switch. Off keeps the pools static.
  bool enable_flips = true;

  void validate() const;
};

// Read access to live instance load, as seen by the global scheduler.
class LoadView {
 public:
  virtual ~LoadView() = default;
  virtual Seconds predicted_prefill_delay(InstanceId id) const = 0;
  virtual TokenCount running_tokens(InstanceId id) const = 0;
  virtual std::optional<Seconds> avg_token_interval(InstanceId id) const = 0;
  virtual bool has_prefill_work(InstanceId id) const = 0;
  virtual bool has_decode_work(InstanceId id) const = 0;
};

enum class DecisionKind : std::uint8_t { kPrefillDispatch, kDecodeDispatch, kFlip, kDrain };

std::string_view to_string(DecisionKind kind);

struct Decision {
  Seconds time = 0.0;
  DecisionKind kind = DecisionKind::kPrefillDispatch;
  std::optional<RequestId> request;
  InstanceId instance{};
  std::string rule;
  std::optional<PoolKind> from;
  std::optional<PoolKind> to;
};

class GlobalScheduler {
 public:
  GlobalScheduler(SchedulerConfig config, const SloConfig& slo, PoolSet pools,
                  PrefillCostParams predictor, TokenCount max_running_tokens,
                  Seconds monitor_period);

  InstanceId schedule_prefill(const TraceRequest& request, const LoadView& view, Seconds now);
  InstanceId schedule_decode(RequestId request, InstanceId prefill_instance,
                             const LoadView& view, Seconds now);

  std::optional<InstanceId> try_move_decode_to_prefill(const LoadView& view, Seconds now,
                                                       std::string_view rule = "alg3");
  std::optional<InstanceId> try_move_prefill_to_decode(const LoadView& view, Seconds now,
                                                       std::string_view rule = "alg4");
  bool decode_load_is_low(const LoadView& view) const;

  // Periodic instance scheduling: sustained TPOT breach and idle-prefill triggers.
  std::vector<InstanceId> monitor_tick(const LoadView& view, Seconds now);

  // Completes PtoD / DtoP transitions whose draining work is finished.
  std::vector<PoolMove> settle(const LoadView& view, Seconds now);

  // Mean token interval over decode-capable instances that report one.
  std::optional<Seconds> decode_pool_interval(const LoadView& view) const;

  const PoolSet& pools() const { return pools_; }
  const std::vector<Decision>& decisions() const { return decisions_; }
  TokenCount max_running_tokens() const { return max_running_tokens_; }
  Seconds ttft_threshold() const { return ttft_threshold_; }
  Seconds tpot_threshold() const { return tpot_threshold_; }
  const SchedulerConfig& config() const { return config_; }

 private:
  bool instance_scheduling() const {
    return config_.strategy == Strategy::kSloAware && config_.enable_flips;
  }
  bool decode_admits(InstanceId id, const LoadView& view) const;
  InstanceId dispatch(DecisionKind kind, RequestId request, InstanceId target, Seconds now,
                      std::string rule);
  void log_move(const PoolMove& move, Seconds now, std::string rule);
  InstanceId round_robin(PoolKind kind, std::size_t& cursor) const;

  SchedulerConfig config_;
  PoolSet pools_;
  PrefillCostParams predictor_;
  TokenCount max_running_tokens_;
  Seconds ttft_threshold_;
  Seconds tpot_threshold_;
  int breach_ticks_required_;
  int breach_ticks_ = 0;
  std::size_t rr_prefill_ = 0;
  std::size_t rr_decode_ = 0;
  std::vector<Decision> decisions_;
};

}  // namespace pdsim
