/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pdsim/core.hpp"
#include "pdsim/cost_model.hpp"
#include "pdsim/instance.hpp"
#include "pdsim/pools.hpp"

namespace pdsim {

struct InstanceSample {
  InstanceId instance{};
  PoolKind pool = PoolKind::kPrefill;
  TokenCount running_tokens = 0;
  TokenCount kv_used = 0;
  std::size_t queue_len = 0;  // waiting for admission or for a KV pull
  Seconds predicted_prefill_delay = 0.0;
  std::optional<Seconds> avg_token_interval;
  std::size_t prefill_requests = 0;
  std::size_t decode_requests = 0;

  friend bool operator==(const InstanceSample&, const InstanceSample&) = default;
};

struct MonitorSnapshot {
  Seconds time = 0.0;
  std::vector<InstanceSample> instances;

  friend bool operator==(const MonitorSnapshot&, const MonitorSnapshot&) = default;
};

// Pure read of instance state.
MonitorSnapshot collect(std::span<const Instance> instances, const PoolSet& pools,
                        const PrefillCostParams& predictor, Seconds interval_window, Seconds now);

// Pool of every instance at each snapshot time, as a flat list per snapshot.
std::vector<std::vector<PoolKind>> pool_timeline(std::span<const MonitorSnapshot> snapshots);

}  // namespace pdsim
