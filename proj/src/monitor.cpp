/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/monitor.hpp"

namespace pdsim {

MonitorSnapshot collect(std::span<const Instance> instances, const PoolSet& pools,
                        const PrefillCostParams& predictor, Seconds interval_window, Seconds now) {
  MonitorSnapshot snap;
  snap.time = now;
  snap.instances.reserve(instances.size());
  for (const auto& inst : instances) {
    InstanceSample s;
    s.instance = inst.id();
    s.pool = pools.pool_of(inst.id());
    s.running_tokens = inst.running_tokens();
    s.kv_used = inst.kv_used();
    s.queue_len = inst.wait_queue_len() + inst.migration_queue_len();
    s.predicted_prefill_delay = inst.predicted_prefill_delay(predictor, now);
    s.avg_token_interval = inst.avg_token_interval(interval_window, now);
    s.prefill_requests = inst.prefill_request_count();
    s.decode_requests = inst.decode_request_count();
    snap.instances.push_back(s);
  }
  return snap;
}

std::vector<std::vector<PoolKind>> pool_timeline(std::span<const MonitorSnapshot> snapshots) {
  std::vector<std::vector<PoolKind>> out;
  out.reserve(snapshots.size());
  for (const auto& snap : snapshots) {
    std::vector<PoolKind> row;
    row.reserve(snap.instances.size());
    for (const auto& s : snap.instances) row.push_back(s.pool);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace pdsim
