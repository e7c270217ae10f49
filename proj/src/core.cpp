/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/core.hpp"

#include <stdexcept>
#include <string>

namespace pdsim {

bool trace_order(const TraceRequest& a, const TraceRequest& b) {
  if (a.arrival != b.arrival) return a.arrival < b.arrival;
  return to_index(a.id) < to_index(b.id);
}

void SloConfig::validate() const {
  if (!(ttft_slo > 0.0)) throw std::invalid_argument("ttft_slo must be positive");
  if (!(tpot_slo > 0.0)) throw std::invalid_argument("tpot_slo must be positive");
  if (!(attainment_target > 0.0 && attainment_target <= 1.0)) {
    throw std::invalid_argument("attainment_target must lie in (0, 1]");
  }
}

std::string_view to_string(PoolKind kind) {
  switch (kind) {
    case PoolKind::kPrefill:
      return "prefill";
    case PoolKind::kDecode:
      return "decode";
    case PoolKind::kPtoD:
      return "p2d";
    case PoolKind::kDtoP:
      return "d2p";
  }
  return "?";
}

std::string_view to_string(Phase phase) {
  return phase == Phase::kPrefill ? "prefill" : "decode";
}

Seconds compute_ttft(const RequestRecord& record) {
  if (record.token_times.empty()) {
    throw std::invalid_argument("request " + std::to_string(to_index(record.request_id)) +
                                " has no token timestamps");
  }
  if (record.first_token_time < record.arrival) {
    throw std::invalid_argument("first token precedes arrival");
  }
  return record.first_token_time - record.arrival;
}

Seconds compute_tpot(const RequestRecord& record) {
  const auto& times = record.token_times;
  if (times.empty()) {
    throw std::invalid_argument("request " + std::to_string(to_index(record.request_id)) +
                                " has no token timestamps");
  }
  const auto m = times.size();
  if (m == 1) return 0.0;
  return (times.back() - times.front()) / static_cast<double>(m - 1);
}

RequestRecord make_record(const TraceRequest& request, std::vector<Seconds> token_times,
                          const SloConfig& slo) {
  RequestRecord record;
  record.request_id = request.id;
  record.arrival = request.arrival;
  record.token_times = std::move(token_times);
  if (record.token_times.empty()) {
    throw std::invalid_argument("cannot build a record without tokens");
  }
  for (std::size_t i = 1; i < record.token_times.size(); ++i) {
    if (!(record.token_times[i] > record.token_times[i - 1])) {
      throw std::invalid_argument("token timestamps must be strictly increasing");
    }
  }
  record.first_token_time = record.token_times.front();
  record.ttft = compute_ttft(record);
  record.tpot = compute_tpot(record);
  record.ttft_ok = record.ttft <= slo.ttft_slo;
  // A single-token output has TPOT 0, which satisfies any positive SLO.
  record.tpot_ok = record.tpot <= slo.tpot_slo;
  record.slo_ok = record.ttft_ok && record.tpot_ok;
  return record;
}

}  // namespace pdsim
