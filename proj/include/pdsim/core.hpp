/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pdsim {

// Simulated time in seconds. Continuous, no tick quantization.
using Seconds = double;
using TokenCount = std::int64_t;

enum class RequestId : std::uint32_t {};
enum class InstanceId : std::uint32_t {};

constexpr std::uint32_t to_index(RequestId id) { return static_cast<std::uint32_t>(id); }
constexpr std::uint32_t to_index(InstanceId id) { return static_cast<std::uint32_t>(id); }

struct TraceRequest {
  RequestId id{};
  Seconds arrival = 0.0;
  TokenCount input_len = 1;
  TokenCount output_len = 1;

  friend bool operator==(const TraceRequest&, const TraceRequest&) = default;
};

// Canonical trace order: arrival, then id.
bool trace_order(const TraceRequest& a, const TraceRequest& b);

struct SloConfig {
  Seconds ttft_slo = 3.0;
  Seconds tpot_slo = 0.1;
  double attainment_target = 0.9;

  void validate() const;
};

enum class PoolKind : std::uint8_t { kPrefill, kDecode, kPtoD, kDtoP };
inline constexpr PoolKind kAllPools[] = {PoolKind::kPrefill, PoolKind::kDecode, PoolKind::kPtoD,
                                         PoolKind::kDtoP};

std::string_view to_string(PoolKind kind);

enum class Phase : std::uint8_t { kPrefill, kDecode };

std::string_view to_string(Phase phase);

// One schedulable half of a request. A decode PhaseRequest only exists after the
// prefill half produced the first token.
struct PhaseRequest {
  RequestId request_id{};
  Phase phase = Phase::kPrefill;
  TokenCount prompt_len = 1;
  TokenCount output_len = 1;
  TokenCount tokens_generated = 0;
  // Instance holding the KV cache, set only when it differs from the decode instance.
  std::optional<InstanceId> kv_source;
};

struct RequestRecord {
  RequestId request_id{};
  Seconds arrival = 0.0;
  Seconds first_token_time = 0.0;
  std::vector<Seconds> token_times;
  Seconds ttft = 0.0;
  Seconds tpot = 0.0;
  bool ttft_ok = false;
  bool tpot_ok = false;
  bool slo_ok = false;
};

Seconds compute_ttft(const RequestRecord& record);

// Mean gap between consecutive tokens; 0 for a single-token output.
Seconds compute_tpot(const RequestRecord& record);

// Builds a fully evaluated record from raw token timestamps.
RequestRecord make_record(const TraceRequest& request, std::vector<Seconds> token_times,
                          const SloConfig& slo);

}  // namespace pdsim
