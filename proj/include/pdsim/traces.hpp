/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdsim/core.hpp"

namespace pdsim {

enum class TraceFormat : std::uint8_t { kJsonl, kCsv };

// Picks the format from the file extension (".csv" or anything else as JSONL).
TraceFormat format_for(const std::filesystem::path& path);

// Records carry arrival_s, input_tokens, output_tokens. Rows are stably sorted by arrival and
// then numbered 0..n-1. Malformed rows throw std::invalid_argument naming the line.
std::vector<TraceRequest> parse_trace(std::string_view text, TraceFormat format);
std::vector<TraceRequest> load_trace(const std::filesystem::path& path);
std::vector<TraceRequest> load_trace(const std::filesystem::path& path, TraceFormat format);

// Canonical JSONL, one request per line in trace order.
std::string serialize_trace(std::span<const TraceRequest> trace);
void write_trace(const std::filesystem::path& path, std::span<const TraceRequest> trace);

struct BurstEpisode {
  Seconds start = 0.0;
  Seconds duration = 0.0;
  double multiplier = 1.0;
};

struct LengthDistribution {
  // Parameters of the underlying normal of a log-normal, truncated to [1, max].
  double mu = 0.0;
  double sigma = 0.0;
  TokenCount max = 1;
};

struct SyntheticParams {
  Seconds duration = 0.0;
  double base_rate = 1.0;  // requests / second
  std::vector<BurstEpisode> bursts;
  LengthDistribution input{6.0, 1.0, 16384};
  LengthDistribution output{4.0, 1.0, 2048};
  // Correlation between the normals behind input and output lengths.
  double length_correlation = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Rate multiplier at time t: the largest multiplier among active episodes, else 1.
double rate_multiplier(const SyntheticParams& params, Seconds t);

// Piecewise-constant Poisson arrivals with log-normal lengths. Deterministic per seed.
std::vector<TraceRequest> gen_synthetic(const SyntheticParams& params);

struct BucketTotals {
  Seconds start = 0.0;
  std::size_t requests = 0;
  TokenCount input_tokens = 0;
  TokenCount output_tokens = 0;
};

struct TraceStats {
  Seconds bucket = 60.0;
  std::vector<BucketTotals> buckets;
  std::size_t requests = 0;
  double input_cv = 0.0;  // coefficient of variation of per-bucket input totals
  double length_correlation = 0.0;  // Pearson r between input and output lengths
  // Max and min over min and max bucket input totals.
  double max_over_min = 0.0;
  double min_over_max = 0.0;
  double input_p50 = 0.0;
  double input_p90 = 0.0;
  double input_p99 = 0.0;
  double output_p50 = 0.0;
  double output_p90 = 0.0;
  double output_p99 = 0.0;
  double mean_rate = 0.0;  // requests / second over the arrival span
};

TraceStats trace_stats(std::span<const TraceRequest> trace, Seconds bucket = 60.0);

std::string format_stats(const TraceStats& stats);

}  // namespace pdsim
