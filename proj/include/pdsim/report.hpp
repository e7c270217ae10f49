/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdsim/config.hpp"
#include "pdsim/core.hpp"
#include "pdsim/engine.hpp"
#include "pdsim/monitor.hpp"
#include "pdsim/scheduler.hpp"

namespace pdsim {

struct Summary {
  std::size_t requests = 0;
  double attainment = 0.0;
  Seconds p90_ttft = 0.0;
  Seconds p90_tpot = 0.0;
  Seconds mean_ttft = 0.0;
  Seconds mean_tpot = 0.0;
  // Requests meeting both SLOs per second of (last completion - first arrival).
  double goodput = 0.0;
};

// Throws std::invalid_argument on an empty record list.
Summary compute_metrics(std::span<const RequestRecord> records);

// Largest rate whose attainment reaches `target`, scanning the whole grid.
std::optional<double> max_rate_meeting(std::span<const double> rates,
                                       std::span<const double> attainments, double target);

// Requests per second over the arrival span of the trace.
double native_rate(std::span<const TraceRequest> trace);

struct SweepPoint {
  double rate = 0.0;
  double scale = 1.0;  // factor applied to arrival times
  Summary summary;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<double> max_rate;
};

// Replays `trace` rescaled to each request rate in `rates` (ascending).
SweepResult sweep_max_rate(std::span<const TraceRequest> trace, const RunConfig& config,
                           std::span<const double> rates);

std::string records_csv(std::span<const RequestRecord> records);
// Reads back the columns written by records_csv; token timestamps are not stored.
std::vector<RequestRecord> parse_records_csv(std::string_view text);
std::vector<RequestRecord> read_records_csv(const std::filesystem::path& path);

// Summary JSON. An absent summary (no requests) writes nulls for every metric.
std::string summary_json(const std::optional<Summary>& summary);
std::string monitor_csv(std::span<const MonitorSnapshot> snapshots);
std::string decisions_jsonl(std::span<const Decision> decisions);

struct OutputPaths {
  std::filesystem::path records;
  std::filesystem::path summary;
  std::filesystem::path monitor;
  std::optional<std::filesystem::path> decisions;

  // requests.csv, summary.json, monitor.csv and decisions.jsonl inside `dir`.
  static OutputPaths in_directory(const std::filesystem::path& dir);
};

void write_outputs(const RunResult& result, const std::optional<Summary>& summary,
                   const OutputPaths& paths);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pdsim
