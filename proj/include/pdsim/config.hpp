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
#include <utility>

#include "pdsim/core.hpp"
#include "pdsim/cost_model.hpp"
#include "pdsim/instance.hpp"
#include "pdsim/scheduler.hpp"

namespace pdsim {

struct RunConfig {
  std::size_t instances = 8;
  InstanceConfig instance;
  TransferParams transfer;
  // Multiplicative noise applied to startup profiling samples of the prefill model.
  double profiling_noise = 0.0;
  TokenCount max_context = 32768;
  int profiling_points = 16;
  SchedulerConfig scheduler;
  SloConfig slo;
  Seconds monitor_period = 1.0;
  Seconds interval_window = 5.0;
  std::uint64_t seed = 1;
  std::size_t init_prefill = 4;
  std::size_t init_decode = 4;
  // Abort after this many consecutive events without any request making progress.
  std::uint64_t watchdog_events = 2'000'000;

  void validate() const;
};

// Sets one `key = value` entry. Throws std::invalid_argument on unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// Flat `key = value` lines; '#' starts a comment. Later keys override earlier ones.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

// Serializes every key understood by apply_setting.
std::string format_config(const RunConfig& config);

// Rewrites (or appends) the given keys in an existing config file, keeping other lines.
void update_config_file(const std::filesystem::path& path,
                        std::span<const std::pair<std::string, std::string>> entries);

std::string format_double(double value);

}  // namespace pdsim
