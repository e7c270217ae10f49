/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace pdsim {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config key '" + std::string(key) + "': expected a number, got '" +
                                std::string(value) + "'");
  }
  return out;
}

std::int64_t parse_int(std::string_view key, std::string_view value) {
  std::int64_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config key '" + std::string(key) +
                                "': expected an integer, got '" + std::string(value) + "'");
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  const auto v = parse_int(key, value);
  if (v < 0) throw std::invalid_argument("config key '" + std::string(key) + "' is negative");
  return static_cast<std::size_t>(v);
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw std::invalid_argument("config key '" + std::string(key) + "': expected a boolean");
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

void RunConfig::validate() const {
  if (instances < 2) throw std::invalid_argument("instances must be >= 2");
  if (init_prefill + init_decode != instances) {
    throw std::invalid_argument("init_prefill + init_decode must equal instances");
  }
  if (init_prefill < 1 || init_decode < 1) {
    throw std::invalid_argument("initial split needs at least one prefill and one decode instance");
  }
  instance.validate();
  transfer.validate();
  scheduler.validate();
  slo.validate();
  if (slo.tpot_slo <= instance.true_decode.b0) {
    throw std::invalid_argument("tpot_slo must exceed the fixed decode iteration cost b0");
  }
  if (!(monitor_period > 0.0)) throw std::invalid_argument("monitor_period_s must be positive");
  if (!(interval_window > 0.0)) throw std::invalid_argument("interval_window_s must be positive");
  if (profiling_noise < 0.0) throw std::invalid_argument("profiling_noise must be >= 0");
  if (max_context <= 64) throw std::invalid_argument("max_context must exceed 64");
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  auto& inst = c.instance;
  if (key == "instances") {
    c.instances = parse_count(key, value);
  } else if (key == "kv_capacity_tokens") {
    inst.kv_capacity_tokens = parse_int(key, value);
  } else if (key == "chunk_budget") {
    inst.chunk_budget = parse_int(key, value);
  } else if (key == "max_batch_requests") {
    inst.max_batch_requests = parse_int(key, value);
  } else if (key == "a2") {
    inst.true_prefill.a2 = parse_double(key, value);
  } else if (key == "a1") {
    inst.true_prefill.a1 = parse_double(key, value);
  } else if (key == "a0") {
    inst.true_prefill.a0 = parse_double(key, value);
  } else if (key == "b1") {
    inst.true_decode.b1 = parse_double(key, value);
  } else if (key == "b0") {
    inst.true_decode.b0 = parse_double(key, value);
  } else if (key == "decode_cost_basis") {
    if (value == "context") {
      inst.cost_basis = DecodeCostBasis::kContextTokens;
    } else if (value == "batch") {
      inst.cost_basis = DecodeCostBasis::kBatchTokens;
    } else {
      throw std::invalid_argument("decode_cost_basis must be 'context' or 'batch'");
    }
  } else if (key == "bytes_per_token") {
    c.transfer.bytes_per_token = parse_double(key, value);
  } else if (key == "bandwidth") {
    c.transfer.bandwidth = parse_double(key, value);
  } else if (key == "base_latency") {
    c.transfer.base_latency = parse_double(key, value);
  } else if (key == "ttft_slo") {
    c.slo.ttft_slo = parse_double(key, value);
  } else if (key == "tpot_slo") {
    c.slo.tpot_slo = parse_double(key, value);
  } else if (key == "attainment_target") {
    c.slo.attainment_target = parse_double(key, value);
  } else if (key == "strategy") {
    c.scheduler.strategy = parse_strategy(value);
  } else if (key == "theta_d") {
    c.scheduler.theta_d = parse_double(key, value);
  } else if (key == "theta_busy") {
    c.scheduler.theta_busy = parse_double(key, value);
  } else if (key == "ttft_margin") {
    c.scheduler.ttft_margin = parse_double(key, value);
  } else if (key == "ttft_threshold") {
    c.scheduler.ttft_threshold = parse_double(key, value);
  } else if (key == "tpot_threshold") {
    c.scheduler.tpot_threshold = parse_double(key, value);
  } else if (key == "tpot_breach_s") {
    c.scheduler.tpot_breach_duration = parse_double(key, value);
  } else if (key == "enable_flips") {
    c.scheduler.enable_flips = parse_bool(key, value);
  } else if (key == "monitor_period_s") {
    c.monitor_period = parse_double(key, value);
  } else if (key == "interval_window_s") {
    c.interval_window = parse_double(key, value);
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "init_prefill") {
    c.init_prefill = parse_count(key, value);
  } else if (key == "init_decode") {
    c.init_decode = parse_count(key, value);
  } else if (key == "profiling_noise") {
    c.profiling_noise = parse_double(key, value);
  } else if (key == "max_context") {
    c.max_context = parse_int(key, value);
  } else if (key == "watchdog_events") {
    c.watchdog_events = static_cast<std::uint64_t>(parse_int(key, value));
  } else {
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  }
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string format_config(const RunConfig& c) {
  std::ostringstream out;
  const auto& inst = c.instance;
  auto kv = [&out](std::string_view k, const std::string& v) { out << k << " = " << v << '\n'; };
  kv("instances", std::to_string(c.instances));
  kv("init_prefill", std::to_string(c.init_prefill));
  kv("init_decode", std::to_string(c.init_decode));
  kv("kv_capacity_tokens", std::to_string(inst.kv_capacity_tokens));
  kv("chunk_budget", std::to_string(inst.chunk_budget));
  kv("max_batch_requests", std::to_string(inst.max_batch_requests));
  kv("a2", format_double(inst.true_prefill.a2));
  kv("a1", format_double(inst.true_prefill.a1));
  kv("a0", format_double(inst.true_prefill.a0));
  kv("b1", format_double(inst.true_decode.b1));
  kv("b0", format_double(inst.true_decode.b0));
  kv("decode_cost_basis",
     inst.cost_basis == DecodeCostBasis::kContextTokens ? "context" : "batch");
  kv("bytes_per_token", format_double(c.transfer.bytes_per_token));
  kv("bandwidth", format_double(c.transfer.bandwidth));
  kv("base_latency", format_double(c.transfer.base_latency));
  kv("ttft_slo", format_double(c.slo.ttft_slo));
  kv("tpot_slo", format_double(c.slo.tpot_slo));
  kv("attainment_target", format_double(c.slo.attainment_target));
  kv("strategy", std::string(to_string(c.scheduler.strategy)));
  kv("theta_d", format_double(c.scheduler.theta_d));
  kv("theta_busy", format_double(c.scheduler.theta_busy));
  kv("ttft_margin", format_double(c.scheduler.ttft_margin));
  if (c.scheduler.ttft_threshold) kv("ttft_threshold", format_double(*c.scheduler.ttft_threshold));
  if (c.scheduler.tpot_threshold) kv("tpot_threshold", format_double(*c.scheduler.tpot_threshold));
  if (c.scheduler.tpot_breach_duration) {
    kv("tpot_breach_s", format_double(*c.scheduler.tpot_breach_duration));
  }
  kv("enable_flips", c.scheduler.enable_flips ? "true" : "false");
  kv("monitor_period_s", format_double(c.monitor_period));
  kv("interval_window_s", format_double(c.interval_window));
  kv("seed", std::to_string(c.seed));
  kv("profiling_noise", format_double(c.profiling_noise));
  kv("max_context", std::to_string(c.max_context));
  kv("watchdog_events", std::to_string(c.watchdog_events));
  return out.str();
}

void update_config_file(const std::filesystem::path& path,
                        std::span<const std::pair<std::string, std::string>> entries) {
  std::vector<std::string> lines;
  if (std::ifstream in(path); in) {
    for (std::string line; std::getline(in, line);) lines.push_back(line);
  }
  std::vector<bool> written(entries.size(), false);
  for (auto& line : lines) {
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = trim(body.substr(0, eq));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (key == entries[i].first) {
        line = entries[i].first + " = " + entries[i].second;
        written[i] = true;
      }
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!written[i]) lines.push_back(entries[i].first + " = " + entries[i].second);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

}  // namespace pdsim
