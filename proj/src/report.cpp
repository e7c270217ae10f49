/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pdsim/stats.hpp"

namespace pdsim {

namespace {

std::string csv_bool(bool v) { return v ? "1" : "0"; }

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = line.find(sep);
    out.push_back(line.substr(0, pos));
    if (pos == std::string_view::npos) break;
    line.remove_prefix(pos + 1);
  }
  return out;
}

template <typename T>
T parse_field(std::string_view cell, std::size_t line) {
  T out{};
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  if (ec != std::errc() || ptr != end || cell.empty()) {
    throw std::invalid_argument("records line " + std::to_string(line) + ": bad value '" +
                                std::string(cell) + "'");
  }
  return out;
}

bool parse_flag(std::string_view cell, std::size_t line) {
  if (cell == "1") return true;
  if (cell == "0") return false;
  throw std::invalid_argument("records line " + std::to_string(line) + ": bad flag");
}

constexpr std::string_view kRecordsHeader =
    "request_id,arrival_s,ttft_s,tpot_s,ttft_ok,tpot_ok,slo_ok";

}  // namespace

Summary compute_metrics(std::span<const RequestRecord> records) {
  if (records.empty()) throw std::invalid_argument("no records to summarize");
  Summary s;
  s.requests = records.size();
  std::vector<double> ttft;
  std::vector<double> tpot;
  ttft.reserve(records.size());
  tpot.reserve(records.size());
  std::size_t ok = 0;
  Seconds first_arrival = records.front().arrival;
  Seconds last_completion = 0.0;
  for (const auto& r : records) {
    ttft.push_back(r.ttft);
    tpot.push_back(r.tpot);
    ok += r.slo_ok ? 1 : 0;
    first_arrival = std::min(first_arrival, r.arrival);
    const Seconds done = r.token_times.empty() ? r.arrival + r.ttft : r.token_times.back();
    last_completion = std::max(last_completion, done);
  }
  s.attainment = static_cast<double>(ok) / static_cast<double>(records.size());
  s.p90_ttft = nearest_rank(ttft, 0.9);
  s.p90_tpot = nearest_rank(tpot, 0.9);
  s.mean_ttft = mean(ttft);
  s.mean_tpot = mean(tpot);
  const Seconds span = last_completion - first_arrival;
  s.goodput = span > 0.0 ? static_cast<double>(ok) / span : 0.0;
  return s;
}

std::optional<double> max_rate_meeting(std::span<const double> rates,
                                       std::span<const double> attainments, double target) {
  if (rates.size() != attainments.size()) {
    throw std::invalid_argument("rates and attainments differ in length");
  }
  std::optional<double> best;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (attainments[i] >= target && (!best || rates[i] > *best)) best = rates[i];
  }
  return best;
}

double native_rate(std::span<const TraceRequest> trace) {
  if (trace.size() < 2) throw std::invalid_argument("rate needs at least two requests");
  const Seconds span = trace.back().arrival - trace.front().arrival;
  if (!(span > 0.0)) throw std::invalid_argument("trace has zero arrival span");
  return static_cast<double>(trace.size()) / span;
}

SweepResult sweep_max_rate(std::span<const TraceRequest> trace, const RunConfig& config,
                           std::span<const double> rates) {
  if (!std::is_sorted(rates.begin(), rates.end())) {
    throw std::invalid_argument("rate grid must be ascending");
  }
  const double native = native_rate(trace);
  SweepResult out;
  std::vector<double> attainments;
  for (double rate : rates) {
    if (!(rate > 0.0)) throw std::invalid_argument("rates must be positive");
    SweepPoint p;
    p.rate = rate;
    p.scale = native / rate;
    const auto scaled = scale_trace(trace, p.scale);
    const RunResult res = run(scaled, config);
    p.summary = compute_metrics(res.records);
    attainments.push_back(p.summary.attainment);
    out.points.push_back(p);
  }
  out.max_rate = max_rate_meeting(rates, attainments, config.slo.attainment_target);
  return out;
}

std::string records_csv(std::span<const RequestRecord> records) {
  std::string out(kRecordsHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(to_index(r.request_id)) + ',' + format_double(r.arrival) + ',' +
           format_double(r.ttft) + ',' + format_double(r.tpot) + ',' + csv_bool(r.ttft_ok) + ',' +
           csv_bool(r.tpot_ok) + ',' + csv_bool(r.slo_ok) + '\n';
  }
  return out;
}

std::vector<RequestRecord> parse_records_csv(std::string_view text) {
  std::vector<RequestRecord> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kRecordsHeader) throw std::invalid_argument("unexpected records header");
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 7) {
      throw std::invalid_argument("records line " + std::to_string(line_no) +
                                  ": expected 7 columns");
    }
    RequestRecord r;
    r.request_id = RequestId{parse_field<std::uint32_t>(cells[0], line_no)};
    r.arrival = parse_field<double>(cells[1], line_no);
    r.ttft = parse_field<double>(cells[2], line_no);
    r.tpot = parse_field<double>(cells[3], line_no);
    r.first_token_time = r.arrival + r.ttft;
    r.ttft_ok = parse_flag(cells[4], line_no);
    r.tpot_ok = parse_flag(cells[5], line_no);
    r.slo_ok = parse_flag(cells[6], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RequestRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_records_csv(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string summary_json(const std::optional<Summary>& summary) {
  nlohmann::ordered_json j;
  j["requests"] = summary ? summary->requests : 0;
  auto put = [&](const char* key, auto get) {
    if (summary) {
      j[key] = get(*summary);
    } else {
      j[key] = nullptr;
    }
  };
  put("attainment", [](const Summary& s) { return s.attainment; });
  put("p90_ttft", [](const Summary& s) { return s.p90_ttft; });
  put("p90_tpot", [](const Summary& s) { return s.p90_tpot; });
  put("mean_ttft", [](const Summary& s) { return s.mean_ttft; });
  put("mean_tpot", [](const Summary& s) { return s.mean_tpot; });
  put("goodput", [](const Summary& s) { return s.goodput; });
  return j.dump(2) + "\n";
}

std::string monitor_csv(std::span<const MonitorSnapshot> snapshots) {
  std::string out =
      "time,instance_id,pool,running_tokens,kv_used,queue_len,pred_delay,avg_interval,"
      "prefill_requests,decode_requests\n";
  for (const auto& snap : snapshots) {
    for (const auto& s : snap.instances) {
      out += format_double(snap.time) + ',' + std::to_string(to_index(s.instance)) + ',' +
             std::string(to_string(s.pool)) + ',' + std::to_string(s.running_tokens) + ',' +
             std::to_string(s.kv_used) + ',' + std::to_string(s.queue_len) + ',' +
             format_double(s.predicted_prefill_delay) + ',' +
             (s.avg_token_interval ? format_double(*s.avg_token_interval) : std::string()) + ',' +
             std::to_string(s.prefill_requests) + ',' + std::to_string(s.decode_requests) + '\n';
    }
  }
  return out;
}

std::string decisions_jsonl(std::span<const Decision> decisions) {
  std::string out;
  for (const auto& d : decisions) {
    nlohmann::ordered_json j;
    j["time"] = d.time;
    j["kind"] = to_string(d.kind);
    if (d.request) {
      j["request"] = to_index(*d.request);
    } else {
      j["request"] = nullptr;
    }
    j["instance"] = to_index(d.instance);
    j["rule"] = d.rule;
    if (d.from) j["from"] = to_string(*d.from);
    if (d.to) j["to"] = to_string(*d.to);
    out += j.dump() + '\n';
  }
  return out;
}

OutputPaths OutputPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "requests.csv", dir / "summary.json", dir / "monitor.csv",
          dir / "decisions.jsonl"};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_outputs(const RunResult& result, const std::optional<Summary>& summary,
                   const OutputPaths& paths) {
  write_text(paths.records, records_csv(result.records));
  write_text(paths.summary, summary_json(summary));
  write_text(paths.monitor, monitor_csv(result.snapshots));
  if (paths.decisions) write_text(*paths.decisions, decisions_jsonl(result.decisions));
}

}  // namespace pdsim
