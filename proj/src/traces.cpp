/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/traces.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pdsim/config.hpp"
#include "pdsim/stats.hpp"

namespace pdsim {

namespace {

struct Row {
  Seconds arrival = 0.0;
  TokenCount input = 0;
  TokenCount output = 0;
};

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  throw std::invalid_argument("trace line " + std::to_string(line) + ": " + what);
}

void check_row(const Row& row, std::size_t line) {
  if (!std::isfinite(row.arrival) || row.arrival < 0.0) {
    bad_line(line, "arrival_s must be a finite non-negative number");
  }
  if (row.input < 1) bad_line(line, "input_tokens must be >= 1");
  if (row.output < 1) bad_line(line, "output_tokens must be >= 1");
}

Row parse_json_row(std::string_view text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad_line(line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) bad_line(line, "expected a JSON object");
  auto field = [&](const char* name) -> const nlohmann::json& {
    auto it = j.find(name);
    if (it == j.end()) bad_line(line, std::string("missing field ") + name);
    return *it;
  };
  Row row;
  const auto& arrival = field("arrival_s");
  const auto& input = field("input_tokens");
  const auto& output = field("output_tokens");
  if (!arrival.is_number()) bad_line(line, "arrival_s must be a number");
  if (!input.is_number_integer()) bad_line(line, "input_tokens must be an integer");
  if (!output.is_number_integer()) bad_line(line, "output_tokens must be an integer");
  row.arrival = arrival.get<double>();
  row.input = input.get<TokenCount>();
  row.output = output.get<TokenCount>();
  return row;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  while (true) {
    const auto comma = line.find(',');
    std::string_view cell = line.substr(0, comma);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
      cell.remove_suffix(1);
    }
    cells.push_back(cell);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return cells;
}

template <typename T>
T parse_cell(std::string_view cell, std::size_t line, const char* name) {
  T out{};
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  if (ec != std::errc() || ptr != end || cell.empty()) {
    bad_line(line, std::string("bad value for ") + name + ": '" + std::string(cell) + "'");
  }
  return out;
}

std::vector<TraceRequest> normalize(std::vector<Row> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.arrival < b.arrival; });
  std::vector<TraceRequest> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.push_back({RequestId{static_cast<std::uint32_t>(i)}, rows[i].arrival, rows[i].input,
                   rows[i].output});
  }
  return out;
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace

TraceFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? TraceFormat::kCsv : TraceFormat::kJsonl;
}

std::vector<TraceRequest> parse_trace(std::string_view text, TraceFormat format) {
  std::vector<Row> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  int col_arrival = -1;
  int col_input = -1;
  int col_output = -1;

  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (blank(line)) continue;

    if (format == TraceFormat::kJsonl) {
      Row row = parse_json_row(line, line_no);
      check_row(row, line_no);
      rows.push_back(row);
      continue;
    }

    const auto cells = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c] == "arrival_s") col_arrival = static_cast<int>(c);
        if (cells[c] == "input_tokens") col_input = static_cast<int>(c);
        if (cells[c] == "output_tokens") col_output = static_cast<int>(c);
      }
      if (col_arrival < 0 || col_input < 0 || col_output < 0) {
        bad_line(line_no, "CSV header must name arrival_s, input_tokens, output_tokens");
      }
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max({col_arrival, col_input, col_output}));
    if (cells.size() <= need) bad_line(line_no, "too few columns");
    Row row;
    row.arrival = parse_cell<double>(cells[static_cast<std::size_t>(col_arrival)], line_no,
                                     "arrival_s");
    row.input = parse_cell<TokenCount>(cells[static_cast<std::size_t>(col_input)], line_no,
                                       "input_tokens");
    row.output = parse_cell<TokenCount>(cells[static_cast<std::size_t>(col_output)], line_no,
                                        "output_tokens");
    check_row(row, line_no);
    rows.push_back(row);
  }
  return normalize(std::move(rows));
}

std::vector<TraceRequest> load_trace(const std::filesystem::path& path) {
  return load_trace(path, format_for(path));
}

std::vector<TraceRequest> load_trace(const std::filesystem::path& path, TraceFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_trace(ss.str(), format);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string serialize_trace(std::span<const TraceRequest> trace) {
  std::string out;
  for (const auto& r : trace) {
    out += "{\"arrival_s\":" + format_double(r.arrival) +
           ",\"input_tokens\":" + std::to_string(r.input_len) +
           ",\"output_tokens\":" + std::to_string(r.output_len) + "}\n";
  }
  return out;
}

void write_trace(const std::filesystem::path& path, std::span<const TraceRequest> trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trace " + path.string());
  out << serialize_trace(trace);
  if (!out) throw std::runtime_error("failed writing trace " + path.string());
}

void SyntheticParams::validate() const {
  if (!(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
  if (!(base_rate > 0.0)) throw std::invalid_argument("base_rate must be positive");
  for (const auto& b : bursts) {
    if (!(b.multiplier >= 1.0)) throw std::invalid_argument("burst multiplier must be >= 1");
    if (!(b.duration >= 0.0) || !(b.start >= 0.0)) {
      throw std::invalid_argument("burst start and duration must be >= 0");
    }
  }
  for (const auto* d : {&input, &output}) {
    if (!(d->sigma >= 0.0) || d->max < 1) {
      throw std::invalid_argument("length distribution needs sigma >= 0 and max >= 1");
    }
  }
  if (!(length_correlation >= -1.0 && length_correlation <= 1.0)) {
    throw std::invalid_argument("length_correlation must be in [-1, 1]");
  }
}

double rate_multiplier(const SyntheticParams& params, Seconds t) {
  double m = 1.0;
  for (const auto& b : params.bursts) {
    if (t >= b.start && t < b.start + b.duration) m = std::max(m, b.multiplier);
  }
  return m;
}

std::vector<TraceRequest> gen_synthetic(const SyntheticParams& params) {
  params.validate();
  std::vector<TraceRequest> out;
  if (params.duration <= 0.0) return out;

  // Piecewise-constant rate: walk the segments between burst edges.
  std::vector<Seconds> edges{0.0, params.duration};
  for (const auto& b : params.bursts) {
    for (Seconds e : {b.start, b.start + b.duration}) {
      if (e > 0.0 && e < params.duration) edges.push_back(e);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::mt19937_64 rng(params.seed);
  std::exponential_distribution<double> exp1(1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_len = [](const LengthDistribution& d, double z) {
    const double v = std::round(std::exp(d.mu + d.sigma * z));
    return static_cast<TokenCount>(std::clamp(v, 1.0, static_cast<double>(d.max)));
  };
  const double rho = params.length_correlation;
  const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  std::size_t seg = 0;
  Seconds t = 0.0;
  double budget = exp1(rng);  // unit-rate exponential consumed by the integrated rate
  while (seg + 1 < edges.size()) {
    const Seconds seg_end = edges[seg + 1];
    const double rate = params.base_rate * rate_multiplier(params, t);
    const Seconds dt = budget / rate;
    if (t + dt >= seg_end) {
      budget -= (seg_end - t) * rate;
      t = seg_end;
      ++seg;
      continue;
    }
    t += dt;
    const double z1 = normal(rng);
    const double z2 = rho * z1 + rho_c * normal(rng);
    out.push_back({RequestId{static_cast<std::uint32_t>(out.size())}, t,
                   draw_len(params.input, z1), draw_len(params.output, z2)});
    budget = exp1(rng);
  }
  return out;
}

TraceStats trace_stats(std::span<const TraceRequest> trace, Seconds bucket) {
  if (!(bucket > 0.0)) throw std::invalid_argument("bucket must be positive");
  TraceStats s;
  s.bucket = bucket;
  s.requests = trace.size();
  if (trace.empty()) return s;

  Seconds first = trace.front().arrival;
  Seconds last = trace.front().arrival;
  for (const auto& r : trace) {
    first = std::min(first, r.arrival);
    last = std::max(last, r.arrival);
  }
  const auto lo = static_cast<std::int64_t>(std::floor(first / bucket));
  const auto hi = static_cast<std::int64_t>(std::floor(last / bucket));
  s.buckets.resize(static_cast<std::size_t>(hi - lo + 1));
  for (std::size_t b = 0; b < s.buckets.size(); ++b) {
    s.buckets[b].start = static_cast<double>(lo + static_cast<std::int64_t>(b)) * bucket;
  }
  std::vector<double> inputs;
  std::vector<double> outputs;
  inputs.reserve(trace.size());
  outputs.reserve(trace.size());
  for (const auto& r : trace) {
    auto& b = s.buckets[static_cast<std::size_t>(
        static_cast<std::int64_t>(std::floor(r.arrival / bucket)) - lo)];
    ++b.requests;
    b.input_tokens += r.input_len;
    b.output_tokens += r.output_len;
    inputs.push_back(static_cast<double>(r.input_len));
    outputs.push_back(static_cast<double>(r.output_len));
  }

  std::vector<double> totals;
  totals.reserve(s.buckets.size());
  for (const auto& b : s.buckets) totals.push_back(static_cast<double>(b.input_tokens));
  s.input_cv = coefficient_of_variation(totals);
  const auto [mn, mx] = std::minmax_element(totals.begin(), totals.end());
  s.max_over_min = *mn > 0.0 ? *mx / *mn : std::numeric_limits<double>::infinity();
  s.min_over_max = *mx > 0.0 ? *mn / *mx : 0.0;
  s.length_correlation = pearson(inputs, outputs);
  s.input_p50 = nearest_rank(inputs, 0.5);
  s.input_p90 = nearest_rank(inputs, 0.9);
  s.input_p99 = nearest_rank(inputs, 0.99);
  s.output_p50 = nearest_rank(outputs, 0.5);
  s.output_p90 = nearest_rank(outputs, 0.9);
  s.output_p99 = nearest_rank(outputs, 0.99);
  s.mean_rate = last > first ? static_cast<double>(trace.size() - 1) / (last - first) : 0.0;
  return s;
}

std::string format_stats(const TraceStats& s) {
  std::ostringstream out;
  out << "requests " << s.requests << '\n';
  out << "bucket_s " << format_double(s.bucket) << '\n';
  out << "mean_rate " << format_double(s.mean_rate) << '\n';
  out << "input_cv " << format_double(s.input_cv) << '\n';
  out << "length_correlation " << format_double(s.length_correlation) << '\n';
  out << "max_over_min " << format_double(s.max_over_min) << '\n';
  out << "min_over_max " << format_double(s.min_over_max) << '\n';
  out << "input_p50 " << format_double(s.input_p50) << '\n';
  out << "input_p90 " << format_double(s.input_p90) << '\n';
  out << "input_p99 " << format_double(s.input_p99) << '\n';
  out << "output_p50 " << format_double(s.output_p50) << '\n';
  out << "output_p90 " << format_double(s.output_p90) << '\n';
  out << "output_p99 " << format_double(s.output_p99) << '\n';
  out << "bucket_start,requests,input_tokens,output_tokens\n";
  for (const auto& b : s.buckets) {
    out << format_double(b.start) << ',' << b.requests << ',' << b.input_tokens << ','
        << b.output_tokens << '\n';
  }
  return out.str();
}

}  // namespace pdsim
