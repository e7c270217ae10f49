/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

// Command-line front end: fit, run, compare, sweep, stats, gen.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdsim/config.hpp"
#include "pdsim/cost_model.hpp"
#include "pdsim/engine.hpp"
#include "pdsim/report.hpp"
#include "pdsim/scheduler.hpp"
#include "pdsim/traces.hpp"

namespace {

using namespace pdsim;

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

// Every config key is also a long flag; flags override the config file.
const char* const kConfigKeys[] = {
    "instances",         "kv_capacity_tokens", "chunk_budget",     "max_batch_requests",
    "a2",                "a1",                 "a0",               "b1",
    "b0",                "decode_cost_basis",  "bytes_per_token",  "bandwidth",
    "base_latency",      "ttft_slo",           "tpot_slo",         "attainment_target",
    "theta_d",           "theta_busy",         "ttft_margin",      "ttft_threshold",
    "tpot_threshold",    "tpot_breach_s",      "enable_flips",     "monitor_period_s",
    "interval_window_s", "seed",               "init_prefill",     "init_decode",
    "profiling_noise",   "max_context",        "watchdog_events",
};

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::string strategy;

  void attach(CLI::App* cmd, bool with_strategy) {
    cmd->add_option("--config", config_path, "Run configuration (key = value lines)")
        ->check(CLI::ExistingFile);
    if (with_strategy) cmd->add_option("--strategy", strategy, "slo-aware | minimal-load | round-robin");
    for (const char* key : kConfigKeys) {
      cmd->add_option_function<std::string>(
          std::string("--") + key, [this, key](const std::string& v) { overrides[key] = v; },
          "Override config key");
    }
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
    if (!strategy.empty()) cfg.scheduler.strategy = parse_strategy(strategy);
    cfg.validate();
    return cfg;
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    double v = 0.0;
    const auto* end = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(item.data(), end, v);
    if (ec != std::errc() || ptr != end || item.empty()) {
      throw CLI::ValidationError("bad number in list: '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<ProfilingSample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open samples " + path.string());
  std::vector<ProfilingSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "input_tokens,time_s") continue;
    const auto comma = line.find(',');
    ProfilingSample s;
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      s.input_len = std::stoll(line.substr(0, comma));
      s.measured_time = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument(path.string() + " line " + std::to_string(line_no) +
                                  ": expected input_tokens,time_s");
    }
    out.push_back(s);
  }
  return out;
}

int cmd_fit(const std::string& samples_path, const std::string& out_path) {
  const auto samples = load_samples(samples_path);
  const auto params = fit_quadratic(samples);
  std::cout << "a2 " << format_double(params.a2) << '\n'
            << "a1 " << format_double(params.a1) << '\n'
            << "a0 " << format_double(params.a0) << '\n'
            << "residual " << format_double(fit_residual(params, samples)) << '\n';
  if (!out_path.empty()) {
    const std::vector<std::pair<std::string, std::string>> entries = {
        {"a2", format_double(params.a2)},
        {"a1", format_double(params.a1)},
        {"a0", format_double(params.a0)}};
    update_config_file(out_path, entries);
  }
  return 0;
}

int cmd_run(const std::string& trace_path, const RunConfig& cfg, const std::string& out_dir,
            double rate_scale) {
  const auto trace = scale_trace(load_trace(trace_path), rate_scale);
  const RunResult res = run(trace, cfg);
  std::filesystem::create_directories(out_dir);
  std::optional<Summary> summary;
  if (!res.records.empty()) summary = compute_metrics(res.records);
  write_outputs(res, summary, OutputPaths::in_directory(out_dir));
  std::cout << summary_json(summary);
  return 0;
}

int cmd_compare(const std::string& trace_path, const RunConfig& base,
                const std::vector<std::string>& strategies, const std::vector<double>& rates,
                const std::string& out_path) {
  const auto trace = load_trace(trace_path);
  std::string csv = "strategy,rate,attainment,p90_ttft,p90_tpot\n";
  for (const auto& name : strategies) {
    RunConfig cfg = base;
    cfg.scheduler.strategy = parse_strategy(name);
    const SweepResult sweep = sweep_max_rate(trace, cfg, rates);
    for (const auto& p : sweep.points) {
      csv += std::string(to_string(cfg.scheduler.strategy)) + ',' + format_double(p.rate) + ',' +
             format_double(p.summary.attainment) + ',' + format_double(p.summary.p90_ttft) + ',' +
             format_double(p.summary.p90_tpot) + '\n';
    }
  }
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    write_text(out_path, csv);
  }
  return 0;
}

int cmd_sweep(const std::string& trace_path, const RunConfig& cfg,
              const std::vector<double>& rates, const std::string& out_path) {
  const auto trace = load_trace(trace_path);
  const SweepResult sweep = sweep_max_rate(trace, cfg, rates);
  std::string csv = "rate,scale,attainment,p90_ttft,p90_tpot,goodput\n";
  for (const auto& p : sweep.points) {
    csv += format_double(p.rate) + ',' + format_double(p.scale) + ',' +
           format_double(p.summary.attainment) + ',' + format_double(p.summary.p90_ttft) + ',' +
           format_double(p.summary.p90_tpot) + ',' + format_double(p.summary.goodput) + '\n';
  }
  if (!out_path.empty()) write_text(out_path, csv);
  std::cout << csv << "max_rate " << (sweep.max_rate ? format_double(*sweep.max_rate) : "none")
            << '\n';
  return 0;
}

int cmd_stats(const std::string& trace_path, double bucket) {
  std::cout << format_stats(trace_stats(load_trace(trace_path), bucket));
  return 0;
}

BurstEpisode parse_burst(const std::string& text) {
  const auto v = parse_list(text);
  if (v.size() != 3) throw CLI::ValidationError("--burst expects start,duration,multiplier");
  return {v[0], v[1], v[2]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prefill-decode disaggregated serving simulator"};
  app.require_subcommand(1);

  std::string samples_path;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "Fit the quadratic prefill model to profiling samples");
  fit->add_option("samples", samples_path, "CSV with input_tokens,time_s")->required();
  fit->add_option("--out", fit_out, "Config file to update with a2, a1, a0");

  std::string trace_path;
  std::string out_path;
  double rate_scale = 1.0;
  ConfigFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Replay a trace once and write reports");
  run_cmd->add_option("trace", trace_path, "Trace (.jsonl or .csv)")->required();
  run_cmd->add_option("--out", out_path, "Output directory")->required();
  run_cmd->add_option("--rate-scale", rate_scale, "Multiply arrival times by this factor")
      ->check(CLI::PositiveNumber);
  run_flags.attach(run_cmd, true);

  std::string strategies = "slo-aware,minimal-load,round-robin";
  std::string rates_text;
  ConfigFlags cmp_flags;
  auto* compare = app.add_subcommand("compare", "Sweep several strategies over a rate grid");
  compare->add_option("trace", trace_path, "Trace (.jsonl or .csv)")->required();
  compare->add_option("--strategies", strategies, "Comma-separated strategy names");
  compare->add_option("--rates", rates_text, "Comma-separated request rates (req/s)")->required();
  compare->add_option("--out", out_path, "CSV output (default: stdout)");
  cmp_flags.attach(compare, false);

  ConfigFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Find the largest rate meeting the attainment target");
  sweep->add_option("trace", trace_path, "Trace (.jsonl or .csv)")->required();
  sweep->add_option("--rates", rates_text, "Comma-separated request rates (req/s)")->required();
  sweep->add_option("--out", out_path, "CSV output");
  sweep_flags.attach(sweep, true);

  double bucket = 60.0;
  auto* stats = app.add_subcommand("stats", "Print trace statistics");
  stats->add_option("trace", trace_path, "Trace (.jsonl or .csv)")->required();
  stats->add_option("--bucket", bucket, "Bucket width in seconds")->check(CLI::PositiveNumber);

  SyntheticParams gen_params;
  std::vector<std::string> bursts;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic bursty trace");
  gen->add_option("--out", out_path, "Trace output (.jsonl or .csv)")->required();
  gen->add_option("--duration", gen_params.duration, "Seconds")->required();
  gen->add_option("--base-rate", gen_params.base_rate, "Requests per second")->required();
  gen->add_option("--burst", bursts, "start,duration,multiplier (repeatable)");
  gen->add_option("--input-mu", gen_params.input.mu);
  gen->add_option("--input-sigma", gen_params.input.sigma);
  gen->add_option("--input-max", gen_params.input.max);
  gen->add_option("--output-mu", gen_params.output.mu);
  gen->add_option("--output-sigma", gen_params.output.sigma);
  gen->add_option("--output-max", gen_params.output.max);
  gen->add_option("--length-correlation", gen_params.length_correlation);
  gen->add_option("--seed", gen_params.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*fit) return cmd_fit(samples_path, fit_out);
    if (*run_cmd) return cmd_run(trace_path, run_flags.resolve(), out_path, rate_scale);
    if (*compare) {
      return cmd_compare(trace_path, cmp_flags.resolve(), split_names(strategies),
                         parse_list(rates_text), out_path);
    }
    if (*sweep) return cmd_sweep(trace_path, sweep_flags.resolve(), parse_list(rates_text), out_path);
    if (*stats) return cmd_stats(trace_path, bucket);
    if (*gen) {
      for (const auto& b : bursts) gen_params.bursts.push_back(parse_burst(b));
      const auto trace = gen_synthetic(gen_params);
      if (format_for(out_path) == TraceFormat::kCsv) {
        std::string csv = "arrival_s,input_tokens,output_tokens\n";
        for (const auto& r : trace) {
          csv += format_double(r.arrival) + ',' + std::to_string(r.input_len) + ',' +
                 std::to_string(r.output_len) + '\n';
        }
        write_text(out_path, csv);
      } else {
        write_trace(out_path, trace);
      }
      std::cout << "wrote " << trace.size() << " requests to " << out_path << '\n';
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
