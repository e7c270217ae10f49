/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pdsim/config.hpp"
#include "pdsim/report.hpp"
#include "pdsim/traces.hpp"
#include "support.hpp"

namespace pdsim {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("pdsim_cli_") +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome cli(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const std::string cmd = std::string("\"") + PDSIM_CLI + "\" " + args + " > \"" +
                            out.string() + "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = slurp(out);
    return o;
  }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  fs::path small_trace() const {
    const fs::path p = dir_ / "trace.jsonl";
    write_trace(p, gen_synthetic(testing::bursty_params(2.0, 40.0, 3)));
    return p;
  }

  fs::path dir_;
};

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

TEST_F(Cli, FitEchoesExactCoefficientsAndUpdatesConfig) {
  const PrefillCostParams truth{2e-7, 5e-5, 1e-3};
  std::string csv = "input_tokens,time_s\n";
  for (TokenCount l : {100, 1000, 4000, 16000}) {
    csv += std::to_string(l) + ',' + format_double(predict_prefill_time(truth, l)) + '\n';
  }
  const auto samples = write("samples.csv", csv);
  const auto cfg = write("run.cfg", "seed = 7\n");
  const auto o = cli("fit " + q(samples) + " --out " + q(cfg));
  ASSERT_EQ(o.code, 0) << o.out;
  std::istringstream in(o.out);
  std::string key;
  double a2 = 0, a1 = 0, a0 = 0;
  in >> key >> a2 >> key >> a1 >> key >> a0;
  EXPECT_NEAR(a2, truth.a2, 1e-9 * truth.a2);
  EXPECT_NEAR(a1, truth.a1, 1e-9 * truth.a1);
  EXPECT_NEAR(a0, truth.a0, 1e-9 * truth.a0);
  const RunConfig c = load_config(cfg);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_NEAR(c.instance.true_prefill.a2, truth.a2, 1e-9 * truth.a2);
}

TEST_F(Cli, FitRejectsTooFewLengths) {
  const auto samples = write("samples.csv", "input_tokens,time_s\n100,0.1\n200,0.2\n100,0.1\n");
  EXPECT_NE(cli("fit " + q(samples)).code, 0);
}

TEST_F(Cli, RunOnEmptyTraceWritesNullSummary) {
  const auto trace = write("empty.jsonl", "");
  const auto o = cli("run " + q(trace) + " --out " + q(dir_ / "out"));
  ASSERT_EQ(o.code, 0);
  const auto j = nlohmann::json::parse(o.out);
  EXPECT_EQ(j["requests"], 0);
  EXPECT_TRUE(j["attainment"].is_null());
  EXPECT_EQ(slurp(dir_ / "out" / "requests.csv"),
            "request_id,arrival_s,ttft_s,tpot_s,ttft_ok,tpot_ok,slo_ok\n");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "monitor.csv"));
}

TEST_F(Cli, RunIsByteDeterministic) {
  const auto trace = small_trace();
  ASSERT_EQ(cli("run " + q(trace) + " --out " + q(dir_ / "a")).code, 0);
  ASSERT_EQ(cli("run " + q(trace) + " --out " + q(dir_ / "b")).code, 0);
  for (const char* f : {"requests.csv", "summary.json", "monitor.csv", "decisions.jsonl"}) {
    const std::string a = slurp(dir_ / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir_ / "b" / f)) << f;
  }
  const auto records = read_records_csv(dir_ / "a" / "requests.csv");
  EXPECT_EQ(records.size(), load_trace(trace).size());
}

TEST_F(Cli, RoundRobinNeverFlips) {
  const auto trace = small_trace();
  ASSERT_EQ(cli("run " + q(trace) + " --strategy round-robin --rate-scale 0.25 --out " +
                q(dir_ / "rr"))
                .code,
            0);
  std::istringstream in(slurp(dir_ / "rr" / "decisions.jsonl"));
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_NE(j["kind"], "flip");
    EXPECT_NE(j["kind"], "drain");
    ++lines;
  }
  EXPECT_GT(lines, 0u);
}

TEST_F(Cli, ConfigOverridesApply) {
  const auto trace = small_trace();
  const auto cfg = write("run.cfg", "instances = 4\ninit_prefill = 2\ninit_decode = 2\n");
  ASSERT_EQ(cli("run " + q(trace) + " --config " + q(cfg) + " --out " + q(dir_ / "o")).code, 0);
  const std::string monitor = slurp(dir_ / "o" / "monitor.csv");
  EXPECT_EQ(monitor.find("\n1,4,"), std::string::npos);
  EXPECT_NE(monitor.find("\n1,3,"), std::string::npos);
  EXPECT_EQ(cli("run " + q(trace) + " --config " + q(cfg) + " --instances 5 --out " +
                q(dir_ / "p"))
                .code,
            2);
}

TEST_F(Cli, CompareProducesOneRowPerStrategyAndRate) {
  const auto trace = small_trace();
  const auto o = cli("compare " + q(trace) +
                     " --strategies slo-aware,minimal-load,round-robin --rates 1,2,4,8");
  ASSERT_EQ(o.code, 0);
  std::istringstream in(o.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "strategy,rate,attainment,p90_ttft,p90_tpot");
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += line.empty() ? 0 : 1;
  EXPECT_EQ(rows, 12u);
}

TEST_F(Cli, SweepReportsMaxRate) {
  const auto trace = small_trace();
  const auto o = cli("sweep " + q(trace) + " --rates 0.5,1,1000");
  ASSERT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("max_rate "), std::string::npos);
  EXPECT_EQ(o.out.find("max_rate 1000"), std::string::npos);
}

TEST_F(Cli, StatsMatchesLibrary) {
  const auto trace = small_trace();
  const auto o = cli("stats " + q(trace) + " --bucket 10");
  ASSERT_EQ(o.code, 0);
  EXPECT_EQ(o.out, format_stats(trace_stats(load_trace(trace), 10.0)));
}

TEST_F(Cli, GenWritesLoadableTrace) {
  const auto out = dir_ / "g.csv";
  const auto o = cli("gen --out " + q(out) + " --duration 30 --base-rate 2 --burst 10,5,4 --seed 3");
  ASSERT_EQ(o.code, 0);
  SyntheticParams p;
  p.duration = 30.0;
  p.base_rate = 2.0;
  p.seed = 3;
  p.bursts = {{10.0, 5.0, 4.0}};
  EXPECT_EQ(load_trace(out), gen_synthetic(p));
}

TEST_F(Cli, ErrorsUseDistinctExitCodes) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("run").code, 1);
  EXPECT_EQ(cli("sweep x.jsonl --rates 1,abc").code, 1);
  EXPECT_EQ(cli("stats " + q(dir_ / "missing.jsonl")).code, 2);
  const auto bad = write("bad.jsonl", "{\"arrival_s\": 0}\n");
  EXPECT_EQ(cli("stats " + q(bad)).code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, BundledTraceLoads) {
  const fs::path bundled = fs::path(PDSIM_DATA_DIR) / "bursty.jsonl";
  ASSERT_TRUE(fs::exists(bundled));
  const auto o = cli("stats " + q(bundled));
  ASSERT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("requests"), std::string::npos);
}

}  // namespace
}  // namespace pdsim
