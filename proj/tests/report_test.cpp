/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/report.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <random>

#include "support.hpp"

namespace pdsim {
namespace {

RequestRecord rec(std::uint32_t id, Seconds arrival, Seconds ttft, Seconds tpot, bool ok) {
  RequestRecord r;
  r.request_id = RequestId{id};
  r.arrival = arrival;
  r.ttft = ttft;
  r.tpot = tpot;
  r.first_token_time = arrival + ttft;
  r.token_times = {arrival + ttft, arrival + ttft + tpot};
  r.ttft_ok = ok;
  r.tpot_ok = true;
  r.slo_ok = ok;
  return r;
}

TEST(ComputeMetrics, AttainmentAndPercentiles) {
  std::vector<RequestRecord> records;
  for (std::uint32_t i = 1; i <= 10; ++i) {
    records.push_back(rec(i, i - 1.0, static_cast<double>(i), 0.01 * i, i != 10));
  }
  const auto s = compute_metrics(records);
  EXPECT_EQ(s.requests, 10u);
  EXPECT_DOUBLE_EQ(s.attainment, 0.9);
  EXPECT_DOUBLE_EQ(s.p90_ttft, 9.0);
  EXPECT_DOUBLE_EQ(s.p90_tpot, 0.09);
  EXPECT_DOUBLE_EQ(s.mean_ttft, 5.5);
  // Last completion: arrival 9 + ttft 10 + tpot 0.1.
  EXPECT_NEAR(s.goodput, 9.0 / 19.1, 1e-12);
  EXPECT_THROW(compute_metrics(std::vector<RequestRecord>{}), std::invalid_argument);
}

TEST(ComputeMetrics, AttainmentMatchesManualCount) {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution ok(0.73);
  std::vector<RequestRecord> records;
  std::size_t good = 0;
  for (std::uint32_t i = 0; i < 777; ++i) {
    const bool o = ok(rng);
    good += o ? 1 : 0;
    records.push_back(rec(i, i * 0.1, 1.0, 0.05, o));
  }
  EXPECT_DOUBLE_EQ(compute_metrics(records).attainment,
                   static_cast<double>(good) / static_cast<double>(records.size()));
}

TEST(MaxRateMeeting, ScansWholeGrid) {
  const std::vector<double> rates{5, 10, 15, 20};
  EXPECT_EQ(max_rate_meeting(rates, std::vector<double>{0.99, 0.95, 0.91, 0.5}, 0.9), 15.0);
  EXPECT_FALSE(max_rate_meeting(rates, std::vector<double>{0.8, 0.7, 0.6, 0.5}, 0.9));
  EXPECT_EQ(max_rate_meeting(rates, std::vector<double>{0.95, 0.85, 0.95, 0.5}, 0.9), 15.0);
  EXPECT_THROW(max_rate_meeting(rates, std::vector<double>{1.0}, 0.9), std::invalid_argument);
}

TEST(NativeRate, RequestsOverArrivalSpan) {
  const std::vector<TraceRequest> t{{RequestId{0}, 1.0, 1, 1}, {RequestId{1}, 3.0, 1, 1},
                                    {RequestId{2}, 5.0, 1, 1}};
  EXPECT_DOUBLE_EQ(native_rate(t), 0.75);
  EXPECT_THROW(native_rate(std::span(t).first(1)), std::invalid_argument);
}

TEST(SweepMaxRate, AttainmentFallsAsRateRises) {
  const auto trace = gen_synthetic(testing::bursty_params(2.0, 60.0, 11));
  RunConfig c;
  const std::vector<double> rates{1.0, 4.0, 16.0, 64.0};
  const auto res = sweep_max_rate(trace, c, rates);
  ASSERT_EQ(res.points.size(), 4u);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    EXPECT_DOUBLE_EQ(res.points[i].rate, rates[i]);
    EXPECT_NEAR(res.points[i].scale * rates[i], native_rate(trace), 1e-9);
    EXPECT_EQ(res.points[i].summary.requests, trace.size());
  }
  EXPECT_GE(res.points.front().summary.attainment, res.points.back().summary.attainment);
  EXPECT_LT(res.points.back().summary.attainment, 0.9);
  std::vector<double> att;
  for (const auto& p : res.points) att.push_back(p.summary.attainment);
  EXPECT_EQ(res.max_rate, max_rate_meeting(rates, att, c.slo.attainment_target));
  EXPECT_THROW(sweep_max_rate(trace, c, std::vector<double>{4.0, 1.0}), std::invalid_argument);
}

TEST(RecordsCsv, RoundTrips) {
  std::vector<RequestRecord> records{rec(0, 0.1, 0.25, 0.03125, true),
                                     rec(5, 1.0 / 3.0, 2.5e-3, 0.0, false)};
  const std::string text = records_csv(records);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "request_id,arrival_s,ttft_s,tpot_s,ttft_ok,tpot_ok,slo_ok");
  const auto back = parse_records_csv(text);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].request_id, records[i].request_id);
    EXPECT_EQ(back[i].arrival, records[i].arrival);
    EXPECT_EQ(back[i].ttft, records[i].ttft);
    EXPECT_EQ(back[i].tpot, records[i].tpot);
    EXPECT_EQ(back[i].slo_ok, records[i].slo_ok);
  }
  EXPECT_EQ(records_csv(back), text);
  EXPECT_THROW(parse_records_csv("bad header\n"), std::invalid_argument);
  EXPECT_THROW(parse_records_csv(text + "1,2,3\n"), std::invalid_argument);
}

TEST(SummaryJson, SixMetricsPlusCount) {
  Summary s;
  s.requests = 3;
  s.attainment = 0.5;
  const auto j = nlohmann::json::parse(summary_json(s));
  for (const char* key :
       {"requests", "attainment", "p90_ttft", "p90_tpot", "mean_ttft", "mean_tpot", "goodput"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["attainment"], 0.5);
  const auto empty = nlohmann::json::parse(summary_json(std::nullopt));
  EXPECT_EQ(empty["requests"], 0);
  EXPECT_TRUE(empty["attainment"].is_null());
}

TEST(MonitorCsv, HeaderEvenWhenEmpty) {
  const std::string text = monitor_csv({});
  EXPECT_EQ(text,
            "time,instance_id,pool,running_tokens,kv_used,queue_len,pred_delay,avg_interval,"
            "prefill_requests,decode_requests\n");
  MonitorSnapshot snap;
  snap.time = 2.0;
  snap.instances.push_back({InstanceId{3}, PoolKind::kPtoD, 110, 120, 2, 0.5, 0.04, 1, 3});
  snap.instances.push_back({InstanceId{4}, PoolKind::kDecode, 0, 0, 0, 0.0, std::nullopt, 0, 0});
  const std::string rows = monitor_csv(std::vector<MonitorSnapshot>{snap});
  EXPECT_NE(rows.find("2,3,p2d,110,120,2,0.5,0.04,1,3\n"), std::string::npos);
  EXPECT_NE(rows.find("2,4,decode,0,0,0,0,,0,0\n"), std::string::npos);
}

TEST(DecisionsJsonl, OneObjectPerLine) {
  std::vector<Decision> d{
      {1.5, DecisionKind::kPrefillDispatch, RequestId{2}, InstanceId{0}, "alg1:t1", std::nullopt,
       PoolKind::kPrefill},
      {2.0, DecisionKind::kFlip, std::nullopt, InstanceId{3}, "alg3", PoolKind::kDecode,
       PoolKind::kDtoP}};
  const std::string text = decisions_jsonl(d);
  const auto nl = text.find('\n');
  const auto first = nlohmann::json::parse(text.substr(0, nl));
  const auto second = nlohmann::json::parse(text.substr(nl + 1));
  EXPECT_EQ(first["request"], 2);
  EXPECT_EQ(first["kind"], "prefill");
  EXPECT_TRUE(second["request"].is_null());
  EXPECT_EQ(second["from"], "decode");
  EXPECT_EQ(second["to"], "d2p");
}

}  // namespace
}  // namespace pdsim
