/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/instance.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <stdexcept>

namespace pdsim {
namespace {

constexpr InstanceId kSelf{0};
constexpr InstanceId kOther{1};

InstanceConfig small_config() {
  InstanceConfig c;
  c.kv_capacity_tokens = 100000;
  c.chunk_budget = 512;
  c.true_prefill = {1e-8, 1e-4, 5e-3};
  c.true_decode = {1e-6, 5e-3};
  return c;
}

PhaseRequest prefill(std::uint32_t id, TokenCount prompt, TokenCount output = 4) {
  PhaseRequest r;
  r.request_id = RequestId{id};
  r.phase = Phase::kPrefill;
  r.prompt_len = prompt;
  r.output_len = output;
  return r;
}

PhaseRequest remote_decode(std::uint32_t id, TokenCount prompt, TokenCount output,
                           TokenCount generated = 1) {
  PhaseRequest r;
  r.request_id = RequestId{id};
  r.phase = Phase::kDecode;
  r.prompt_len = prompt;
  r.output_len = output;
  r.tokens_generated = generated;
  r.kv_source = kOther;
  return r;
}

// Pulls every queued migration in and lands it in the wait queue.
void land_migrations(Instance& inst, Seconds now = 0.0) {
  for (const auto& m : inst.advance_migrations(TransferParams{}, now)) {
    inst.complete_migration(m.request);
  }
}

TEST(InstanceEnqueue, RoutesByPhaseAndKvLocation) {
  Instance inst(kSelf, small_config());
  inst.enqueue(prefill(1, 100), 0.0);
  EXPECT_EQ(inst.wait_queue_len(), 1u);
  EXPECT_EQ(inst.migration_queue_len(), 0u);

  inst.enqueue(remote_decode(2, 100, 4), 0.0);
  EXPECT_EQ(inst.migration_queue_len(), 1u);
  EXPECT_EQ(inst.wait_queue_len(), 1u);
}

TEST(InstanceEnqueue, LocalDecodeSkipsMigration) {
  Instance inst(kSelf, small_config());
  inst.enqueue(prefill(1, 100, 4), 0.0);
  const auto res = inst.execute_iteration(inst.plan_iteration(), 0.0);
  ASSERT_EQ(res.prefill_completed.size(), 1u);
  EXPECT_EQ(inst.parked_len(), 1u);

  PhaseRequest local = remote_decode(1, 100, 4);
  local.kv_source.reset();
  inst.enqueue(local, res.finish);
  EXPECT_EQ(inst.migration_queue_len(), 0u);
  EXPECT_EQ(inst.wait_queue_len(), 1u);
  EXPECT_EQ(inst.parked_len(), 0u);
  EXPECT_EQ(inst.kv_used(), 101);
}

TEST(InstanceEnqueue, RejectsDuplicates) {
  Instance inst(kSelf, small_config());
  inst.enqueue(prefill(1, 100), 0.0);
  EXPECT_THROW(inst.enqueue(prefill(1, 100), 0.0), std::invalid_argument);
  EXPECT_THROW(inst.enqueue(remote_decode(1, 100, 4), 0.0), std::invalid_argument);
}

TEST(InstanceMigration, EmptyQueueStartsNothing) {
  Instance inst(kSelf, small_config());
  EXPECT_TRUE(inst.advance_migrations(TransferParams{}, 0.0).empty());
}

TEST(InstanceMigration, CompletesAfterTransferTime) {
  Instance inst(kSelf, small_config());
  inst.enqueue(remote_decode(3, 1000, 4), 2.0);
  const TransferParams t{131072.0, 5e10, 1e-3};
  const auto started = inst.advance_migrations(t, 2.0);
  ASSERT_EQ(started.size(), 1u);
  EXPECT_EQ(started[0].source, kOther);
  EXPECT_DOUBLE_EQ(started[0].finish, 2.0 + transfer_time(t, 1000));
}

TEST(InstanceMigration, SecondWaitsForMemory) {
  InstanceConfig c = small_config();
  c.kv_capacity_tokens = 1000;
  Instance inst(kSelf, c);
  inst.enqueue(remote_decode(1, 900, 2), 0.0);
  inst.enqueue(remote_decode(2, 500, 2), 0.0);

  auto started = inst.advance_migrations(TransferParams{}, 0.0);
  ASSERT_EQ(started.size(), 1u);
  EXPECT_EQ(started[0].request, RequestId{1});
  EXPECT_TRUE(inst.advance_migrations(TransferParams{}, 0.1).empty());

  inst.complete_migration(RequestId{1});
  const auto res = inst.execute_iteration(inst.plan_iteration(), 0.2);
  ASSERT_EQ(res.completed.size(), 1u);
  EXPECT_EQ(inst.kv_used(), 0);

  started = inst.advance_migrations(TransferParams{}, res.finish);
  ASSERT_EQ(started.size(), 1u);
  EXPECT_EQ(started[0].request, RequestId{2});
  EXPECT_DOUBLE_EQ(started[0].start, res.finish);
}

TEST(InstanceMigration, StartsInFifoOrder) {
  Instance inst(kSelf, small_config());
  for (std::uint32_t id : {7u, 3u, 9u, 1u}) inst.enqueue(remote_decode(id, 200 + id, 3), 0.0);
  const auto started = inst.advance_migrations(TransferParams{}, 0.0);
  ASSERT_EQ(started.size(), 4u);
  EXPECT_EQ(started[0].request, RequestId{7});
  EXPECT_EQ(started[1].request, RequestId{3});
  EXPECT_EQ(started[2].request, RequestId{9});
  EXPECT_EQ(started[3].request, RequestId{1});
}

TEST(InstanceBatch, DecodeFirstThenPrefillInRemainingBudget) {
  Instance inst(kSelf, small_config());
  for (std::uint32_t id = 1; id <= 3; ++id) inst.enqueue(remote_decode(id, 100, 10), 0.0);
  land_migrations(inst);
  inst.enqueue(prefill(10, 2000), 0.0);

  const auto batch = inst.build_iteration_batch();
  EXPECT_EQ(batch.decode_tokens(), 3);
  EXPECT_EQ(batch.prefill_tokens(), 509);
  EXPECT_FALSE(batch.dedicated_prefill);
}

TEST(InstanceBatch, LongPromptIsChunked) {
  Instance inst(kSelf, small_config());
  inst.enqueue(prefill(1, 2000), 0.0);
  std::vector<TokenCount> chunks;
  Seconds now = 0.0;
  for (int i = 0; i < 4; ++i) {
    auto batch = inst.plan_iteration();
    ASSERT_EQ(batch.entries.size(), 1u);
    chunks.push_back(batch.entries[0].tokens);
    now = inst.execute_iteration(std::move(batch), now).finish;
  }
  EXPECT_EQ(chunks, (std::vector<TokenCount>{512, 512, 512, 464}));
  EXPECT_FALSE(inst.has_prefill_work());
}

TEST(InstanceBatch, DecodeCanSaturateBudget) {
  InstanceConfig c = small_config();
  c.chunk_budget = 4;
  Instance inst(kSelf, c);
  for (std::uint32_t id = 1; id <= 4; ++id) inst.enqueue(remote_decode(id, 50, 10), 0.0);
  land_migrations(inst);
  inst.enqueue(prefill(9, 100), 0.0);
  const auto batch = inst.build_iteration_batch();
  EXPECT_EQ(batch.decode_tokens(), 4);
  EXPECT_EQ(batch.prefill_tokens(), 0);
}

TEST(InstanceBatch, RespectsRequestLimit) {
  InstanceConfig c = small_config();
  c.max_batch_requests = 2;
  Instance inst(kSelf, c);
  for (std::uint32_t id = 1; id <= 5; ++id) inst.enqueue(remote_decode(id, 50, 10), 0.0);
  land_migrations(inst);
  EXPECT_EQ(inst.build_iteration_batch().decode_tokens(), 2);
}

TEST(InstanceIteration, BatchTokenBasisCostsOneTokenPerDecode) {
  InstanceConfig c = small_config();
  c.cost_basis = DecodeCostBasis::kBatchTokens;
  Instance inst(kSelf, c);
  inst.enqueue(remote_decode(1, 100, 5), 0.0);
  inst.enqueue(remote_decode(2, 200, 5), 0.0);
  land_migrations(inst);
  const auto res = inst.execute_iteration(inst.plan_iteration(), 1.0);
  EXPECT_NEAR(res.finish - res.start, c.true_decode.b1 * 2 + c.true_decode.b0, 1e-15);
  EXPECT_EQ(res.emissions.size(), 2u);
}

TEST(InstanceIteration, ContextBasisCostsResidentContext) {
  const InstanceConfig c = small_config();
  Instance inst(kSelf, c);
  inst.enqueue(remote_decode(1, 100, 5), 0.0);
  inst.enqueue(remote_decode(2, 200, 5), 0.0);
  land_migrations(inst);
  const auto res = inst.execute_iteration(inst.plan_iteration(), 1.0);
  // Contexts are prompt + the one token generated during prefill.
  EXPECT_NEAR(res.finish - res.start, c.true_decode.b0 + c.true_decode.b1 * (101 + 201), 1e-15);
}

TEST(InstanceIteration, DedicatedPrefillUsesQuadraticCost) {
  const InstanceConfig c = small_config();
  Instance inst(kSelf, c);
  inst.enqueue(prefill(1, 300), 0.0);
  const auto batch = inst.plan_iteration();
  EXPECT_TRUE(batch.dedicated_prefill);
  const auto res = inst.execute_iteration(batch, 0.5);
  EXPECT_NEAR(res.finish - 0.5, predict_prefill_time(c.true_prefill, 300), 1e-15);
}

TEST(InstanceIteration, FinalChunkEmitsExactlyOneFirstToken) {
  Instance inst(kSelf, small_config());
  inst.enqueue(prefill(1, 1100, 3), 0.0);
  Seconds now = 0.0;
  int first_tokens = 0;
  for (int i = 0; i < 3; ++i) {
    const auto res = inst.execute_iteration(inst.plan_iteration(), now);
    now = res.finish;
    for (const auto& e : res.emissions) {
      EXPECT_EQ(e.index, 1);
      ++first_tokens;
    }
    EXPECT_EQ(res.prefill_completed.size(), i == 2 ? 1u : 0u);
  }
  EXPECT_EQ(first_tokens, 1);
}

TEST(InstanceIteration, SingleTokenOutputCompletesAtPrefill) {
  Instance inst(kSelf, small_config());
  inst.enqueue(prefill(1, 50, 1), 0.0);
  const auto res = inst.execute_iteration(inst.plan_iteration(), 0.0);
  ASSERT_EQ(res.completed.size(), 1u);
  EXPECT_TRUE(res.prefill_completed.empty());
  EXPECT_EQ(inst.kv_used(), 0);
  EXPECT_FALSE(inst.has_any_work());
}

TEST(InstanceIteration, DecodeRunsToCompletionAndFreesMemory) {
  Instance inst(kSelf, small_config());
  inst.enqueue(remote_decode(1, 100, 4), 0.0);
  land_migrations(inst);
  Seconds now = 0.0;
  int emitted = 0;
  while (inst.has_any_work()) {
    const auto res = inst.execute_iteration(inst.plan_iteration(), now);
    now = res.finish;
    emitted += static_cast<int>(res.emissions.size());
    EXPECT_EQ(inst.kv_used(), inst.kv_resident_sum());
  }
  EXPECT_EQ(emitted, 3);
  EXPECT_EQ(inst.kv_used(), 0);
}

TEST(InstanceIteration, PreemptsUnderMemoryPressureAndStillFinishes) {
  InstanceConfig c = small_config();
  c.kv_capacity_tokens = 1200;
  Instance inst(kSelf, c);
  inst.enqueue(remote_decode(1, 500, 150), 0.0);
  inst.enqueue(remote_decode(2, 500, 150), 0.0);
  land_migrations(inst);
  Seconds now = 0.0;
  std::size_t done = 0;
  for (int guard = 0; guard < 10000 && inst.has_any_work(); ++guard) {
    auto batch = inst.plan_iteration();
    ASSERT_FALSE(batch.empty());
    const auto res = inst.execute_iteration(std::move(batch), now);
    now = res.finish;
    done += res.completed.size();
    ASSERT_LE(inst.kv_used(), c.kv_capacity_tokens);
    ASSERT_EQ(inst.kv_used(), inst.kv_resident_sum());
  }
  EXPECT_EQ(done, 2u);
  EXPECT_GE(inst.preemptions(), 1u);
  EXPECT_EQ(inst.kv_used(), 0);
}

TEST(InstanceLoad, PredictedDelaySumsQueuedPrompts) {
  Instance inst(kSelf, small_config());
  const PrefillCostParams predictor{0.0, 1e-3, 0.0};
  EXPECT_EQ(inst.predicted_prefill_delay(predictor, 0.0), 0.0);
  inst.enqueue(prefill(1, 200), 0.0);
  inst.enqueue(prefill(2, 300), 0.0);
  EXPECT_NEAR(inst.predicted_prefill_delay(predictor, 0.0), 0.5, 1e-12);
}

TEST(InstanceLoad, PredictedDelayMatchesIndependentFold) {
  const PrefillCostParams predictor{3e-9, 7e-5, 2e-2};
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<TokenCount> len(1, 3000);
  std::uniform_int_distribution<int> count(1, 8);
  std::uniform_int_distribution<int> steps(0, 5);
  for (int trial = 0; trial < 100; ++trial) {
    Instance inst(kSelf, small_config());
    std::vector<TokenCount> remaining;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      remaining.push_back(len(rng));
      inst.enqueue(prefill(static_cast<std::uint32_t>(i), remaining.back()), 0.0);
    }
    // Without decode residents each iteration advances only the head prompt.
    Seconds now = 0.0;
    const int k = steps(rng);
    for (int s = 0; s < k && !remaining.empty(); ++s) {
      now = inst.execute_iteration(inst.plan_iteration(), now).finish;
      remaining.front() -= std::min<TokenCount>(512, remaining.front());
      if (remaining.front() == 0) remaining.erase(remaining.begin());
    }
    double oracle = 0.0;
    for (TokenCount r : remaining) oracle += predict_prefill_time(predictor, r);
    EXPECT_NEAR(inst.predicted_prefill_delay(predictor, now), oracle, 1e-9);
  }
}

TEST(InstanceLoad, PredictedDelayCountsInFlightRemainder) {
  Instance inst(kSelf, small_config());
  const PrefillCostParams predictor{0.0, 1e-3, 0.0};
  inst.enqueue(prefill(1, 400), 0.0);
  inst.begin_iteration(inst.plan_iteration(), 1.0);
  EXPECT_NEAR(inst.predicted_prefill_delay(predictor, 1.1), 0.3, 1e-12);
  EXPECT_NEAR(inst.predicted_prefill_delay(predictor, 2.0), 0.0, 1e-12);
}

TEST(InstanceLoad, RunningTokensCountsDecodeContext) {
  Instance inst(kSelf, small_config());
  EXPECT_EQ(inst.running_tokens(), 0);
  inst.enqueue(remote_decode(1, 100, 20, 10), 0.0);
  land_migrations(inst);
  EXPECT_EQ(inst.running_tokens(), 110);
  EXPECT_EQ(inst.running_tokens(), inst.decode_kv());
  inst.enqueue(prefill(2, 700), 0.0);
  EXPECT_EQ(inst.running_tokens(), 110);
}

TEST(InstanceLoad, RunningTokensTracksDecodeMemoryOverIterations) {
  Instance inst(kSelf, small_config());
  for (std::uint32_t id = 1; id <= 3; ++id) inst.enqueue(remote_decode(id, 100 * id, 6), 0.0);
  land_migrations(inst);
  Seconds now = 0.0;
  while (inst.has_any_work()) {
    now = inst.execute_iteration(inst.plan_iteration(), now).finish;
    EXPECT_EQ(inst.running_tokens(), inst.decode_kv());
  }
}

TEST(EmissionLog, AveragesGapsInsideWindow) {
  EmissionLog log;
  log.record(1.0, 1, false);
  log.record(1.1, 1, true);
  log.record(1.3, 1, true);
  ASSERT_TRUE(log.average_interval(10.0, 1.3).has_value());
  EXPECT_NEAR(*log.average_interval(10.0, 1.3), 0.15, 1e-12);
}

TEST(EmissionLog, SingleEmissionHasNoInterval) {
  EmissionLog log;
  log.record(1.0, 1, false);
  EXPECT_FALSE(log.average_interval(10.0, 1.0).has_value());
}

TEST(EmissionLog, UnchainedEmissionStartsFreshStream) {
  EmissionLog log;
  log.record(1.0, 1, false);
  log.record(1.1, 1, true);
  log.record(9.0, 1, false);
  log.record(9.2, 1, true);
  EXPECT_NEAR(*log.average_interval(100.0, 9.2), 0.15, 1e-12);
}

TEST(EmissionLog, SlidingWindowMatchesFullLogRecomputation) {
  std::mt19937_64 rng(23);
  std::exponential_distribution<double> gap(10.0);
  std::bernoulli_distribution chained(0.9);
  EmissionLog log(1e9);
  std::vector<std::pair<double, bool>> full;
  double t = 0.0;
  for (int i = 0; i < 500; ++i) {
    t += gap(rng) + 1e-4;
    const bool c = i > 0 && chained(rng);
    log.record(t, 1, c);
    full.emplace_back(t, c);
  }
  for (double window : {0.5, 2.0, 7.5}) {
    for (double now = 1.0; now < t; now += 0.9) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t i = 1; i < full.size(); ++i) {
        if (!full[i].second) continue;
        if (full[i].first > now || full[i - 1].first < now - window) continue;
        sum += full[i].first - full[i - 1].first;
        ++n;
      }
      const auto got = log.average_interval(window, now);
      if (n == 0) {
        EXPECT_FALSE(got.has_value());
      } else {
        ASSERT_TRUE(got.has_value());
        EXPECT_NEAR(*got, sum / n, 1e-12);
      }
    }
  }
}

}  // namespace
}  // namespace pdsim
