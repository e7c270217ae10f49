/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/instance.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace pdsim {

namespace {

std::string req_str(RequestId id) { return "request " + std::to_string(to_index(id)); }

}  // namespace

void InstanceConfig::validate() const {
  if (chunk_budget < 1) throw std::invalid_argument("chunk_budget must be >= 1");
  if (kv_capacity_tokens < chunk_budget) {
    throw std::invalid_argument("kv_capacity_tokens must be >= chunk_budget");
  }
  if (max_batch_requests < 1) throw std::invalid_argument("max_batch_requests must be >= 1");
  true_decode.validate();
  if (true_prefill.a2 < 0.0 || true_prefill.a1 < 0.0 || true_prefill.a0 < 0.0 ||
      true_prefill.a2 + true_prefill.a1 <= 0.0) {
    throw std::invalid_argument("true prefill cost must be non-negative and grow with length");
  }
}

TokenCount IterationBatch::total_tokens() const {
  TokenCount n = 0;
  for (const auto& e : entries) n += e.tokens;
  return n;
}

TokenCount IterationBatch::decode_tokens() const {
  TokenCount n = 0;
  for (const auto& e : entries) n += e.kind == Phase::kDecode ? e.tokens : 0;
  return n;
}

TokenCount IterationBatch::prefill_tokens() const { return total_tokens() - decode_tokens(); }

void EmissionLog::record(Seconds time, TokenCount tokens, bool chained) {
  Entry entry{time, tokens, std::nullopt};
  if (chained && !entries_.empty()) entry.gap = time - entries_.back().time;
  entries_.push_back(entry);
  while (!entries_.empty() && entries_.front().time < time - retention_) entries_.pop_front();
}

std::optional<Seconds> EmissionLog::average_interval(Seconds window, Seconds now) const {
  const Seconds lo = now - window;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& e : entries_) {
    if (!e.gap || e.time > now) continue;
    if (e.time - *e.gap < lo) continue;
    sum += *e.gap;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

Instance::Instance(InstanceId id, InstanceConfig config)
    : id_(id), config_(config), emissions_(config.emission_retention) {
  config_.validate();
}

void Instance::require_absent(RequestId id) const {
  auto has = [id](const auto& c) {
    return std::any_of(c.begin(), c.end(),
                       [id](const Resident& r) { return r.req.request_id == id; });
  };
  if (has(migration_queue_) || has(migrating_) || has(wait_queue_) || has(running_)) {
    throw std::invalid_argument(req_str(id) + " already queued on instance " +
                                std::to_string(to_index(id_)));
  }
}

bool Instance::contains(RequestId id) const {
  auto has = [id](const auto& c) {
    return std::any_of(c.begin(), c.end(),
                       [id](const Resident& r) { return r.req.request_id == id; });
  };
  return has(migration_queue_) || has(migrating_) || has(wait_queue_) || has(running_) ||
         has(parked_);
}

void Instance::enqueue(const PhaseRequest& request, Seconds /*now*/) {
  require_absent(request.request_id);
  if (request.prompt_len < 1 || request.output_len < 1) {
    throw std::invalid_argument(req_str(request.request_id) + " has non-positive length");
  }

  Resident r;
  r.req = request;
  if (request.phase == Phase::kPrefill) {
    if (auto it = std::find_if(parked_.begin(), parked_.end(),
                               [&](const Resident& p) { return p.req.request_id == request.request_id; });
        it != parked_.end()) {
      throw std::invalid_argument(req_str(request.request_id) + " already prefilled here");
    }
    r.target = request.prompt_len;
    wait_queue_.push_back(r);
    return;
  }

  if (request.tokens_generated < 1) {
    throw std::invalid_argument(req_str(request.request_id) + " decoding before first token");
  }
  r.target = request.prompt_len;
  r.computed = request.prompt_len;

  const bool remote = request.kv_source.has_value() && *request.kv_source != id_;
  if (remote) {
    r.source = *request.kv_source;
    migration_queue_.push_back(r);
    return;
  }

  // Zero-transfer path: the KV cache is already resident from the local prefill.
  auto it = std::find_if(parked_.begin(), parked_.end(), [&](const Resident& p) {
    return p.req.request_id == request.request_id;
  });
  if (it == parked_.end()) {
    throw std::invalid_argument(req_str(request.request_id) +
                                " has no local KV cache to decode from");
  }
  r.kv = it->kv;
  r.req.kv_source.reset();
  parked_.erase(it);
  wait_queue_.push_back(r);
}

std::vector<MigrationStart> Instance::advance_migrations(const TransferParams& transfer,
                                                         Seconds now) {
  std::vector<MigrationStart> started;
  while (!migration_queue_.empty()) {
    Resident& head = migration_queue_.front();
    const TokenCount need = head.req.prompt_len + head.req.tokens_generated;
    if (kv_used_ + need > config_.kv_capacity_tokens) break;
    // Destination buffers are reserved for the whole transfer.
    kv_used_ += need;
    head.kv = need;
    head.migration_finish = now + transfer_time(transfer, head.req.prompt_len);
    started.push_back({head.req.request_id, head.source, now, head.migration_finish});
    migrating_.push_back(head);
    migration_queue_.pop_front();
  }
  return started;
}

void Instance::complete_migration(RequestId request) {
  auto it = std::find_if(migrating_.begin(), migrating_.end(),
                         [&](const Resident& r) { return r.req.request_id == request; });
  if (it == migrating_.end()) throw std::logic_error(req_str(request) + " is not migrating");
  Resident r = *it;
  migrating_.erase(it);
  r.req.kv_source.reset();
  wait_queue_.push_back(r);
}

void Instance::release_parked(RequestId request) {
  auto it = std::find_if(parked_.begin(), parked_.end(),
                         [&](const Resident& r) { return r.req.request_id == request; });
  if (it == parked_.end()) throw std::logic_error(req_str(request) + " has no parked KV");
  kv_used_ -= it->kv;
  parked_.erase(it);
}

IterationBatch Instance::build_iteration_batch() const {
  IterationBatch batch;
  TokenCount budget = config_.chunk_budget;
  TokenCount slots = config_.max_batch_requests;
  TokenCount kv_free = config_.kv_capacity_tokens - kv_used_;

  auto add_decode = [&](const Resident& r) {
    if (!r.decoding() || budget == 0 || slots == 0 || kv_free < 1) return;
    batch.entries.push_back({r.req.request_id, 1, Phase::kDecode});
    --budget;
    --slots;
    --kv_free;
  };
  for (const auto& r : running_) add_decode(r);
  for (const auto& r : wait_queue_) add_decode(r);

  const bool decode_resident =
      std::any_of(running_.begin(), running_.end(), [](const Resident& r) { return r.decoding(); }) ||
      std::any_of(wait_queue_.begin(), wait_queue_.end(),
                  [](const Resident& r) { return r.decoding(); });

  // Prefill-like candidates in FCFS order: already admitted ones first.
  std::vector<const Resident*> candidates;
  for (const auto& r : running_)
    if (r.prefill_like()) candidates.push_back(&r);
  for (const auto& r : wait_queue_)
    if (r.prefill_like()) candidates.push_back(&r);

  if (!decode_resident && !candidates.empty()) {
    const Resident& head = *candidates.front();
    const TokenCount remaining = head.target - head.computed;
    const TokenCount need = remaining + (head.fresh_prefill() ? 1 : 0);
    if (remaining <= budget && need <= kv_free) {
      batch.entries.push_back({head.req.request_id, remaining, Phase::kPrefill});
      batch.dedicated_prefill = true;
      return batch;
    }
  }

  for (const Resident* r : candidates) {
    if (budget == 0 || slots == 0) break;
    const TokenCount remaining = r->target - r->computed;
    TokenCount chunk = std::min(budget, remaining);
    const bool final_extra = r->fresh_prefill() && chunk == remaining;
    if (chunk + (final_extra ? 1 : 0) > kv_free) {
      chunk = std::min(chunk, kv_free);
      if (chunk == remaining && r->fresh_prefill()) chunk = remaining - 1;
    }
    if (chunk < 1) break;  // FCFS: later prompts do not overtake a blocked head
    const bool is_final = chunk == remaining;
    batch.entries.push_back({r->req.request_id, chunk, Phase::kPrefill});
    budget -= chunk;
    --slots;
    kv_free -= chunk + (is_final && r->fresh_prefill() ? 1 : 0);
  }
  return batch;
}

bool Instance::preempt_one() {
  Resident victim;
  if (!running_.empty()) {
    victim = running_.back();
    running_.pop_back();
  } else {
    auto it = std::find_if(wait_queue_.rbegin(), wait_queue_.rend(),
                           [](const Resident& r) { return r.kv > 0; });
    if (it == wait_queue_.rend()) return false;
    victim = *it;
    wait_queue_.erase(std::next(it).base());
  }
  if (victim.kv == 0) {
    wait_queue_.push_front(victim);
    return false;
  }
  kv_used_ -= victim.kv;
  victim.kv = 0;
  victim.computed = 0;
  if (victim.req.phase == Phase::kDecode) {
    victim.recompute = true;
    victim.target = victim.req.prompt_len + victim.req.tokens_generated;
  }
  wait_queue_.push_front(victim);
  ++preemptions_;
  return true;
}

IterationBatch Instance::plan_iteration() {
  if (busy()) return {};
  IterationBatch batch = build_iteration_batch();
  while (batch.empty() && kv_used_ >= config_.kv_capacity_tokens - 1 && preempt_one()) {
    batch = build_iteration_batch();
  }
  return batch;
}

Seconds Instance::iteration_time(const IterationBatch& batch) const {
  if (batch.empty()) throw std::invalid_argument("empty iteration batch");
  const auto& pre = config_.true_prefill;
  const auto& dec = config_.true_decode;

  auto lookup = [this](RequestId id) -> const Resident& {
    for (const auto& r : running_)
      if (r.req.request_id == id) return r;
    for (const auto& r : wait_queue_)
      if (r.req.request_id == id) return r;
    throw std::logic_error(req_str(id) + " is not schedulable here");
  };

  if (batch.dedicated_prefill) {
    const auto& e = batch.entries.front();
    return pre.a0 + marginal_prefill_time(pre, lookup(e.request).computed, e.tokens);
  }
  if (config_.cost_basis == DecodeCostBasis::kBatchTokens) {
    return decode_iter_time(dec, batch.total_tokens());
  }
  Seconds t = dec.b0;
  for (const auto& e : batch.entries) {
    const Resident& r = lookup(e.request);
    if (e.kind == Phase::kDecode) {
      t += dec.b1 * static_cast<double>(r.req.prompt_len + r.req.tokens_generated);
    } else {
      t += marginal_prefill_time(pre, r.computed, e.tokens);
    }
  }
  return t;
}

Seconds Instance::begin_iteration(IterationBatch batch, Seconds now) {
  if (busy()) throw std::logic_error("instance is already running an iteration");
  const Seconds duration = iteration_time(batch);

  for (const auto& e : batch.entries) {
    Resident* r = find_running(e.request);
    if (r == nullptr) {
      auto it = std::find_if(wait_queue_.begin(), wait_queue_.end(),
                             [&](const Resident& w) { return w.req.request_id == e.request; });
      running_.push_back(*it);
      wait_queue_.erase(it);
      r = &running_.back();
    }
    TokenCount reserve = e.tokens;
    if (e.kind == Phase::kPrefill && r->fresh_prefill() && r->computed + e.tokens == r->target) {
      reserve += 1;  // KV slot for the first generated token
    }
    r->kv += reserve;
    kv_used_ += reserve;
  }
  if (kv_used_ > config_.kv_capacity_tokens) {
    throw std::logic_error("iteration overcommits KV capacity on instance " +
                           std::to_string(to_index(id_)));
  }
  in_flight_ = InFlight{std::move(batch), now, now + duration};
  return in_flight_->finish;
}

Instance::Resident* Instance::find_running(RequestId id) {
  for (auto& r : running_)
    if (r.req.request_id == id) return &r;
  return nullptr;
}

IterationResult Instance::complete_iteration() {
  if (!in_flight_) throw std::logic_error("no iteration in flight");
  InFlight flight = std::move(*in_flight_);
  in_flight_.reset();

  IterationResult result;
  result.start = flight.start;
  result.finish = flight.finish;
  TokenCount decode_emitted = 0;
  std::vector<RequestId> leaving;

  for (const auto& e : flight.batch.entries) {
    Resident* r = find_running(e.request);
    if (r == nullptr) throw std::logic_error(req_str(e.request) + " vanished mid-iteration");
    if (e.kind == Phase::kDecode) {
      ++r->req.tokens_generated;
      ++decode_emitted;
      result.emissions.push_back({r->req.request_id, flight.finish, r->req.tokens_generated});
      if (r->req.tokens_generated >= r->req.output_len) {
        kv_used_ -= r->kv;
        r->kv = 0;
        result.completed.push_back(r->req.request_id);
        leaving.push_back(r->req.request_id);
      }
      continue;
    }
    r->computed += e.tokens;
    if (r->computed < r->target) continue;
    if (r->recompute) {
      r->recompute = false;
      continue;
    }
    r->req.tokens_generated = 1;
    result.emissions.push_back({r->req.request_id, flight.finish, 1});
    leaving.push_back(r->req.request_id);
    if (r->req.output_len == 1) {
      kv_used_ -= r->kv;
      r->kv = 0;
      result.completed.push_back(r->req.request_id);
    } else {
      parked_.push_back(*r);
      result.prefill_completed.push_back(r->req.request_id);
    }
  }

  std::erase_if(running_, [&](const Resident& r) {
    return std::find(leaving.begin(), leaving.end(), r.req.request_id) != leaving.end();
  });

  if (decode_emitted > 0) {
    emissions_.record(flight.finish, decode_emitted, decode_chain_);
    decode_chain_ = true;
  }
  const bool still_decoding =
      std::any_of(running_.begin(), running_.end(), [](const Resident& r) { return r.decoding(); });
  if (!still_decoding) decode_chain_ = false;
  return result;
}

IterationResult Instance::execute_iteration(IterationBatch batch, Seconds now) {
  begin_iteration(std::move(batch), now);
  return complete_iteration();
}

std::optional<Seconds> Instance::busy_until() const {
  if (!in_flight_) return std::nullopt;
  return in_flight_->finish;
}

Seconds Instance::predicted_prefill_delay(const PrefillCostParams& predictor, Seconds now) const {
  Seconds delay = 0.0;
  auto in_flight_chunk = [this](RequestId id) -> TokenCount {
    if (!in_flight_) return 0;
    for (const auto& e : in_flight_->batch.entries)
      if (e.request == id && e.kind == Phase::kPrefill) return e.tokens;
    return 0;
  };

  if (in_flight_) {
    Seconds predicted = 0.0;
    bool any = false;
    for (const auto& e : in_flight_->batch.entries) {
      if (e.kind != Phase::kPrefill) continue;
      const Resident* r = nullptr;
      for (const auto& x : running_)
        if (x.req.request_id == e.request) r = &x;
      if (r == nullptr || !r->fresh_prefill()) continue;
      predicted += predict_prefill_time(predictor, e.tokens);
      any = true;
    }
    if (any) delay += std::max(0.0, in_flight_->start + predicted - now);
  }

  auto add_queued = [&](const Resident& r) {
    if (!r.fresh_prefill()) return;
    const TokenCount remaining = r.target - r.computed - in_flight_chunk(r.req.request_id);
    if (remaining > 0) delay += predict_prefill_time(predictor, remaining);
  };
  for (const auto& r : running_) add_queued(r);
  for (const auto& r : wait_queue_) add_queued(r);
  return delay;
}

TokenCount Instance::running_tokens() const {
  TokenCount total = 0;
  auto add = [&total](const Resident& r) {
    if (r.decoding()) total += r.req.prompt_len + r.req.tokens_generated;
  };
  for (const auto& r : running_) add(r);
  for (const auto& r : wait_queue_) add(r);
  for (const auto& r : migrating_) add(r);
  return total;
}

TokenCount Instance::kv_resident_sum() const {
  TokenCount total = 0;
  for (const auto& r : migrating_) total += r.kv;
  for (const auto& r : wait_queue_) total += r.kv;
  for (const auto& r : running_) total += r.kv;
  for (const auto& r : parked_) total += r.kv;
  return total;
}

TokenCount Instance::decode_kv() const {
  TokenCount total = 0;
  auto add = [&total](const Resident& r) {
    if (r.decoding()) total += r.kv;
  };
  for (const auto& r : running_) add(r);
  for (const auto& r : wait_queue_) add(r);
  for (const auto& r : migrating_) add(r);
  return total;
}

bool Instance::has_prefill_work() const {
  auto pre = [](const Resident& r) { return r.fresh_prefill(); };
  return std::any_of(running_.begin(), running_.end(), pre) ||
         std::any_of(wait_queue_.begin(), wait_queue_.end(), pre);
}

bool Instance::has_decode_work() const {
  auto dec = [](const Resident& r) { return r.req.phase == Phase::kDecode; };
  return !migration_queue_.empty() || !migrating_.empty() ||
         std::any_of(running_.begin(), running_.end(), dec) ||
         std::any_of(wait_queue_.begin(), wait_queue_.end(), dec);
}

bool Instance::has_any_work() const {
  return !migration_queue_.empty() || !migrating_.empty() || !wait_queue_.empty() ||
         !running_.empty() || busy();
}

std::size_t Instance::prefill_request_count() const {
  std::size_t n = 0;
  for (const auto& r : running_) n += r.fresh_prefill() ? 1 : 0;
  for (const auto& r : wait_queue_) n += r.fresh_prefill() ? 1 : 0;
  return n;
}

std::size_t Instance::decode_request_count() const {
  std::size_t n = migration_queue_.size() + migrating_.size();
  for (const auto& r : running_) n += r.req.phase == Phase::kDecode ? 1 : 0;
  for (const auto& r : wait_queue_) n += r.req.phase == Phase::kDecode ? 1 : 0;
  return n;
}

}  // namespace pdsim
