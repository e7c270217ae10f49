/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/engine.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>

namespace pdsim {

namespace {

int rank(EventKind kind) { return static_cast<int>(kind); }

std::vector<Instance> make_instances(const RunConfig& config) {
  std::vector<Instance> out;
  out.reserve(config.instances);
  for (std::size_t i = 0; i < config.instances; ++i) {
    out.emplace_back(InstanceId{static_cast<std::uint32_t>(i)}, config.instance);
  }
  return out;
}

const RunConfig& validated(const RunConfig& config) {
  config.validate();
  return config;
}

}  // namespace

bool event_after(const Event& a, const Event& b) {
  if (a.time != b.time) return a.time > b.time;
  if (a.kind != b.kind) return rank(a.kind) > rank(b.kind);
  return a.seq > b.seq;
}

PrefillCostParams profile_predictor(const RunConfig& config) {
  std::mt19937_64 rng(config.seed);
  const auto grid = profiling_grid(config.max_context, config.profiling_points);
  const auto samples =
      profile_prefill(config.instance.true_prefill, grid, config.profiling_noise, rng);
  return fit_quadratic(samples);
}

class Simulator::View final : public LoadView {
 public:
  explicit View(const Simulator& sim) : sim_(sim) {}

  Seconds predicted_prefill_delay(InstanceId id) const override {
    return at(id).predicted_prefill_delay(sim_.predictor_, sim_.now_);
  }
  TokenCount running_tokens(InstanceId id) const override { return at(id).running_tokens(); }
  std::optional<Seconds> avg_token_interval(InstanceId id) const override {
    return at(id).avg_token_interval(sim_.config_.interval_window, sim_.now_);
  }
  bool has_prefill_work(InstanceId id) const override { return at(id).has_prefill_work(); }
  bool has_decode_work(InstanceId id) const override { return at(id).has_decode_work(); }

 private:
  const Instance& at(InstanceId id) const { return sim_.instances_.at(to_index(id)); }
  const Simulator& sim_;
};

Simulator::Simulator(std::vector<TraceRequest> trace, RunConfig config)
    : config_(validated(config)),
      trace_(std::move(trace)),
      predictor_(profile_predictor(config_)),
      max_running_tokens_(max_running_tokens(config_.instance.true_decode,
                                             config_.instance.kv_capacity_tokens,
                                             config_.slo.tpot_slo)),
      instances_(make_instances(config_)),
      scheduler_(config_.scheduler, config_.slo, PoolSet(config_.init_prefill, config_.init_decode),
                 predictor_, max_running_tokens_, config_.monitor_period),
      dirty_(config_.instances, false) {
  for (std::size_t i = 0; i < trace_.size(); ++i) {
    const auto& r = trace_[i];
    const std::string where = "trace request " + std::to_string(to_index(r.id));
    if (i > 0 && !trace_order(trace_[i - 1], r)) {
      throw std::invalid_argument(where + " is out of order");
    }
    if (r.arrival < 0.0) throw std::invalid_argument(where + " arrives before time 0");
    if (r.input_len < 1 || r.output_len < 1) {
      throw std::invalid_argument(where + " has a non-positive length");
    }
    if (r.input_len + r.output_len > config_.instance.kv_capacity_tokens) {
      throw std::invalid_argument(where + " cannot fit in one instance's KV capacity");
    }
    if (!index_.emplace(to_index(r.id), i).second) {
      throw std::invalid_argument(where + " has a duplicate id");
    }
  }
  token_times_.resize(trace_.size());
  prefill_instance_.resize(trace_.size());
  kv_source_.resize(trace_.size());
  records_.resize(trace_.size());

  for (const auto& r : trace_) push(r.arrival, EventKind::kArrival, {}, r.id);
  if (!trace_.empty()) push(config_.monitor_period, EventKind::kMonitorTick);
}

std::size_t Simulator::index_of(RequestId id) const { return index_.at(to_index(id)); }

void Simulator::push(Seconds time, EventKind kind, InstanceId instance, RequestId request) {
  if (time < now_) throw std::logic_error("event scheduled in the past");
  if (kind != EventKind::kMonitorTick) ++pending_work_;
  queue_.push(Event{time, next_seq_++, kind, instance, request});
}

bool Simulator::any_dirty() const {
  return flush_pending_ || std::find(dirty_.begin(), dirty_.end(), true) != dirty_.end();
}

bool Simulator::finished() const { return queue_.empty() && !any_dirty(); }

bool Simulator::step() {
  if (any_dirty() && (queue_.empty() || queue_.top().time > now_)) {
    flush();
    // Only monitor ticks left while requests are unfinished: nothing can ever move again.
    if (pending_work_ == 0 && completed_ != trace_.size()) {
      throw std::runtime_error("simulation stalled at t=" + format_double(now_) + " with " +
                               std::to_string(trace_.size() - completed_) +
                               " unfinished requests");
    }
    return true;
  }
  if (queue_.empty()) {
    if (completed_ != trace_.size()) {
      throw std::runtime_error("simulation stalled at t=" + format_double(now_) + " with " +
                               std::to_string(trace_.size() - completed_) +
                               " unfinished requests");
    }
    return false;
  }
  const Event event = queue_.top();
  queue_.pop();
  now_ = event.time;
  ++events_processed_;
  if (event.kind != EventKind::kMonitorTick) --pending_work_;
  const std::uint64_t before = tokens_emitted_;
  handle(event);
  const bool progress = event.kind == EventKind::kArrival ||
                        event.kind == EventKind::kMigrationComplete || tokens_emitted_ != before;
  idle_events_ = progress ? 0 : idle_events_ + 1;
  if (idle_events_ > config_.watchdog_events) {
    throw std::runtime_error("watchdog: " + std::to_string(idle_events_) +
                             " events without progress at t=" + format_double(now_));
  }
  return true;
}

void Simulator::handle(const Event& event) {
  switch (event.kind) {
    case EventKind::kArrival:
      on_arrival(event);
      break;
    case EventKind::kIterationComplete:
      on_iteration_complete(event);
      break;
    case EventKind::kPrefillComplete:
      on_prefill_complete(event);
      break;
    case EventKind::kMigrationComplete:
      on_migration_complete(event);
      break;
    case EventKind::kMonitorTick:
      on_monitor_tick(event);
      break;
  }
}

void Simulator::on_arrival(const Event& event) {
  const std::size_t idx = index_of(event.request);
  const TraceRequest& r = trace_[idx];
  const View view(*this);
  const InstanceId target = scheduler_.schedule_prefill(r, view, now_);
  prefill_instance_[idx] = target;
  PhaseRequest pr;
  pr.request_id = r.id;
  pr.phase = Phase::kPrefill;
  pr.prompt_len = r.input_len;
  pr.output_len = r.output_len;
  instances_[to_index(target)].enqueue(pr, now_);
  mark_dirty(target);
  flush_pending_ = true;  // a flip may need settling
}

void Simulator::on_iteration_complete(const Event& event) {
  Instance& inst = instances_[to_index(event.instance)];
  const IterationResult res = inst.complete_iteration();
  for (const auto& e : res.emissions) {
    auto& times = token_times_[index_of(e.request)];
    if (static_cast<TokenCount>(times.size()) + 1 != e.index) {
      throw std::logic_error("token emitted out of sequence");
    }
    times.push_back(e.time);
    ++tokens_emitted_;
  }
  for (RequestId id : res.prefill_completed) {
    push(now_, EventKind::kPrefillComplete, event.instance, id);
  }
  for (RequestId id : res.completed) {
    const std::size_t idx = index_of(id);
    records_[idx] = make_record(trace_[idx], token_times_[idx], config_.slo);
    ++completed_;
  }
  mark_dirty(event.instance);
}

void Simulator::on_prefill_complete(const Event& event) {
  const std::size_t idx = index_of(event.request);
  const TraceRequest& r = trace_[idx];
  const View view(*this);
  const InstanceId target = scheduler_.schedule_decode(r.id, event.instance, view, now_);
  PhaseRequest pr;
  pr.request_id = r.id;
  pr.phase = Phase::kDecode;
  pr.prompt_len = r.input_len;
  pr.output_len = r.output_len;
  pr.tokens_generated = 1;
  if (target != event.instance) {
    pr.kv_source = event.instance;
    kv_source_[idx] = event.instance;
  }
  instances_[to_index(target)].enqueue(pr, now_);
  mark_dirty(target);
  flush_pending_ = true;
}

void Simulator::on_migration_complete(const Event& event) {
  const std::size_t idx = index_of(event.request);
  const InstanceId source = kv_source_.at(idx).value();
  instances_[to_index(event.instance)].complete_migration(event.request);
  instances_[to_index(source)].release_parked(event.request);
  mark_dirty(event.instance);
  mark_dirty(source);
}

void Simulator::on_monitor_tick(const Event& /*event*/) {
  snapshots_.push_back(
      collect(instances_, scheduler_.pools(), predictor_, config_.interval_window, now_));
  const View view(*this);
  scheduler_.monitor_tick(view, now_);
  std::fill(dirty_.begin(), dirty_.end(), true);
  ++tick_count_;
  if (completed_ < trace_.size()) {
    push(static_cast<double>(tick_count_ + 1) * config_.monitor_period, EventKind::kMonitorTick);
  }
}

// Closes the current timestamp: starts KV pulls and iterations on every instance whose
// state changed, then completes pool transitions whose draining finished.
void Simulator::flush() {
  flush_pending_ = false;
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (!dirty_[i]) continue;
    dirty_[i] = false;
    Instance& inst = instances_[i];
    for (const auto& m : inst.advance_migrations(config_.transfer, now_)) {
      migrations_.push_back({m.request, m.source, inst.id(), m.start, m.finish});
      push(m.finish, EventKind::kMigrationComplete, inst.id(), m.request);
    }
    if (inst.busy()) continue;
    IterationBatch batch = inst.plan_iteration();
    if (batch.empty()) continue;
    const Seconds finish = inst.begin_iteration(std::move(batch), now_);
    push(finish, EventKind::kIterationComplete, inst.id());
  }
  const View view(*this);
  scheduler_.settle(view, now_);
}

RunResult Simulator::run() {
  while (step()) {
  }
  return result();
}

RunResult Simulator::result() const {
  RunResult out;
  out.records.reserve(trace_.size());
  for (const auto& r : records_) {
    if (r) out.records.push_back(*r);
  }
  out.snapshots = snapshots_;
  out.decisions = scheduler_.decisions();
  out.migrations = migrations_;
  out.predictor = predictor_;
  out.max_running_tokens = max_running_tokens_;
  out.end_time = now_;
  out.events_processed = events_processed_;
  for (const auto& inst : instances_) out.preemptions += inst.preemptions();
  return out;
}

void Simulator::check_invariants() const {
  for (const auto& inst : instances_) {
    const std::string name = "instance " + std::to_string(to_index(inst.id()));
    if (inst.kv_used() < 0 || inst.kv_used() > inst.config().kv_capacity_tokens) {
      throw std::logic_error(name + " KV usage out of range");
    }
    if (inst.kv_used() != inst.kv_resident_sum()) {
      throw std::logic_error(name + " KV usage disagrees with its residents");
    }
  }
  scheduler_.pools().check_partition();
}

RunResult run(std::span<const TraceRequest> trace, const RunConfig& config) {
  Simulator sim(std::vector<TraceRequest>(trace.begin(), trace.end()), config);
  return sim.run();
}

std::vector<TraceRequest> scale_trace(std::span<const TraceRequest> trace, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("scale factor must be positive");
  std::vector<TraceRequest> out(trace.begin(), trace.end());
  for (auto& r : out) r.arrival *= factor;
  return out;
}

}  // namespace pdsim
