/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/scheduler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pdsim {

namespace {

// Earliest member in pool order wins ties.
template <typename Key>
std::optional<InstanceId> argmin(std::span<const InstanceId> members, Key key) {
  std::optional<InstanceId> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (InstanceId id : members) {
    const double v = static_cast<double>(key(id));
    if (!best || v < best_value) {
      best = id;
      best_value = v;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kSloAware:
      return "slo-aware";
    case Strategy::kMinimalLoad:
      return "minimal-load";
    case Strategy::kRoundRobin:
      return "round-robin";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), '_', '-');
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "slo-aware" || s == "sloaware") return Strategy::kSloAware;
  if (s == "minimal-load" || s == "minimalload" || s == "min-load") return Strategy::kMinimalLoad;
  if (s == "round-robin" || s == "roundrobin") return Strategy::kRoundRobin;
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "'");
}

std::string_view to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::kPrefillDispatch:
      return "prefill";
    case DecisionKind::kDecodeDispatch:
      return "decode";
    case DecisionKind::kFlip:
      return "flip";
    case DecisionKind::kDrain:
      return "drain";
  }
  return "?";
}

void SchedulerConfig::validate() const {
  if (!(theta_d > 0.0 && theta_d <= 1.0)) throw std::invalid_argument("theta_d must be in (0,1]");
  if (!(theta_busy > 0.0)) throw std::invalid_argument("theta_busy must be positive");
  if (!(ttft_margin > 0.0)) throw std::invalid_argument("ttft_margin must be positive");
  if (ttft_threshold && !(*ttft_threshold > 0.0)) {
    throw std::invalid_argument("ttft_threshold must be positive");
  }
  if (tpot_threshold && !(*tpot_threshold > 0.0)) {
    throw std::invalid_argument("tpot_threshold must be positive");
  }
}

GlobalScheduler::GlobalScheduler(SchedulerConfig config, const SloConfig& slo, PoolSet pools,
                                 PrefillCostParams predictor, TokenCount max_running_tokens,
                                 Seconds monitor_period)
    : config_(config),
      pools_(std::move(pools)),
      predictor_(predictor),
      max_running_tokens_(max_running_tokens) {
  config_.validate();
  slo.validate();
  if (!(monitor_period > 0.0)) throw std::invalid_argument("monitor period must be positive");
  ttft_threshold_ = config_.ttft_threshold.value_or(slo.ttft_slo * config_.ttft_margin);
  tpot_threshold_ = config_.tpot_threshold.value_or(slo.tpot_slo);
  const Seconds breach = config_.tpot_breach_duration.value_or(2.0 * monitor_period);
  breach_ticks_required_ = std::max(1, static_cast<int>(std::llround(breach / monitor_period)));
}

InstanceId GlobalScheduler::dispatch(DecisionKind kind, RequestId request, InstanceId target,
                                     Seconds now, std::string rule) {
  decisions_.push_back({now, kind, request, target, std::move(rule), std::nullopt,
                        pools_.pool_of(target)});
  return target;
}

void GlobalScheduler::log_move(const PoolMove& move, Seconds now, std::string rule) {
  const auto kind = rule == "drain" ? DecisionKind::kDrain : DecisionKind::kFlip;
  decisions_.push_back({now, kind, std::nullopt, move.instance, std::move(rule), move.from,
                        move.to});
}

InstanceId GlobalScheduler::round_robin(PoolKind kind, std::size_t& cursor) const {
  const auto members = pools_.members(kind);
  if (members.empty()) throw std::logic_error("round robin over an empty pool");
  const InstanceId id = members[cursor % members.size()];
  cursor = (cursor + 1) % members.size();
  return id;
}

InstanceId GlobalScheduler::schedule_prefill(const TraceRequest& request, const LoadView& view,
                                             Seconds now) {
  auto delay = [&view](InstanceId id) { return view.predicted_prefill_delay(id); };

  if (config_.strategy == Strategy::kRoundRobin) {
    return dispatch(DecisionKind::kPrefillDispatch, request.id,
                    round_robin(PoolKind::kPrefill, rr_prefill_), now, "round-robin");
  }
  if (config_.strategy == Strategy::kMinimalLoad) {
    auto t = argmin(pools_.members(PoolKind::kPrefill), delay);
    if (!t) throw std::logic_error("no prefill instance for minimal-load dispatch");
    return dispatch(DecisionKind::kPrefillDispatch, request.id, *t, now, "min-load");
  }

  const Seconds prefill_time = predict_prefill_time(predictor_, request.input_len);
  const auto t1 = argmin(pools_.members(PoolKind::kPrefill), delay);
  const auto t2 = argmin(pools_.members(PoolKind::kDtoP), delay);

  if (t1 && delay(*t1) + prefill_time <= ttft_threshold_) {
    return dispatch(DecisionKind::kPrefillDispatch, request.id, *t1, now, "alg1:t1");
  }
  if (t2 && delay(*t2) + prefill_time <= ttft_threshold_) {
    return dispatch(DecisionKind::kPrefillDispatch, request.id, *t2, now, "alg1:t2");
  }
  if (instance_scheduling() && decode_load_is_low(view)) {
    if (auto t3 = try_move_decode_to_prefill(view, now)) {
      return dispatch(DecisionKind::kPrefillDispatch, request.id, *t3, now, "alg1:flip");
    }
  }
  if (t1) return dispatch(DecisionKind::kPrefillDispatch, request.id, *t1, now, "alg1:fallback");
  if (t2) return dispatch(DecisionKind::kPrefillDispatch, request.id, *t2, now, "alg1:fallback-t2");

  // No prefill-capable instance at all; only reachable with a degenerate initial split.
  std::vector<InstanceId> everyone;
  for (PoolKind k : kAllPools)
    for (InstanceId id : pools_.members(k)) everyone.push_back(id);
  return dispatch(DecisionKind::kPrefillDispatch, request.id, *argmin(everyone, delay), now,
                  "alg1:degenerate");
}

bool GlobalScheduler::decode_admits(InstanceId id, const LoadView& view) const {
  if (view.running_tokens(id) > max_running_tokens_) return false;
  const auto interval = view.avg_token_interval(id);
  return !interval || *interval <= tpot_threshold_;
}

InstanceId GlobalScheduler::schedule_decode(RequestId request, InstanceId prefill_instance,
                                            const LoadView& view, Seconds now) {
  auto tokens = [&view](InstanceId id) { return view.running_tokens(id); };

  if (config_.strategy == Strategy::kRoundRobin) {
    return dispatch(DecisionKind::kDecodeDispatch, request,
                    round_robin(PoolKind::kDecode, rr_decode_), now, "round-robin");
  }
  if (config_.strategy == Strategy::kMinimalLoad) {
    auto t = argmin(pools_.members(PoolKind::kDecode), tokens);
    if (!t) throw std::logic_error("no decode instance for minimal-load dispatch");
    return dispatch(DecisionKind::kDecodeDispatch, request, *t, now, "min-load");
  }

  if (serves_decode(pools_.pool_of(prefill_instance))) {
    return dispatch(DecisionKind::kDecodeDispatch, request, prefill_instance, now,
                    "alg2:zero-transfer");
  }
  const auto t1 = argmin(pools_.members(PoolKind::kDecode), tokens);
  const auto t2 = argmin(pools_.members(PoolKind::kPtoD), tokens);
  if (t1 && decode_admits(*t1, view)) {
    return dispatch(DecisionKind::kDecodeDispatch, request, *t1, now, "alg2:t1");
  }
  if (t2 && decode_admits(*t2, view)) {
    return dispatch(DecisionKind::kDecodeDispatch, request, *t2, now, "alg2:t2");
  }
  if (instance_scheduling()) {
    if (auto t3 = try_move_prefill_to_decode(view, now)) {
      return dispatch(DecisionKind::kDecodeDispatch, request, *t3, now, "alg2:flip");
    }
  }
  if (t1 && t2) {
    const auto pick = tokens(*t1) <= tokens(*t2) ? *t1 : *t2;
    return dispatch(DecisionKind::kDecodeDispatch, request, pick, now, "alg2:fallback");
  }
  if (t1) return dispatch(DecisionKind::kDecodeDispatch, request, *t1, now, "alg2:fallback");
  if (t2) return dispatch(DecisionKind::kDecodeDispatch, request, *t2, now, "alg2:fallback");

  // No decode-capable instance: force the least loaded prefill instance over.
  std::vector<InstanceId> prefill_side(pools_.members(PoolKind::kPrefill).begin(),
                                       pools_.members(PoolKind::kPrefill).end());
  for (InstanceId id : pools_.members(PoolKind::kDtoP)) prefill_side.push_back(id);
  const InstanceId forced =
      *argmin(prefill_side, [&view](InstanceId id) { return view.predicted_prefill_delay(id); });
  if (auto move = pools_.flip_to_decode_role(forced, view.has_prefill_work(forced))) {
    log_move(*move, now, "alg2:forced");
  }
  return dispatch(DecisionKind::kDecodeDispatch, request, forced, now, "alg2:forced");
}

std::optional<InstanceId> GlobalScheduler::try_move_decode_to_prefill(const LoadView& view,
                                                                      Seconds now,
                                                                      std::string_view rule) {
  if (pools_.decode_capable() <= 1) return std::nullopt;
  auto tokens = [&view](InstanceId id) { return view.running_tokens(id); };
  const auto source = pools_.size(PoolKind::kPtoD) > 0 ? PoolKind::kPtoD : PoolKind::kDecode;
  const InstanceId pick = *argmin(pools_.members(source), tokens);
  auto move = pools_.flip_to_prefill_role(pick, view.has_decode_work(pick));
  if (!move) return std::nullopt;
  log_move(*move, now, std::string(rule));
  return pick;
}

std::optional<InstanceId> GlobalScheduler::try_move_prefill_to_decode(const LoadView& view,
                                                                      Seconds now,
                                                                      std::string_view rule) {
  if (pools_.prefill_capable() <= 1) return std::nullopt;
  auto delay = [&view](InstanceId id) { return view.predicted_prefill_delay(id); };
  const auto source = pools_.size(PoolKind::kDtoP) > 0 ? PoolKind::kDtoP : PoolKind::kPrefill;
  const InstanceId pick = *argmin(pools_.members(source), delay);
  // Prefill load is deliberately not consulted here.
  auto move = pools_.flip_to_decode_role(pick, view.has_prefill_work(pick));
  if (!move) return std::nullopt;
  log_move(*move, now, std::string(rule));
  return pick;
}

std::optional<Seconds> GlobalScheduler::decode_pool_interval(const LoadView& view) const {
  double sum = 0.0;
  int count = 0;
  for (PoolKind k : {PoolKind::kDecode, PoolKind::kPtoD}) {
    for (InstanceId id : pools_.members(k)) {
      if (auto v = view.avg_token_interval(id)) {
        sum += *v;
        ++count;
      }
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

bool GlobalScheduler::decode_load_is_low(const LoadView& view) const {
  std::optional<TokenCount> least;
  for (PoolKind k : {PoolKind::kDecode, PoolKind::kPtoD}) {
    for (InstanceId id : pools_.members(k)) {
      const TokenCount t = view.running_tokens(id);
      if (!least || t < *least) least = t;
    }
  }
  if (!least) return false;
  if (static_cast<double>(*least) > config_.theta_d * static_cast<double>(max_running_tokens_)) {
    return false;
  }
  const auto interval = decode_pool_interval(view);
  return !interval || *interval <= tpot_threshold_;
}

std::vector<InstanceId> GlobalScheduler::monitor_tick(const LoadView& view, Seconds now) {
  std::vector<InstanceId> flipped;
  if (!instance_scheduling()) return flipped;

  const auto interval = decode_pool_interval(view);
  if (interval && *interval > tpot_threshold_) {
    ++breach_ticks_;
  } else {
    breach_ticks_ = 0;
  }
  if (breach_ticks_ >= breach_ticks_required_) {
    if (auto id = try_move_prefill_to_decode(view, now, "alg4:tpot-breach")) {
      flipped.push_back(*id);
      breach_ticks_ = 0;
    }
  }

  TokenCount decode_tokens = 0;
  for (PoolKind k : {PoolKind::kDecode, PoolKind::kPtoD})
    for (InstanceId id : pools_.members(k)) decode_tokens += view.running_tokens(id);
  const double capacity =
      static_cast<double>(max_running_tokens_) * static_cast<double>(pools_.decode_capable());
  if (capacity > 0.0 && static_cast<double>(decode_tokens) / capacity > config_.theta_busy) {
    const std::vector<InstanceId> prefill(pools_.members(PoolKind::kPrefill).begin(),
                                          pools_.members(PoolKind::kPrefill).end());
    for (InstanceId id : prefill) {
      if (pools_.prefill_capable() <= 1) break;
      if (view.has_prefill_work(id)) continue;
      if (auto move = pools_.flip_to_decode_role(id, false)) {
        log_move(*move, now, "idle-prefill");
        flipped.push_back(id);
      }
    }
  }
  return flipped;
}

std::vector<PoolMove> GlobalScheduler::settle(const LoadView& view, Seconds now) {
  std::vector<PoolMove> moves;
  const std::vector<InstanceId> p2d(pools_.members(PoolKind::kPtoD).begin(),
                                    pools_.members(PoolKind::kPtoD).end());
  for (InstanceId id : p2d) {
    if (view.has_prefill_work(id)) continue;
    if (auto m = pools_.on_drained(id, Phase::kPrefill)) {
      log_move(*m, now, "drain");
      moves.push_back(*m);
    }
  }
  const std::vector<InstanceId> d2p(pools_.members(PoolKind::kDtoP).begin(),
                                    pools_.members(PoolKind::kDtoP).end());
  for (InstanceId id : d2p) {
    if (view.has_decode_work(id)) continue;
    if (auto m = pools_.on_drained(id, Phase::kDecode)) {
      log_move(*m, now, "drain");
      moves.push_back(*m);
    }
  }
  return moves;
}

}  // namespace pdsim
