/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/pools.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace pdsim {

bool is_legal_transition(PoolKind from, PoolKind to) {
  using enum PoolKind;
  switch (from) {
    case kPrefill:
      return to == kPtoD || to == kDecode;
    case kPtoD:
      return to == kDecode || to == kPrefill;
    case kDecode:
      return to == kDtoP || to == kPrefill;
    case kDtoP:
      return to == kPrefill || to == kDecode;
  }
  return false;
}

PoolSet::PoolSet(std::size_t prefill_count, std::size_t decode_count) {
  const std::size_t n = prefill_count + decode_count;
  home_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = i < prefill_count ? PoolKind::kPrefill : PoolKind::kDecode;
    home_[i] = kind;
    pool(kind).push_back(static_cast<InstanceId>(i));
  }
}

PoolKind PoolSet::pool_of(InstanceId id) const {
  const auto i = to_index(id);
  if (i >= home_.size()) throw std::out_of_range("unknown instance " + std::to_string(i));
  return home_[i];
}

std::span<const InstanceId> PoolSet::members(PoolKind kind) const {
  return pools_[static_cast<std::size_t>(kind)];
}

void PoolSet::move(InstanceId id, PoolKind from, PoolKind to) {
  if (!is_legal_transition(from, to)) {
    throw std::logic_error("illegal pool transition " + std::string(to_string(from)) + " -> " +
                           std::string(to_string(to)));
  }
  auto& src = pool(from);
  src.erase(std::find(src.begin(), src.end(), id));
  pool(to).push_back(id);
  home_[to_index(id)] = to;
}

std::optional<PoolMove> PoolSet::flip_to_decode_role(InstanceId id, bool has_prefill_work) {
  const PoolKind from = pool_of(id);
  PoolKind to;
  switch (from) {
    case PoolKind::kPrefill:
      to = has_prefill_work ? PoolKind::kPtoD : PoolKind::kDecode;
      break;
    case PoolKind::kDtoP:
      to = PoolKind::kDecode;
      break;
    default:
      return std::nullopt;
  }
  move(id, from, to);
  return PoolMove{id, from, to};
}

std::optional<PoolMove> PoolSet::flip_to_prefill_role(InstanceId id, bool has_decode_work) {
  const PoolKind from = pool_of(id);
  PoolKind to;
  switch (from) {
    case PoolKind::kDecode:
      to = has_decode_work ? PoolKind::kDtoP : PoolKind::kPrefill;
      break;
    case PoolKind::kPtoD:
      to = PoolKind::kPrefill;
      break;
    default:
      return std::nullopt;
  }
  move(id, from, to);
  return PoolMove{id, from, to};
}

std::optional<PoolMove> PoolSet::on_drained(InstanceId id, Phase drained_phase) {
  const PoolKind from = pool_of(id);
  if (from == PoolKind::kPtoD && drained_phase == Phase::kPrefill) {
    move(id, from, PoolKind::kDecode);
    return PoolMove{id, from, PoolKind::kDecode};
  }
  if (from == PoolKind::kDtoP && drained_phase == Phase::kDecode) {
    move(id, from, PoolKind::kPrefill);
    return PoolMove{id, from, PoolKind::kPrefill};
  }
  return std::nullopt;
}

void PoolSet::check_partition() const {
  std::vector<int> seen(home_.size(), 0);
  for (PoolKind kind : kAllPools) {
    for (InstanceId id : members(kind)) {
      const auto i = to_index(id);
      if (i >= home_.size() || home_[i] != kind) {
        throw std::logic_error("pool membership out of sync for instance " + std::to_string(i));
      }
      ++seen[i];
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) {
      throw std::logic_error("instance " + std::to_string(i) + " appears in " +
                             std::to_string(seen[i]) + " pools");
    }
  }
}

}  // namespace pdsim
