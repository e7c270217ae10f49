/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "pdsim/core.hpp"

namespace pdsim {

struct PoolMove {
  InstanceId instance{};
  PoolKind from = PoolKind::kPrefill;
  PoolKind to = PoolKind::kPrefill;
};

// Edges of the instance transition diagram.
bool is_legal_transition(PoolKind from, PoolKind to);

// Whether a pool's members accept new requests of the given phase.
constexpr bool serves_prefill(PoolKind k) {
  return k == PoolKind::kPrefill || k == PoolKind::kDtoP;
}
constexpr bool serves_decode(PoolKind k) { return k == PoolKind::kDecode || k == PoolKind::kPtoD; }

// Four disjoint insertion-ordered pools partitioning the instance ids 0..n-1.
class PoolSet {
 public:
  PoolSet(std::size_t prefill_count, std::size_t decode_count);

  std::size_t instance_count() const { return home_.size(); }
  PoolKind pool_of(InstanceId id) const;
  std::span<const InstanceId> members(PoolKind kind) const;
  std::size_t size(PoolKind kind) const { return members(kind).size(); }
  std::size_t prefill_capable() const { return size(PoolKind::kPrefill) + size(PoolKind::kDtoP); }
  std::size_t decode_capable() const { return size(PoolKind::kDecode) + size(PoolKind::kPtoD); }

  // From Prefill: to PtoD while prefill work remains, else to Decode. From DtoP: back to
  // Decode. Returns nullopt (no-op) when the instance already serves decode.
  std::optional<PoolMove> flip_to_decode_role(InstanceId id, bool has_prefill_work);
  // Mirror image of flip_to_decode_role.
  std::optional<PoolMove> flip_to_prefill_role(InstanceId id, bool has_decode_work);
  // PtoD -> Decode once prefill work is gone; DtoP -> Prefill once decode work is gone.
  std::optional<PoolMove> on_drained(InstanceId id, Phase drained_phase);

  // Throws std::logic_error if the partition is broken.
  void check_partition() const;

 private:
  void move(InstanceId id, PoolKind from, PoolKind to);
  std::vector<InstanceId>& pool(PoolKind kind) { return pools_[static_cast<std::size_t>(kind)]; }

  std::array<std::vector<InstanceId>, 4> pools_;
  std::vector<PoolKind> home_;
};

}  // namespace pdsim
