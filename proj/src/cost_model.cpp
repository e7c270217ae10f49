/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#include "pdsim/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include <Eigen/QR>

namespace pdsim {

void DecodeCostParams::validate() const {
  if (!(b1 > 0.0)) throw std::invalid_argument("b1 must be positive");
  if (!(b0 >= 0.0)) throw std::invalid_argument("b0 must be non-negative");
}

void TransferParams::validate() const {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (!(bytes_per_token > 0.0)) throw std::invalid_argument("bytes_per_token must be positive");
  if (!(base_latency >= 0.0)) throw std::invalid_argument("base_latency must be non-negative");
}

Seconds predict_prefill_time(const PrefillCostParams& params, TokenCount input_len) {
  if (input_len < 1) throw std::invalid_argument("prefill length must be >= 1");
  const double len = static_cast<double>(input_len);
  return (params.a2 * len + params.a1) * len + params.a0;
}

Seconds marginal_prefill_time(const PrefillCostParams& params, TokenCount done,
                              TokenCount chunk) {
  if (done < 0 || chunk < 1) throw std::invalid_argument("invalid prefill chunk");
  const double d = static_cast<double>(done);
  const double c = static_cast<double>(chunk);
  // a2*((d+c)^2 - d^2) + a1*c, expanded to avoid cancellation.
  return params.a2 * c * (2.0 * d + c) + params.a1 * c;
}

PrefillCostParams fit_quadratic(std::span<const ProfilingSample> samples) {
  std::set<TokenCount> distinct;
  for (const auto& s : samples) {
    if (s.input_len < 1) throw std::invalid_argument("profiling sample with input_len < 1");
    if (!(s.measured_time > 0.0)) {
      throw std::invalid_argument("profiling sample with non-positive time");
    }
    distinct.insert(s.input_len);
  }
  if (distinct.size() < 3) {
    throw std::invalid_argument("quadratic fit needs at least 3 distinct input lengths, got " +
                                std::to_string(distinct.size()));
  }

  // Columns are scaled by powers of the largest length to keep the system well conditioned.
  const double scale = static_cast<double>(*distinct.rbegin());
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd times(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Rows are divided by the measured time so residuals are relative, matching
    // multiplicative measurement noise.
    const double x = static_cast<double>(samples[i].input_len) / scale;
    const double w = 1.0 / samples[i].measured_time;
    design(i, 0) = w * x * x;
    design(i, 1) = w * x;
    design(i, 2) = w;
    times(i) = 1.0;
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::Vector3d coef = qr.solve(times);
  // One step of iterative refinement tightens the noiseless round trip.
  const Eigen::VectorXd residual = times - design * coef;
  coef += qr.solve(residual);

  return PrefillCostParams{coef(0) / (scale * scale), coef(1) / scale, coef(2)};
}

double fit_residual(const PrefillCostParams& params, std::span<const ProfilingSample> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples) {
    const double r = predict_prefill_time(params, s.input_len) - s.measured_time;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(samples.size()));
}

Seconds decode_iter_time(const DecodeCostParams& params, TokenCount batch_tokens) {
  if (batch_tokens < 1) throw std::invalid_argument("batch must hold at least one token");
  return params.b1 * static_cast<double>(batch_tokens) + params.b0;
}

Seconds transfer_time(const TransferParams& params, TokenCount tokens) {
  if (tokens < 1) throw std::invalid_argument("transfer of fewer than one token");
  return params.base_latency +
         static_cast<double>(tokens) * params.bytes_per_token / params.bandwidth;
}

TokenCount max_running_tokens(const DecodeCostParams& params, TokenCount kv_capacity_tokens,
                              Seconds tpot_slo) {
  params.validate();
  if (!(tpot_slo > params.b0)) {
    throw std::invalid_argument("TPOT SLO " + std::to_string(tpot_slo) +
                                " s is unsatisfiable: fixed iteration cost is " +
                                std::to_string(params.b0) + " s");
  }
  const double bound = std::floor((tpot_slo - params.b0) / params.b1);
  if (bound >= static_cast<double>(kv_capacity_tokens)) return kv_capacity_tokens;
  return static_cast<TokenCount>(bound);
}

std::vector<TokenCount> profiling_grid(TokenCount max_context, int points, TokenCount min_len) {
  if (points < 2 || min_len < 1 || max_context <= min_len) {
    throw std::invalid_argument("invalid profiling grid");
  }
  std::vector<TokenCount> grid;
  const double ratio = std::pow(static_cast<double>(max_context) / static_cast<double>(min_len),
                                1.0 / static_cast<double>(points - 1));
  double len = static_cast<double>(min_len);
  for (int i = 0; i < points; ++i, len *= ratio) {
    auto rounded = static_cast<TokenCount>(std::llround(len));
    rounded = std::clamp(rounded, min_len, max_context);
    if (grid.empty() || grid.back() != rounded) grid.push_back(rounded);
  }
  grid.back() = max_context;
  return grid;
}

std::vector<ProfilingSample> profile_prefill(const PrefillCostParams& truth,
                                             std::span<const TokenCount> grid, double noise,
                                             std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<ProfilingSample> out;
  out.reserve(grid.size());
  for (TokenCount len : grid) {
    double t = predict_prefill_time(truth, len);
    if (noise > 0.0) t *= std::max(1e-3, 1.0 + noise * gauss(rng));
    out.push_back({len, t});
  }
  return out;
}

}  // namespace pdsim
