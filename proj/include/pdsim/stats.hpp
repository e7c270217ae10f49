/* Copyright 2026 The pdsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with the License. You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the specific language governing permissions and limitations under the License.
==============================================================================*/

#pragma once

#include <span>

namespace pdsim {

double mean(std::span<const double> values);

// Population standard deviation.
double stddev(std::span<const double> values);

// Population standard deviation over mean; 0 when the mean is 0.
double coefficient_of_variation(std::span<const double> values);

// Pearson correlation; 0 when either side has no variance.
double pearson(std::span<const double> x, std::span<const double> y);

// Nearest-rank percentile: the value at rank ceil(q * n) of the sorted values, q in (0, 1].
double nearest_rank(std::span<const double> values, double q);

}  // namespace pdsim
