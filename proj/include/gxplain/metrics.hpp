// Copyright 2026 The gxplain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "gxplain/tensor.hpp"

namespace gxplain {

struct UndefinedMetricError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Edge-level AUC-ROC in Mann-Whitney form: the probability that a random
/// positive outranks a random negative, ties counted one half. Computed from
/// average ranks in O(E log E).
inline double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc_roc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw UndefinedMetricError("auc_roc needs at least one positive and one negative label");
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

/// Soft Jaccard overlap sum(min(w, g)) / sum(max(w, g)); 0 when the
/// denominator vanishes.
inline double soft_jaccard(std::span<const double> weights, std::span<const int> truth) {
  if (weights.size() != truth.size()) throw ContractError("soft_jaccard: mask and ground truth differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t e = 0; e < weights.size(); ++e) {
    const double g = truth[e] ? 1.0 : 0.0;
    num += std::min(weights[e], g);
    den += std::max(weights[e], g);
  }
  return den > 0.0 ? num / den : 0.0;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population (N-denominator)
};

inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

}  // namespace gxplain
