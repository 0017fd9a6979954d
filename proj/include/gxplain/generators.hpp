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
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gxplain/graph.hpp"
#include "gxplain/rng.hpp"

namespace gxplain {

struct BaseConfig {
  std::size_t nodes = 25;
  std::size_t edges_per_node = 1;
  std::size_t cycle_size = 5;
  std::size_t max_motifs = 5;  // counting labels are drawn from 1..max_motifs
  double feature_max = 10.0;   // volume features ~ U(0, feature_max)
};

namespace detail {
inline void add_undirected(Graph& g, std::vector<int>* truth, std::size_t a, std::size_t b, int positive) {
  g.edges.emplace_back(a, b);
  g.edges.emplace_back(b, a);
  if (truth) {
    truth->push_back(positive);
    truth->push_back(positive);
  }
}
}  // namespace detail

/// Barabasi-Albert preferential attachment. Seeds with a clique on m+1 nodes,
/// then every new node links to m distinct existing nodes chosen with
/// probability proportional to degree. Features are left empty.
inline Graph generate_ba_graph(std::size_t n, std::size_t m, Rng& rng) {
  if (m < 1) throw ParameterError("BA graph needs m >= 1");
  if (n <= m) throw ParameterError("BA graph needs n > m (got n=" + std::to_string(n) + ", m=" + std::to_string(m) + ")");
  Graph g;
  g.n = n;
  std::vector<std::size_t> endpoints;  // one entry per edge endpoint
  for (std::size_t a = 0; a <= m; ++a)
    for (std::size_t b = a + 1; b <= m; ++b) {
      detail::add_undirected(g, nullptr, a, b, 0);
      endpoints.push_back(a);
      endpoints.push_back(b);
    }
  for (std::size_t v = m + 1; v < n; ++v) {
    std::vector<std::size_t> targets;
    while (targets.size() < m) {
      const auto t = endpoints[rng.below(endpoints.size())];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (auto t : targets) {
      detail::add_undirected(g, nullptr, t, v, 0);
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  return g;
}

namespace detail {
/// Appends a c-cycle on fresh nodes plus one bridge to a random base node.
/// Returns the new node ids.
inline std::vector<std::size_t> attach_cycle(Graph& g, std::vector<int>& truth, std::size_t base_nodes,
                                             std::size_t c, Rng& rng) {
  const std::size_t first = g.n;
  std::vector<std::size_t> ids;
  for (std::size_t r = 0; r < c; ++r) ids.push_back(first + r);
  g.n += c;
  for (std::size_t r = 0; r < c; ++r) add_undirected(g, &truth, ids[r], ids[(r + 1) % c], 1);
  add_undirected(g, &truth, rng.below(base_nodes), ids[0], 0);
  return ids;
}
}  // namespace detail

/// Counting instance: k disjoint c-cycles bridged to a BA base; label = k.
/// k = 0 is resampled uniformly from 1..max_motifs so every instance has a
/// nonempty explanation.
inline Instance make_counting_instance(const BaseConfig& cfg, std::size_t k, std::size_t c, Rng& rng) {
  if (c < 3) throw ParameterError("cycle size must be >= 3");
  if (k == 0) k = 1 + rng.below(std::max<std::size_t>(cfg.max_motifs, 1));
  Instance inst;
  inst.graph = generate_ba_graph(cfg.nodes, cfg.edges_per_node, rng);
  inst.truth.gt_edges.assign(inst.graph.edges.size(), 0);
  for (std::size_t t = 0; t < k; ++t) detail::attach_cycle(inst.graph, inst.truth.gt_edges, cfg.nodes, c, rng);
  inst.graph.features = Tensor(inst.graph.n, 1, 1.0);
  inst.graph.label = static_cast<double>(k);
  return inst;
}

/// Volume instance: one c-cycle bridged to a BA base, scalar features
/// U(0, feature_max) on every node, label = sum of the cycle nodes' features.
inline Instance make_volume_instance(const BaseConfig& cfg, std::size_t c, Rng& rng) {
  if (c < 3) throw ParameterError("cycle size must be >= 3");
  Instance inst;
  inst.graph = generate_ba_graph(cfg.nodes, cfg.edges_per_node, rng);
  inst.truth.gt_edges.assign(inst.graph.edges.size(), 0);
  const auto motif = detail::attach_cycle(inst.graph, inst.truth.gt_edges, cfg.nodes, c, rng);
  inst.graph.features = Tensor(inst.graph.n, 1);
  for (std::size_t i = 0; i < inst.graph.n; ++i) inst.graph.features(i, 0) = rng.uniform(0.0, cfg.feature_max);
  double label = 0.0;
  for (auto v : motif) label += inst.graph.features(v, 0);
  inst.graph.label = label;
  return inst;
}

enum class SyntheticTask { Counting, Volume };

inline SyntheticTask parse_synthetic_task(const std::string& s) {
  if (s == "counting") return SyntheticTask::Counting;
  if (s == "volume") return SyntheticTask::Volume;
  throw ParameterError("unknown synthetic task '" + s + "' (expected counting|volume)");
}

/// Contiguous 80/10/10 train/val/test split by instance index.
inline Splits default_splits(std::size_t count) {
  Splits s;
  const std::size_t n_train = count * 8 / 10;
  const std::size_t n_val = (count - n_train) / 2;
  for (std::size_t i = 0; i < count; ++i) {
    if (i < n_train)
      s.train.push_back(i);
    else if (i < n_train + n_val)
      s.val.push_back(i);
    else
      s.test.push_back(i);
  }
  return s;
}

/// Pure function of (task, count, seed, cfg).
inline Dataset make_dataset(SyntheticTask task, std::size_t count, std::uint64_t seed, const BaseConfig& cfg = {}) {
  Rng rng(seed, "data");
  Dataset ds;
  ds.task = Task::regression();
  ds.feature_dim = 1;
  ds.name = task == SyntheticTask::Counting ? "ba-motif-counting" : "ba-motif-volume";
  for (std::size_t i = 0; i < count; ++i)
    ds.instances.push_back(task == SyntheticTask::Counting ? make_counting_instance(cfg, 0, cfg.cycle_size, rng)
                                                           : make_volume_instance(cfg, cfg.cycle_size, rng));
  ds.splits = default_splits(count);
  return ds;
}

}  // namespace gxplain
