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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gxplain/tensor.hpp"

namespace gxplain {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TaskKind { Classification, Regression };

struct Task {
  TaskKind kind = TaskKind::Regression;
  std::size_t classes = 1;  // output width of the prediction head

  static Task regression() { return {TaskKind::Regression, 1}; }
  static Task classification(std::size_t c) { return {TaskKind::Classification, c}; }
  bool is_regression() const { return kind == TaskKind::Regression; }
  friend bool operator==(const Task&, const Task&) = default;
};

using Edge = std::pair<std::size_t, std::size_t>;

/// An instance to explain: n nodes, directed edge list, n x d features and a
/// label (class index stored as a double for classification).
struct Graph {
  std::size_t n = 0;
  std::vector<Edge> edges;
  Tensor features;
  double label = 0.0;

  std::size_t num_edges() const { return edges.size(); }
  std::size_t feature_dim() const { return features.cols; }

  /// [src0, dst0, src1, dst1, ...]
  std::vector<std::size_t> flat_edges() const {
    std::vector<std::size_t> flat;
    flat.reserve(edges.size() * 2);
    for (const auto& [s, d] : edges) {
      flat.push_back(s);
      flat.push_back(d);
    }
    return flat;
  }

  /// For every edge (i,j), the index of (j,i). Throws if an edge has no reverse.
  std::vector<std::size_t> reverse_index() const {
    std::map<Edge, std::size_t> where;
    for (std::size_t e = 0; e < edges.size(); ++e) where.emplace(edges[e], e);
    std::vector<std::size_t> partner(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto it = where.find({edges[e].second, edges[e].first});
      if (it == where.end())
        throw ValidationError("edge (" + std::to_string(edges[e].first) + "," + std::to_string(edges[e].second) +
                              ") has no reverse direction");
      partner[e] = it->second;
    }
    return partner;
  }

  void validate() const {
    if (features.rows != n)
      throw ValidationError("feature matrix has " + std::to_string(features.rows) + " rows for " + std::to_string(n) +
                            " nodes");
    for (const auto& [s, d] : edges)
      if (s >= n || d >= n)
        throw ValidationError("edge (" + std::to_string(s) + "," + std::to_string(d) + ") out of range for " +
                              std::to_string(n) + " nodes");
  }

  friend bool operator==(const Graph&, const Graph&) = default;
};

/// Soft edge mask aligned with Graph::edges, each weight in [0,1].
struct EdgeMask {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  friend bool operator==(const EdgeMask&, const EdgeMask&) = default;
};

/// Binary ground-truth explanation aligned with Graph::edges.
struct GroundTruth {
  std::vector<int> gt_edges;

  std::size_t size() const { return gt_edges.size(); }
  std::size_t positives() const {
    std::size_t p = 0;
    for (int b : gt_edges) p += b != 0;
    return p;
  }
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Instance {
  Graph graph;
  GroundTruth truth;
  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  friend bool operator==(const Splits&, const Splits&) = default;
};

struct Dataset {
  std::string name;
  Task task;
  std::size_t feature_dim = 1;
  std::vector<Instance> instances;
  Splits splits;

  std::size_t size() const { return instances.size(); }

  /// Checks every Graph/GroundTruth/Dataset invariant, naming the offending instance.
  void validate() const {
    for (std::size_t k = 0; k < instances.size(); ++k) {
      const auto& [g, gt] = instances[k];
      const std::string where = "instance " + std::to_string(k) + ": ";
      try {
        g.validate();
      } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
      }
      if (g.feature_dim() != feature_dim)
        throw ValidationError(where + "feature dimension " + std::to_string(g.feature_dim()) + " != " +
                              std::to_string(feature_dim));
      if (gt.size() != g.num_edges())
        throw ValidationError(where + "ground truth length " + std::to_string(gt.size()) + " != edge count " +
                              std::to_string(g.num_edges()));
      if (!task.is_regression()) {
        const double c = g.label;
        if (c < 0 || c >= static_cast<double>(task.classes) || c != static_cast<double>(static_cast<std::size_t>(c)))
          throw ValidationError(where + "label " + std::to_string(c) + " is not a class index");
      }
    }
    std::vector<int> seen(instances.size(), 0);
    for (const auto* split : {&splits.train, &splits.val, &splits.test})
      for (auto i : *split) {
        if (i >= instances.size()) throw ValidationError("split index " + std::to_string(i) + " out of range");
        if (seen[i]++) throw ValidationError("instance " + std::to_string(i) + " appears in more than one split");
      }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Dense D^-1/2 (A_w + I) D^-1/2 with A_w built from the mask (all ones if absent).
inline Tensor normalized_adjacency(const Graph& g, const EdgeMask* mask = nullptr) {
  if (mask && mask->size() != g.num_edges())
    throw ContractError("mask length " + std::to_string(mask->size()) + " does not match edge count " +
                        std::to_string(g.num_edges()));
  ad::Tape tape;
  const Tensor w = mask ? Tensor::column(mask->weights) : Tensor(g.num_edges(), 1, 1.0);
  const auto flat = g.flat_edges();
  return ad::normalized_adjacency(tape.constant(w), flat, g.n).value();
}

inline Tensor normalized_adjacency(const Graph& g, const EdgeMask& mask) { return normalized_adjacency(g, &mask); }

}  // namespace gxplain
