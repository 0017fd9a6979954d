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

// Dataset text format (one token group per line, reals with 17 significant digits):
//
//   gxplain-dataset 1
//   name <name>
//   task regression | task classification <C>
//   d <feature dim>
//   count <N>
//   split train <k> <idx>...      (likewise val, test)
//   instance <i>                  (repeated N times)
//   n <nodes>
//   edges <E>
//   <src> <dst>                   (E lines)
//   features
//   <x_0> ... <x_{d-1}>           (n lines)
//   label <real>
//   gt <E> <bit>...

#pragma once

#include <filesystem>
#include <string>

#include "gxplain/graph.hpp"
#include "gxplain/io.hpp"

namespace gxplain {

inline std::string serialize_dataset(const Dataset& ds) {
  std::string out;
  auto line = [&out](const std::string& s) {
    out += s;
    out += '\n';
  };
  line("gxplain-dataset 1");
  line("name " + ds.name);
  line(ds.task.is_regression() ? "task regression" : "task classification " + std::to_string(ds.task.classes));
  line("d " + std::to_string(ds.feature_dim));
  line("count " + std::to_string(ds.instances.size()));
  auto split = [&](const char* key, const std::vector<std::size_t>& idx) {
    std::string s = std::string("split ") + key + " " + std::to_string(idx.size());
    for (auto i : idx) s += " " + std::to_string(i);
    line(s);
  };
  split("train", ds.splits.train);
  split("val", ds.splits.val);
  split("test", ds.splits.test);
  for (std::size_t k = 0; k < ds.instances.size(); ++k) {
    const auto& [g, gt] = ds.instances[k];
    line("instance " + std::to_string(k));
    line("n " + std::to_string(g.n));
    line("edges " + std::to_string(g.edges.size()));
    for (const auto& [s, d] : g.edges) line(std::to_string(s) + " " + std::to_string(d));
    line("features");
    for (std::size_t i = 0; i < g.features.rows; ++i) {
      std::string row;
      for (std::size_t j = 0; j < g.features.cols; ++j) row += (j ? " " : "") + format_real(g.features(i, j));
      line(row);
    }
    line("label " + format_real(g.label));
    std::string bits = "gt " + std::to_string(gt.gt_edges.size());
    for (int b : gt.gt_edges) bits += b ? " 1" : " 0";
    line(bits);
  }
  return out;
}

/// Parses and validates; throws ParseError (with line context) or
/// ValidationError (naming the instance). Never returns a partial dataset.
inline Dataset parse_dataset(std::string_view text, const std::string& source = "dataset") {
  LineReader in(text, source);
  Dataset ds;
  const auto magic = in.next("header");
  if (magic.size() != 2 || magic[0] != "gxplain-dataset" || magic[1] != "1") in.fail("not a gxplain-dataset v1 file");
  {
    auto toks = in.next("name");
    if (toks.empty() || toks[0] != "name") in.fail("expected 'name'");
    toks.erase(toks.begin());
    for (std::size_t i = 0; i < toks.size(); ++i) ds.name += (i ? " " : "") + toks[i];
  }
  const auto task = in.expect("task", -1);
  if (task[0] == "regression" && task.size() == 1)
    ds.task = Task::regression();
  else if (task[0] == "classification" && task.size() == 2)
    ds.task = Task::classification(in.index(task[1], "task classes"));
  else
    in.fail("unknown task specification");
  ds.feature_dim = in.index(in.expect("d", 1)[0], "d");
  const std::size_t count = in.index(in.expect("count", 1)[0], "count");
  const char* split_names[] = {"train", "val", "test"};
  std::vector<std::size_t>* split_targets[] = {&ds.splits.train, &ds.splits.val, &ds.splits.test};
  for (int s = 0; s < 3; ++s) {
    auto* target = split_targets[s];
    auto toks = in.expect("split", -1);
    if (toks.size() < 2 || toks[0] != split_names[s]) in.fail(std::string("expected split ") + split_names[s]);
    const std::size_t k = in.index(toks[1], "split size");
    if (toks.size() != k + 2) in.fail("split '" + toks[0] + "' lists " + std::to_string(toks.size() - 2) + " of " +
                                      std::to_string(k) + " indices");
    for (std::size_t i = 0; i < k; ++i) target->push_back(in.index(toks[i + 2], "split index"));
  }
  ds.instances.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Instance inst;
    auto& g = inst.graph;
    if (in.index(in.expect("instance", 1)[0], "instance") != k) in.fail("instance ids out of order");
    g.n = in.index(in.expect("n", 1)[0], "n");
    const std::size_t n_edges = in.index(in.expect("edges", 1)[0], "edges");
    g.edges.reserve(n_edges);
    for (std::size_t e = 0; e < n_edges; ++e) {
      const auto toks = in.next("edge");
      if (toks.size() != 2) in.fail("edge line needs 2 indices");
      g.edges.emplace_back(in.index(toks[0], "edge src"), in.index(toks[1], "edge dst"));
    }
    in.expect("features", 0);
    g.features = Tensor(g.n, ds.feature_dim);
    for (std::size_t i = 0; i < g.n; ++i) {
      const auto toks = in.next("feature row");
      if (toks.size() != ds.feature_dim) in.fail("feature row has " + std::to_string(toks.size()) + " values");
      for (std::size_t j = 0; j < ds.feature_dim; ++j) g.features(i, j) = in.real(toks[j], "feature");
    }
    g.label = in.real(in.expect("label", 1)[0], "label");
    auto bits = in.expect("gt", -1);
    const std::size_t n_bits = in.index(bits[0], "gt length");
    if (bits.size() != n_bits + 1) in.fail("gt lists " + std::to_string(bits.size() - 1) + " of " +
                                           std::to_string(n_bits) + " bits");
    for (std::size_t e = 0; e < n_bits; ++e) {
      if (bits[e + 1] != "0" && bits[e + 1] != "1") in.fail("gt entry must be 0 or 1");
      inst.truth.gt_edges.push_back(bits[e + 1] == "1");
    }
    ds.instances.push_back(std::move(inst));
  }
  if (!in.done()) in.fail("trailing content after last instance");
  ds.validate();
  return ds;
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  write_file(path, serialize_dataset(ds));
}

inline Dataset read_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path), path.string()); }

}  // namespace gxplain
