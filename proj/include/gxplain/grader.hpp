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

#include <array>
#include <cctype>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gxplain/graph.hpp"
#include "gxplain/io.hpp"
#include "gxplain/metrics.hpp"
#include "gxplain/rng.hpp"

namespace gxplain {

struct TemplateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScoreParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScoreRangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Transport failure or persistent unparseable replies after all retries.
struct GraderUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Provenance { Oracle, Random, Llm, Cache, Constant };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Oracle: return "oracle";
    case Provenance::Random: return "random";
    case Provenance::Llm: return "llm";
    case Provenance::Cache: return "cache";
    case Provenance::Constant: return "constant";
  }
  return "?";
}

struct GraderScore {
  double s = 0.0;
  Provenance provenance = Provenance::Oracle;
  std::optional<std::string> raw_response;
};

namespace detail {
inline std::string format_g(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

inline void replace_all(std::string& text, std::string_view token, std::string_view value) {
  for (std::size_t pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size()))
    text.replace(pos, token.size(), value);
}
}  // namespace detail

/// `edge index: [[i,j],...] node feature: {i: [...], ...}`. With a mask only
/// edges whose weight is at least `threshold` are listed.
inline std::string graph_to_text(const Graph& g, const EdgeMask* mask = nullptr, double threshold = 0.5) {
  if (mask && mask->weights.size() != g.edges.size())
    throw ContractError("graph_to_text: mask has " + std::to_string(mask->weights.size()) + " weights for " +
                        std::to_string(g.edges.size()) + " edges");
  if (mask && !(threshold > 0.0 && threshold < 1.0)) throw ParameterError("graph_to_text: threshold must be in (0,1)");
  std::string out = "edge index: [";
  bool first = true;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (mask && !(mask->weights[e] >= threshold)) continue;
    if (!first) out += ",";
    first = false;
    out += "[" + std::to_string(g.edges[e].first) + "," + std::to_string(g.edges[e].second) + "]";
  }
  out += "] node feature: {";
  for (std::size_t i = 0; i < g.n; ++i) {
    if (i) out += ", ";
    out += std::to_string(i) + ": [";
    for (std::size_t j = 0; j < g.features.cols; ++j) {
      if (j) out += ", ";
      out += detail::format_g(g.features(i, j), 4);
    }
    out += "]";
  }
  return out + "}";
}

inline std::string graph_to_text(const Graph& g, const EdgeMask& mask, double threshold = 0.5) {
  return graph_to_text(g, &mask, threshold);
}

struct ExampleShot {
  std::string graph_text;
  std::string candidate_text;
  double grade = 0.0;
};

struct PromptTemplate {
  std::string task_description;
  double level_lo = 0.0;
  double level_hi = 1.0;
  std::vector<ExampleShot> example_shots;
  double threshold = 0.5;

  std::string grade_levels() const {
    return "[" + detail::format_g(level_lo, 6) + ", " + detail::format_g(level_hi, 6) + "]";
  }
};

inline constexpr std::string_view kRegularizer = "REMEMBER IT: Keep your answer short!";
inline constexpr std::array<std::string_view, 4> kPlaceholders{"<GNN TASK DESCRIPTION>", "<GRADE LEVELS>",
                                                               "<GRAPH SEQ>", "<EXAMPLE SHOT>"};

inline constexpr std::string_view kScaffold =
    "You are grading explanations of a graph neural network.\n"
    "Task: <GNN TASK DESCRIPTION>\n"
    "Give the explanation candidate 'Ge' a grade from <GRADE LEVELS>; a higher grade means 'Ge' is closer to the "
    "ground truth explanation sub-graph of 'G'.\n"
    "Each graph is written as <GRAPH SEQ>, for example edge index: [[0,1],[1,2],[2,0]] node feature: {0: [3.6], "
    "1: [2.4], 2: [9.9]}. 'Ge' keeps the node features of 'G' and lists only its own edges.\n"
    "<EXAMPLE SHOT>"
    "Now grade this pair.\n";

/// Renders the grading prompt for the pair ('G', 'Ge').
inline std::string build_prompt(const Graph& g, const EdgeMask& candidate, const PromptTemplate& t) {
  if (t.task_description.empty()) throw TemplateError("prompt template has no task description");
  if (!(t.level_lo < t.level_hi)) throw TemplateError("prompt template grade levels are empty");
  for (auto token : kPlaceholders)
    if (t.task_description.find(token) != std::string::npos)
      throw TemplateError("task description contains placeholder " + std::string(token));

  std::string shots;
  for (std::size_t k = 0; k < t.example_shots.size(); ++k) {
    const auto& shot = t.example_shots[k];
    shots += "Example " + std::to_string(k + 1) + ":\nG: " + shot.graph_text + "\nGe: " + shot.candidate_text +
             "\nGrade: " + detail::format_g(shot.grade, 6) + "\n";
  }
  std::string out(kScaffold);
  detail::replace_all(out, "<GNN TASK DESCRIPTION>", t.task_description);
  detail::replace_all(out, "<GRADE LEVELS>", t.grade_levels());
  detail::replace_all(out, "<GRAPH SEQ>", "its edge index followed by its node features");
  detail::replace_all(out, "<EXAMPLE SHOT>", shots);
  out += "G: " + graph_to_text(g) + "\nGe: " + graph_to_text(g, candidate, t.threshold) + "\nGrade:\n";
  out += kRegularizer;
  return out;
}

/// First decimal literal in `response`, rescaled linearly from [lo, hi] to [0, 1].
inline GraderScore parse_score(std::string_view response, double lo, double hi) {
  if (!(lo < hi)) throw ParameterError("parse_score: grade levels need lo < hi");
  std::size_t i = 0;
  auto is_digit = [&](std::size_t k) { return k < response.size() && std::isdigit(static_cast<unsigned char>(response[k])); };
  while (i < response.size() && !(is_digit(i) || (response[i] == '.' && is_digit(i + 1)))) ++i;
  if (i == response.size()) throw ScoreParseError("no number in grader reply: \"" + std::string(response) + "\"");
  std::size_t start = i;
  if (start > 0 && response[start - 1] == '-') --start;
  std::size_t end = i;
  while (is_digit(end)) ++end;
  if (end < response.size() && response[end] == '.') {
    ++end;
    while (is_digit(end)) ++end;
  }
  const double v = parse_real(response.substr(start, end - start));
  if (v < lo || v > hi)
    throw ScoreRangeError("grade " + format_real(v) + " outside [" + format_real(lo) + ", " + format_real(hi) + "]");
  return {(v - lo) / (hi - lo), Provenance::Llm, std::string(response)};
}

/// Soft Jaccard overlap with ground truth.
inline GraderScore oracle_grade(const EdgeMask& candidate, const GroundTruth& gt) {
  return {soft_jaccard(candidate.weights, gt.gt_edges), Provenance::Oracle, std::nullopt};
}

inline GraderScore random_grade(Rng& stream) { return {stream.uniform(), Provenance::Random, std::nullopt}; }

/// Scores a batch of candidates for the given dataset instances, in order.
class Grader {
 public:
  virtual ~Grader() = default;
  virtual std::string method() const = 0;
  virtual std::vector<GraderScore> grade(std::span<const std::size_t> instance_ids,
                                         std::span<const EdgeMask> candidates, Rng& stream) = 0;
};

class OracleGrader final : public Grader {
 public:
  explicit OracleGrader(const Dataset& ds) : ds_(ds) {}
  std::string method() const override { return "oracle"; }
  std::vector<GraderScore> grade(std::span<const std::size_t> ids, std::span<const EdgeMask> candidates,
                                 Rng&) override {
    std::vector<GraderScore> out;
    out.reserve(ids.size());
    for (std::size_t t = 0; t < ids.size(); ++t) out.push_back(oracle_grade(candidates[t], ds_.instances.at(ids[t]).truth));
    return out;
  }

 private:
  const Dataset& ds_;
};

class RandomGrader final : public Grader {
 public:
  std::string method() const override { return "random"; }
  std::vector<GraderScore> grade(std::span<const std::size_t> ids, std::span<const EdgeMask>, Rng& stream) override {
    std::vector<GraderScore> out;
    out.reserve(ids.size());
    for (std::size_t t = 0; t < ids.size(); ++t) out.push_back(random_grade(stream));
    return out;
  }
};

class ConstantGrader final : public Grader {
 public:
  explicit ConstantGrader(double s) : s_(s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("constant grade must lie in [0,1]");
  }
  std::string method() const override { return "const:" + detail::format_g(s_, 17); }
  std::vector<GraderScore> grade(std::span<const std::size_t> ids, std::span<const EdgeMask>, Rng&) override {
    return std::vector<GraderScore>(ids.size(), GraderScore{s_, Provenance::Constant, std::nullopt});
  }

 private:
  double s_;
};

namespace detail {
/// A small reference pair: a 5-cycle hanging off a 4-node path by one bridge.
inline Graph example_graph(const std::vector<double>& features) {
  Graph g;
  g.n = 9;
  const std::vector<Edge> undirected{{0, 1}, {1, 2}, {2, 3}, {1, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 8}, {8, 4}};
  for (auto [a, b] : undirected) {
    g.edges.emplace_back(a, b);
    g.edges.emplace_back(b, a);
  }
  g.features = Tensor::column(features);
  return g;
}

inline PromptTemplate shots_for(std::string description, const std::vector<double>& features) {
  const Graph g = example_graph(features);
  const auto g_text = graph_to_text(g);
  auto keep = [&](auto pred) {
    EdgeMask m{std::vector<double>(g.edges.size(), 0.0)};
    for (std::size_t e = 0; e < g.edges.size(); ++e) m.weights[e] = pred(g.edges[e]) ? 1.0 : 0.0;
    return graph_to_text(g, m);
  };
  auto in_cycle = [](std::size_t v) { return v >= 4; };
  PromptTemplate t;
  t.task_description = std::move(description);
  t.example_shots = {
      {g_text, keep([&](Edge e) { return in_cycle(e.first) && in_cycle(e.second); }), 1.0},
      {g_text, keep([&](Edge e) { return in_cycle(e.first) && in_cycle(e.second) && e.first != 8 && e.second != 8; }),
       0.6},
      {g_text, keep([&](Edge e) { return !in_cycle(e.first) || !in_cycle(e.second); }), 0.0},
  };
  return t;
}
}  // namespace detail

inline PromptTemplate counting_template() {
  return detail::shots_for("The ground truth explanation sub-graph 'Ge' of the original graph 'G' is a circle motif.",
                           std::vector<double>(9, 1.0));
}

inline PromptTemplate volume_template() {
  return detail::shots_for(
      "The ground truth explanation sub-graph 'Ge' of the original graph 'G' is a circle motif, and the label of 'G' "
      "is the sum of the node features on that motif.",
      {3.6, 2.4, 9.9, 1.0, 1.1, 7.25, 0.5, 4.0, 6.3});
}

}  // namespace gxplain
