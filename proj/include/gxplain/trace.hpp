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
#include <string>
#include <vector>

#include "gxplain/io.hpp"

namespace gxplain {

struct TraceRow {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_s = 0.0;
  double eval_auc = 0.0;
  double max_grad_norm = 0.0;  // largest per-update gradient norm w.r.t. explainer parameters
  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct RunMetadata {
  std::string dataset;
  std::string method;  // baseline | oracle | random | llm | const:<v>
  std::uint64_t seed = 0;
  std::string config_hash;
  friend bool operator==(const RunMetadata&, const RunMetadata&) = default;
};

/// Per-epoch curves of one explainer run.
struct TrainingTrace {
  RunMetadata meta;
  std::vector<TraceRow> rows;

  double final_auc() const { return rows.empty() ? 0.0 : rows.back().eval_auc; }
  double peak_auc() const {
    double best = 0.0;
    for (const auto& r : rows) best = std::max(best, r.eval_auc);
    return best;
  }
  /// Epochs contiguous from 1, every AUC within [0,1].
  void validate() const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].epoch != i + 1) throw ParseError("trace epochs are not contiguous from 1");
      if (!(rows[i].eval_auc >= 0.0 && rows[i].eval_auc <= 1.0)) throw ParseError("trace AUC outside [0,1]");
    }
  }
  friend bool operator==(const TrainingTrace&, const TrainingTrace&) = default;
};

inline constexpr const char* kTraceHeader = "epoch,mean_loss,mean_s,eval_auc,max_grad_norm";

/// Delimited text: one header line and one line per epoch.
inline std::string serialize_trace_rows(const TrainingTrace& t) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const auto& r : t.rows)
    out += std::to_string(r.epoch) + "," + format_real(r.mean_loss) + "," + format_real(r.mean_s) + "," +
           format_real(r.eval_auc) + "," + format_real(r.max_grad_norm) + "\n";
  return out;
}

inline std::vector<TraceRow> parse_trace_rows(std::string_view text, const std::string& source = "trace") {
  std::vector<TraceRow> rows;
  std::size_t line_no = 0, start = 0;
  bool header_seen = false;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kTraceHeader) throw ParseError(source + " line " + std::to_string(line_no) + ": unexpected trace header");
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> cells;
    std::size_t c0 = 0;
    for (;;) {
      const auto comma = line.find(',', c0);
      cells.push_back(line.substr(c0, comma == std::string_view::npos ? std::string_view::npos : comma - c0));
      if (comma == std::string_view::npos) break;
      c0 = comma + 1;
    }
    if (cells.size() != 5) throw ParseError(source + " line " + std::to_string(line_no) + ": expected 5 columns");
    try {
      rows.push_back({parse_index(cells[0]), parse_real(cells[1]), parse_real(cells[2]), parse_real(cells[3]),
                      parse_real(cells[4])});
    } catch (const ParseError& e) {
      throw ParseError(source + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) throw ParseError(source + ": empty trace file");
  return rows;
}

}  // namespace gxplain
