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

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gxplain {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 17 significant digits: enough for an exact double round trip.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(std::string_view tok) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("not a real number: '" + std::string(tok) + "'");
  return v;
}

inline std::size_t parse_index(std::string_view tok) {
  std::size_t v = 0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("not a non-negative integer: '" + std::string(tok) + "'");
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

/// Whitespace-token reader over lines, reporting 1-based line numbers in errors.
class LineReader {
 public:
  explicit LineReader(std::string_view text, std::string source = "input") : source_(std::move(source)) {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string_view::npos) nl = text.size();
      lines_.emplace_back(text.substr(start, nl - start));
      start = nl + 1;
    }
    while (!lines_.empty() && lines_.back().empty()) lines_.pop_back();
  }

  bool done() const { return pos_ >= lines_.size(); }
  std::size_t line_number() const { return pos_; }

  /// Next line split into tokens; throws at end of input.
  std::vector<std::string> next(std::string_view what) {
    if (done()) fail("unexpected end of file while reading " + std::string(what));
    std::istringstream ss(lines_[pos_++]);
    std::vector<std::string> toks;
    for (std::string t; ss >> t;) toks.push_back(t);
    return toks;
  }

  /// Next line, which must start with `key` and carry exactly `arity` values
  /// (or at least one value when arity < 0).
  std::vector<std::string> expect(std::string_view key, int arity) {
    auto toks = next(key);
    if (toks.empty() || toks[0] != key) fail("expected '" + std::string(key) + "'");
    toks.erase(toks.begin());
    if ((arity >= 0 && toks.size() != static_cast<std::size_t>(arity)) || (arity < 0 && toks.empty()))
      fail("field '" + std::string(key) + "' has " + std::to_string(toks.size()) + " values");
    return toks;
  }

  double real(const std::string& tok, std::string_view field) {
    try {
      return parse_real(tok);
    } catch (const ParseError& e) {
      fail(std::string(field) + ": " + e.what());
    }
  }
  std::size_t index(const std::string& tok, std::string_view field) {
    try {
      return parse_index(tok);
    } catch (const ParseError& e) {
      fail(std::string(field) + ": " + e.what());
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(source_ + " line " + std::to_string(pos_) + ": " + msg);
  }

 private:
  std::string source_;
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

}  // namespace gxplain
