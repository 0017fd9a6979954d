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

// Chat-completion grading client. Requires OpenSSL (https endpoints and the
// prompt hash) and a thread library.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "gxplain/grader.hpp"
#include "gxplain/io.hpp"

namespace gxplain {

struct LlmConfig {
  std::string endpoint;  // full URL of the chat-completion route
  std::string model;
  std::string api_key_env = "LLM_API_KEY";
  double timeout_seconds = 60.0;
  int max_retries = 2;
  double backoff_seconds = 1.0;  // wait before retry k is backoff * 2^(k-1)
  std::filesystem::path cache_path;  // empty: in-memory only
  std::size_t max_in_flight = 4;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

struct CacheRecord {
  std::string hash;
  double s = 0.0;
  std::string raw;
};

/// Append-only JSON-lines store keyed by prompt hash. Reads share a lock,
/// writes are serialized.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path path = {}) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        CacheRecord r{j.at("hash").get<std::string>(), j.at("s").get<double>(), j.at("raw").get<std::string>()};
        records_[r.hash] = std::move(r);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path_.string() + " line " + std::to_string(line_no) + ": bad cache record: " + e.what());
      }
    }
  }

  std::optional<CacheRecord> find(const std::string& hash) const {
    std::shared_lock lock(mu_);
    const auto it = records_.find(hash);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  void put(const CacheRecord& r) {
    std::unique_lock lock(mu_);
    records_[r.hash] = r;
    if (path_.empty()) return;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to cache " + path_.string());
    out << nlohmann::json{{"hash", r.hash}, {"s", r.s}, {"raw", r.raw}}.dump() << "\n";
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return records_.size();
  }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, CacheRecord> records_;
};

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' has no scheme");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("endpoint scheme must be http or https: " + url);
  const auto slash = url.find('/', scheme_end + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline std::string chat_request_body(const std::string& model, const std::string& prompt) {
  return nlohmann::json{{"model", model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", 0}}
      .dump();
}

/// choices[0].message.content of a chat-completion reply.
inline std::string extract_reply(const std::string& body) {
  try {
    return nlohmann::json::parse(body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ScoreParseError(std::string("malformed chat-completion reply: ") + e.what());
  }
}

inline constexpr const char* kClarification = "Reply with a single number only.";

class LlmClient {
 public:
  LlmClient(LlmConfig cfg, double level_lo = 0.0, double level_hi = 1.0)
      : cfg_(std::move(cfg)), lo_(level_lo), hi_(level_hi), cache_(cfg_.cache_path) {
    if (cfg_.endpoint.empty() || cfg_.model.empty()) throw ConfigError("llm grader needs an endpoint and a model");
    if (cfg_.max_retries < 0) throw ConfigError("max retries must be >= 0");
    endpoint_ = split_endpoint(cfg_.endpoint);
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key) throw ConfigError("environment variable " + cfg_.api_key_env + " is not set");
    api_key_ = key;
  }

  GraderScore grade(const std::string& prompt) {
    const auto hash = sha256_hex(prompt);
    if (auto hit = cache_.find(hash)) return {hit->s, Provenance::Cache, hit->raw};

    std::string content = prompt;
    std::string last_error;
    bool transport_failure = false;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0 && transport_failure && cfg_.backoff_seconds > 0.0)
        std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.backoff_seconds * std::ldexp(1.0, attempt - 1)));
      std::string body;
      transport_failure = !post(content, body, last_error);
      if (transport_failure) continue;
      try {
        auto score = parse_score(extract_reply(body), lo_, hi_);
        cache_.put({hash, score.s, *score.raw_response});
        return score;
      } catch (const ScoreParseError& e) {
        last_error = e.what();
      } catch (const ScoreRangeError& e) {
        last_error = e.what();
      }
      content = prompt + "\n" + kClarification;
    }
    throw GraderUnavailable("llm grader failed after " + std::to_string(cfg_.max_retries + 1) +
                            " attempts: " + last_error);
  }

  /// Grades all prompts with at most max_in_flight requests outstanding.
  /// Results follow input order; any failure raises after all workers finish.
  std::vector<GraderScore> grade_batch(const std::vector<std::string>& prompts) {
    std::vector<std::optional<GraderScore>> results(prompts.size());
    std::vector<std::string> errors(prompts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < prompts.size(); i = next++) {
        try {
          results[i] = grade(prompts[i]);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };
    const std::size_t n_workers = std::min<std::size_t>(std::max<std::size_t>(cfg_.max_in_flight, 1), prompts.size());
    if (n_workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    std::vector<GraderScore> out;
    out.reserve(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (!results[i]) throw GraderUnavailable("prompt " + std::to_string(i) + ": " + errors[i]);
      out.push_back(std::move(*results[i]));
    }
    return out;
  }

  std::size_t network_calls() const { return calls_.load(); }
  const ResponseCache& cache() const { return cache_; }

 private:
  bool post(const std::string& content, std::string& body, std::string& error) {
    ++calls_;
    httplib::Client cli(endpoint_.scheme_host_port);
    const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
    cli.set_connection_timeout(secs);
    cli.set_read_timeout(secs);
    cli.set_write_timeout(secs);
    const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
    const auto res = cli.Post(endpoint_.path, headers, chat_request_body(cfg_.model, content), "application/json");
    if (!res) {
      error = "transport error: " + httplib::to_string(res.error());
      return false;
    }
    if (res->status != 200) {
      error = "HTTP status " + std::to_string(res->status);
      return false;
    }
    body = res->body;
    return true;
  }

  LlmConfig cfg_;
  double lo_, hi_;
  Endpoint endpoint_;
  std::string api_key_;
  ResponseCache cache_;
  std::atomic<std::size_t> calls_{0};
};

/// Grades candidates by rendering prompts for the dataset instance they explain.
class LlmGrader final : public Grader {
 public:
  LlmGrader(const Dataset& ds, LlmClient& client, PromptTemplate tmpl)
      : ds_(ds), client_(client), tmpl_(std::move(tmpl)) {}
  std::string method() const override { return "llm"; }
  std::vector<GraderScore> grade(std::span<const std::size_t> ids, std::span<const EdgeMask> candidates,
                                 Rng&) override {
    std::vector<std::string> prompts;
    prompts.reserve(ids.size());
    for (std::size_t t = 0; t < ids.size(); ++t)
      prompts.push_back(build_prompt(ds_.instances.at(ids[t]).graph, candidates[t], tmpl_));
    return client_.grade_batch(prompts);
  }

 private:
  const Dataset& ds_;
  LlmClient& client_;
  PromptTemplate tmpl_;
};

}  // namespace gxplain
