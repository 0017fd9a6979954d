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
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gxplain/bayesian.hpp"
#include "gxplain/dataset_io.hpp"
#include "gxplain/explainer.hpp"
#include "gxplain/gcn.hpp"
#include "gxplain/generators.hpp"
#include "gxplain/grader.hpp"
#include "gxplain/llm.hpp"
#include "gxplain/metrics.hpp"
#include "gxplain/trace.hpp"

namespace gxplain {

/// Raised when one or more runs of an experiment abort.
struct RunFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using nlohmann::json;

// ---------------------------------------------------------------- config

inline const char* update_mode_name(UpdateMode m) { return m == UpdateMode::PerGraph ? "per-graph" : "per-epoch"; }

inline UpdateMode parse_update_mode(std::string_view s) {
  if (s == "per-graph") return UpdateMode::PerGraph;
  if (s == "per-epoch") return UpdateMode::PerEpoch;
  throw ConfigError("update mode must be per-graph or per-epoch (got '" + std::string(s) + "')");
}

inline SizeTermOn parse_size_term(std::string_view s) {
  if (s == "mixed") return SizeTermOn::Mixed;
  if (s == "candidate") return SizeTermOn::Candidate;
  throw ConfigError("size term must be mixed or candidate (got '" + std::string(s) + "')");
}

inline json explainer_config_json(const ExplainerConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"lambda", c.lambda},
          {"gamma", c.gamma},
          {"tau_start", c.tau.start},
          {"tau_end", c.tau.end},
          {"hidden", c.hidden},
          {"update", update_mode_name(c.update)},
          {"size_term", c.size_on == SizeTermOn::Mixed ? "mixed" : "candidate"},
          {"eval_on", c.eval_on_train ? "train" : "test"}};
}

/// Overlays the keys present in `j` onto `c`; unknown keys are rejected.
inline void apply_explainer_json(const json& j, ExplainerConfig& c) {
  if (!j.is_object()) throw ConfigError("explainer settings must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "epochs") c.epochs = v.get<std::size_t>();
    else if (key == "lr") c.lr = v.get<double>();
    else if (key == "lambda") c.lambda = v.get<double>();
    else if (key == "gamma") c.gamma = v.get<double>();
    else if (key == "tau_start") c.tau.start = v.get<double>();
    else if (key == "tau_end") c.tau.end = v.get<double>();
    else if (key == "hidden") c.hidden = v.get<std::size_t>();
    else if (key == "update") c.update = parse_update_mode(v.get<std::string>());
    else if (key == "size_term") c.size_on = parse_size_term(v.get<std::string>());
    else if (key == "eval_on") {
      const auto s = v.get<std::string>();
      if (s != "train" && s != "test") throw ConfigError("eval_on must be train or test");
      c.eval_on_train = s == "train";
    } else throw ConfigError("unknown explainer setting '" + key + "'");
  }
}

inline void validate_explainer_config(const ExplainerConfig& c) {
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(c.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(c.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(c.gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(c.tau.start > 0.0 && c.tau.end > 0.0)) throw ConfigError("temperatures must be positive");
  if (c.hidden < 1) throw ConfigError("explainer hidden size must be >= 1");
}

struct DatasetSpec {
  std::optional<std::filesystem::path> path;
  std::string task = "volume";
  std::size_t n_graphs = 625;
  std::uint64_t seed = 0;
};

struct ModelSpec {
  std::optional<std::filesystem::path> path;
  GnnTrainConfig train;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ModelSpec model;
  std::vector<std::string> methods{"baseline", "oracle", "random"};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  ExplainerConfig explainer;
  GradingConfig grading;
  std::optional<LlmConfig> llm;
  std::string llm_task = "counting";  // prompt template family
  std::size_t jobs = 1;
  std::filesystem::path out = "results";
};

/// Checks a grader method name: baseline | oracle | random | llm | const:<v>.
inline void validate_method(const std::string& m) {
  if (m == "baseline" || m == "none" || m == "oracle" || m == "random" || m == "llm") return;
  if (m.rfind("const:", 0) == 0) {
    double v = 0.0;
    try {
      v = parse_real(std::string_view(m).substr(6));
    } catch (const ParseError&) {
      throw ConfigError("bad constant grade in '" + m + "'");
    }
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("constant grade must lie in [0,1]: '" + m + "'");
    return;
  }
  throw ConfigError("unknown grader '" + m + "'");
}

inline LlmConfig parse_llm_json(const json& j) {
  LlmConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "endpoint") c.endpoint = v.get<std::string>();
    else if (key == "model") c.model = v.get<std::string>();
    else if (key == "api_key_env") c.api_key_env = v.get<std::string>();
    else if (key == "timeout") c.timeout_seconds = v.get<double>();
    else if (key == "max_retries") c.max_retries = v.get<int>();
    else if (key == "backoff") c.backoff_seconds = v.get<double>();
    else if (key == "cache") c.cache_path = v.get<std::string>();
    else if (key == "max_in_flight") c.max_in_flight = v.get<std::size_t>();
    else throw ConfigError("unknown llm setting '" + key + "'");
  }
  return c;
}

/// JSON experiment configuration; see README for the schema.
inline ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base = {}) {
  ExperimentConfig cfg;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  try {
    const auto j = json::parse(text);
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      if (key == "dataset") {
        for (const auto& [k, x] : v.items()) {
          if (k == "path") cfg.dataset.path = resolve(x.get<std::string>());
          else if (k == "task") cfg.dataset.task = x.get<std::string>();
          else if (k == "n_graphs") cfg.dataset.n_graphs = x.get<std::size_t>();
          else if (k == "seed") cfg.dataset.seed = x.get<std::uint64_t>();
          else throw ConfigError("unknown dataset setting '" + k + "'");
        }
      } else if (key == "model") {
        for (const auto& [k, x] : v.items()) {
          if (k == "path") cfg.model.path = resolve(x.get<std::string>());
          else if (k == "epochs") cfg.model.train.epochs = x.get<std::size_t>();
          else if (k == "lr") cfg.model.train.lr = x.get<double>();
          else if (k == "hidden") cfg.model.train.hidden = x.get<std::size_t>();
          else if (k == "seed") cfg.model.train.seed = x.get<std::uint64_t>();
          else throw ConfigError("unknown model setting '" + k + "'");
        }
      } else if (key == "methods") {
        cfg.methods = v.get<std::vector<std::string>>();
      } else if (key == "seeds") {
        cfg.seeds = v.get<std::vector<std::uint64_t>>();
      } else if (key == "epochs") {
        cfg.explainer.epochs = v.get<std::size_t>();
      } else if (key == "explainer") {
        apply_explainer_json(v, cfg.explainer);
      } else if (key == "grading") {
        for (const auto& [k, x] : v.items()) {
          if (k == "period") cfg.grading.period = x.get<std::size_t>();
          else if (k == "fallback") cfg.grading.fallback = parse_fallback(x.get<std::string>());
          else throw ConfigError("unknown grading setting '" + k + "'");
        }
      } else if (key == "llm") {
        cfg.llm = parse_llm_json(v);
        if (!cfg.llm->cache_path.empty()) cfg.llm->cache_path = resolve(cfg.llm->cache_path.string());
      } else if (key == "prompt_task") {
        cfg.llm_task = v.get<std::string>();
      } else if (key == "jobs") {
        cfg.jobs = v.get<std::size_t>();
      } else if (key == "out") {
        cfg.out = resolve(v.get<std::string>());
      } else {
        throw ConfigError("unknown experiment setting '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (cfg.methods.empty()) throw ConfigError("methods must be nonempty");
  for (const auto& m : cfg.methods) validate_method(m);
  if (!cfg.dataset.path && cfg.dataset.task != "counting" && cfg.dataset.task != "volume")
    throw ConfigError("dataset task must be counting or volume (got '" + cfg.dataset.task + "')");
  if (cfg.grading.period < 1) throw ConfigError("grading period must be >= 1");
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
  if (cfg.llm_task != "counting" && cfg.llm_task != "volume") throw ConfigError("prompt_task must be counting or volume");
  validate_explainer_config(cfg.explainer);
  if (std::find(cfg.methods.begin(), cfg.methods.end(), "llm") != cfg.methods.end() && !cfg.llm)
    throw ConfigError("method llm needs an llm section");
  return cfg;
}

// ---------------------------------------------------------------- runs

inline std::string config_hash(const std::string& dataset_name, const std::string& method, std::uint64_t seed,
                               const ExplainerConfig& c, const GradingConfig& g) {
  const json j{{"dataset", dataset_name},
               {"method", method},
               {"seed", seed},
               {"explainer", explainer_config_json(c)},
               {"period", g.period},
               {"fallback", static_cast<int>(g.fallback)}};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

/// Builds the grader for a method name; nullptr means the plain baseline.
inline std::unique_ptr<Grader> make_grader(const std::string& method, const Dataset& ds, LlmClient* client,
                                           const PromptTemplate& tmpl) {
  validate_method(method);
  if (method == "baseline" || method == "none") return nullptr;
  if (method == "oracle") return std::make_unique<OracleGrader>(ds);
  if (method == "random") return std::make_unique<RandomGrader>();
  if (method == "llm") {
    if (!client) throw ConfigError("llm grader requested without endpoint configuration");
    return std::make_unique<LlmGrader>(ds, *client, tmpl);
  }
  return std::make_unique<ConstantGrader>(parse_real(std::string_view(method).substr(6)));
}

inline ExplainResult run_method(const Dataset& ds, const GcnModel& f, const std::string& method,
                                const ExplainerConfig& cfg, const GradingConfig& grading, LlmClient* client,
                                const PromptTemplate& tmpl) {
  auto grader = make_grader(method, ds, client, tmpl);
  auto r = grader ? train_llmexplainer(ds, f, *grader, grading, cfg) : train_baseline(ds, f, cfg);
  r.trace.meta.config_hash = config_hash(ds.name, r.trace.meta.method, cfg.seed, cfg, grading);
  return r;
}

// Explainer weight file: `gxplain-explainer 1`, `embedding <h>`, `hidden <k>`,
// then `tensor <name> <rows> <cols>` blocks for w1 b1 w2 b2.
inline std::string serialize_explainer(const ExplainerParams& p) {
  static constexpr const char* kNames[4] = {"w1", "b1", "w2", "b2"};
  std::string out = "gxplain-explainer 1\nembedding " + std::to_string(p.embedding_dim) + "\nhidden " +
                    std::to_string(p.hidden) + "\n";
  const auto ps = p.params();
  for (std::size_t k = 0; k < 4; ++k) {
    const Tensor& t = *ps[k];
    out += std::string("tensor ") + kNames[k] + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) + "\n";
    for (std::size_t i = 0; i < t.rows; ++i) {
      for (std::size_t j = 0; j < t.cols; ++j) out += (j ? " " : "") + format_real(t(i, j));
      out += "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------- report

inline std::string run_stem(const RunMetadata& m) {
  std::string method = m.method;
  std::replace(method.begin(), method.end(), ':', '-');
  return method + "_seed" + std::to_string(m.seed);
}

inline json metadata_json(const RunMetadata& m) {
  return {{"dataset", m.dataset}, {"method", m.method}, {"seed", m.seed}, {"config_hash", m.config_hash}};
}

/// Writes `<stem>.csv` (trace rows) and `<stem>.meta.json` into dir.
inline std::filesystem::path write_trace(const std::filesystem::path& dir, const TrainingTrace& t) {
  const auto stem = run_stem(t.meta);
  write_file(dir / (stem + ".csv"), serialize_trace_rows(t));
  write_file(dir / (stem + ".meta.json"), metadata_json(t.meta).dump(2) + "\n");
  return dir / (stem + ".csv");
}

inline TrainingTrace read_trace(const std::filesystem::path& csv) {
  TrainingTrace t;
  t.rows = parse_trace_rows(read_file(csv), csv.string());
  auto meta_path = csv;
  meta_path.replace_extension(".meta.json");
  try {
    const auto j = json::parse(read_file(meta_path));
    t.meta = {j.at("dataset").get<std::string>(), j.at("method").get<std::string>(), j.at("seed").get<std::uint64_t>(),
              j.at("config_hash").get<std::string>()};
  } catch (const json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  t.validate();
  return t;
}

/// All traces in dir, in file-name order.
inline std::vector<TrainingTrace> read_traces(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<TrainingTrace> out;
  for (const auto& f : files) out.push_back(read_trace(f));
  return out;
}

struct ResultRow {
  std::string dataset;
  std::string method;
  std::size_t runs = 0;
  double mean_auc = 0.0;  // final epoch
  double std_auc = 0.0;
  double mean_peak_auc = 0.0;
  double std_peak_auc = 0.0;
  std::optional<double> improvement;  // mean_auc minus the baseline's mean_auc
};

/// Groups traces by (dataset, method) in first-appearance order, seeds ascending.
inline std::vector<ResultRow> aggregate(std::vector<TrainingTrace> traces) {
  std::stable_sort(traces.begin(), traces.end(),
                   [](const TrainingTrace& a, const TrainingTrace& b) { return a.meta.seed < b.meta.seed; });
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& t : traces) {
    const auto key = std::make_pair(t.meta.dataset, t.meta.method);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].first.push_back(t.final_auc());
    groups[key].second.push_back(t.peak_auc());
  }
  auto method_rank = [](const std::string& m) { return m == "baseline" ? 0 : 1; };
  std::stable_sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    if (method_rank(a.second) != method_rank(b.second)) return method_rank(a.second) < method_rank(b.second);
    return a.second < b.second;
  });
  std::vector<ResultRow> rows;
  for (const auto& key : keys) {
    const auto& [finals, peaks] = groups[key];
    const auto f = mean_std(finals);
    const auto p = mean_std(peaks);
    rows.push_back({key.first, key.second, finals.size(), f.mean, f.std, p.mean, p.std, std::nullopt});
  }
  for (auto& r : rows)
    for (const auto& b : rows)
      if (b.dataset == r.dataset && b.method == "baseline" && r.method != "baseline") r.improvement = r.mean_auc - b.mean_auc;
  return rows;
}

/// results.csv, results.json and the long-format curves.csv.
inline void emit_report(const std::vector<TrainingTrace>& traces, const std::filesystem::path& outdir) {
  const auto rows = aggregate(traces);
  std::string csv = "dataset,method,runs,mean_auc,std_auc,mean_peak_auc,std_peak_auc,improvement\n";
  json arr = json::array();
  for (const auto& r : rows) {
    csv += r.dataset + "," + r.method + "," + std::to_string(r.runs) + "," + format_real(r.mean_auc) + "," +
           format_real(r.std_auc) + "," + format_real(r.mean_peak_auc) + "," + format_real(r.std_peak_auc) + "," +
           (r.improvement ? format_real(*r.improvement) : "") + "\n";
    json row{{"dataset", r.dataset},
             {"method", r.method},
             {"runs", r.runs},
             {"mean_auc", r.mean_auc},
             {"std_auc", r.std_auc},
             {"mean_peak_auc", r.mean_peak_auc},
             {"std_peak_auc", r.std_peak_auc},
             {"improvement", r.improvement ? json(*r.improvement) : json(nullptr)}};
    arr.push_back(std::move(row));
  }
  write_file(outdir / "results.csv", csv);
  write_file(outdir / "results.json", json{{"results", arr}}.dump(2) + "\n");

  std::vector<const TrainingTrace*> order;
  for (const auto& t : traces) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](const TrainingTrace* a, const TrainingTrace* b) {
    return std::tie(a->meta.dataset, a->meta.method, a->meta.seed) <
           std::tie(b->meta.dataset, b->meta.method, b->meta.seed);
  });
  std::string curves = "dataset,method,seed,epoch,mean_loss,mean_s,eval_auc,max_grad_norm\n";
  for (const auto* t : order)
    for (const auto& r : t->rows)
      curves += t->meta.dataset + "," + t->meta.method + "," + std::to_string(t->meta.seed) + "," +
                std::to_string(r.epoch) + "," + format_real(r.mean_loss) + "," + format_real(r.mean_s) + "," +
                format_real(r.eval_auc) + "," + format_real(r.max_grad_norm) + "\n";
  write_file(outdir / "curves.csv", curves);
}

// ---------------------------------------------------------------- experiment

struct ExperimentOutcome {
  std::vector<TrainingTrace> traces;
  std::vector<ResultRow> rows;
  std::vector<std::string> failures;
};

inline Dataset load_or_generate(const DatasetSpec& spec) {
  if (spec.path) return read_dataset(*spec.path);
  return make_dataset(parse_synthetic_task(spec.task), spec.n_graphs, spec.seed, {});
}

/// Runs every (seed, method) pair, writes traces under out/runs and the report
/// under out. Completed runs are kept when others fail; failures raise
/// RunFailure (or GraderUnavailable) after the report is written.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  const Dataset ds = load_or_generate(cfg.dataset);
  GcnModel f;
  if (cfg.model.path) {
    f = read_model(*cfg.model.path, ds.feature_dim);
  } else {
    f = train_gnn(ds, cfg.model.train).first;
    write_model(cfg.out / "model.txt", f);
  }
  if (!cfg.dataset.path) write_dataset(cfg.out / "data.txt", ds);

  std::unique_ptr<LlmClient> client;
  if (cfg.llm) client = std::make_unique<LlmClient>(*cfg.llm);
  const PromptTemplate tmpl = cfg.llm_task == "volume" ? volume_template() : counting_template();

  struct Job {
    std::uint64_t seed;
    std::string method;
  };
  std::vector<Job> jobs;
  for (auto seed : cfg.seeds)
    for (const auto& m : cfg.methods) jobs.push_back({seed, m == "none" ? "baseline" : m});

  std::vector<std::optional<TrainingTrace>> done(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::vector<int> unavailable(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        auto ec = cfg.explainer;
        ec.seed = jobs[i].seed;
        auto r = run_method(ds, f, jobs[i].method, ec, cfg.grading, client.get(), tmpl);
        write_trace(cfg.out / "runs", r.trace);
        done[i] = std::move(r.trace);
      } catch (const GraderUnavailable& e) {
        unavailable[i] = 1;
        errors[i] = e.what();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n_workers = std::min(cfg.jobs, jobs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentOutcome out;
  bool any_unavailable = false;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (done[i]) out.traces.push_back(std::move(*done[i]));
    if (!errors[i].empty()) {
      out.failures.push_back(jobs[i].method + " seed " + std::to_string(jobs[i].seed) + ": " + errors[i]);
      any_unavailable |= unavailable[i] != 0;
    }
  }
  out.rows = aggregate(out.traces);
  emit_report(out.traces, cfg.out);
  if (!out.failures.empty()) {
    std::string msg = std::to_string(out.failures.size()) + " run(s) failed";
    for (const auto& f : out.failures) msg += "\n  " + f;
    if (any_unavailable) throw GraderUnavailable(msg);
    throw RunFailure(msg);
  }
  return out;
}

}  // namespace gxplain
