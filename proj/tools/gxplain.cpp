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

// gxplain command-line driver.
// Exit codes: 0 success, 2 configuration error, 3 run failure, 4 grader unavailable.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gxplain/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRunFailure = 3;
constexpr int kGraderUnavailable = 4;

struct GenDataArgs {
  std::string task;
  std::size_t n_graphs = 0;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::uint64_t seed = 0;
  std::string out;
  gxplain::GnnTrainConfig cfg;
};

struct ExplainArgs {
  std::string data, model, grader, out;
  gxplain::ExplainerConfig cfg;
  std::string update = "per-epoch", size_term = "mixed", eval_on = "test";
  std::size_t period = 1;
  std::string fallback = "fail";
  std::string llm_endpoint, llm_model, llm_cache, prompt_task;
  int llm_retries = 2;
  double llm_timeout = 60.0, llm_backoff = 1.0;
  std::size_t llm_in_flight = 4;
};

int gen_data(const GenDataArgs& a) {
  const auto ds = gxplain::make_dataset(gxplain::parse_synthetic_task(a.task), a.n_graphs, a.seed, {});
  gxplain::write_dataset(a.out, ds);
  std::printf("wrote %zu instances (%s) to %s\n", ds.instances.size(), ds.name.c_str(), a.out.c_str());
  return kOk;
}

int train(TrainArgs a) {
  const auto ds = gxplain::read_dataset(a.data);
  a.cfg.seed = a.seed;
  const auto [model, report] = gxplain::train_gnn(ds, a.cfg);
  gxplain::write_model(a.out, model);
  const char* metric = ds.task.is_regression() ? "mse" : "accuracy";
  std::printf("train %s %.6g, val %s %.6g; model written to %s\n", metric, report.train_metric, metric,
              report.val_metric, a.out.c_str());
  return kOk;
}

int explain(ExplainArgs a) {
  gxplain::validate_method(a.grader);
  a.cfg.update = gxplain::parse_update_mode(a.update);
  a.cfg.size_on = gxplain::parse_size_term(a.size_term);
  if (a.eval_on != "train" && a.eval_on != "test") throw gxplain::ConfigError("--eval-on must be train or test");
  a.cfg.eval_on_train = a.eval_on == "train";
  gxplain::validate_explainer_config(a.cfg);
  const gxplain::GradingConfig grading{a.period, gxplain::parse_fallback(a.fallback)};
  if (grading.period < 1) throw gxplain::ConfigError("--grade-period must be >= 1");

  const auto ds = gxplain::read_dataset(a.data);
  const auto f = gxplain::read_model(a.model, ds.feature_dim);

  std::unique_ptr<gxplain::LlmClient> client;
  if (a.grader == "llm") {
    gxplain::LlmConfig lc;
    lc.endpoint = a.llm_endpoint;
    lc.model = a.llm_model;
    lc.cache_path = a.llm_cache;
    lc.max_retries = a.llm_retries;
    lc.timeout_seconds = a.llm_timeout;
    lc.backoff_seconds = a.llm_backoff;
    lc.max_in_flight = a.llm_in_flight;
    client = std::make_unique<gxplain::LlmClient>(lc);
  }
  std::string prompt_task = a.prompt_task;
  if (prompt_task.empty()) prompt_task = ds.name.find("volume") != std::string::npos ? "volume" : "counting";
  const auto tmpl = prompt_task == "volume" ? gxplain::volume_template() : gxplain::counting_template();

  const auto r = gxplain::run_method(ds, f, a.grader, a.cfg, grading, client.get(), tmpl);
  const auto trace_path = gxplain::write_trace(a.out, r.trace);
  gxplain::write_file(std::filesystem::path(a.out) / (gxplain::run_stem(r.trace.meta) + ".explainer.txt"),
                      gxplain::serialize_explainer(r.params));
  std::printf("%s seed %llu: final AUC %.6f, peak AUC %.6f; trace %s\n", r.trace.meta.method.c_str(),
              static_cast<unsigned long long>(a.cfg.seed), r.trace.final_auc(), r.trace.peak_auc(),
              trace_path.string().c_str());
  return kOk;
}

int experiment(const std::string& path) {
  const auto text = gxplain::read_file(path);
  const auto cfg = gxplain::parse_experiment_config(text, std::filesystem::path(path).parent_path());
  const auto out = gxplain::run_experiment(cfg);
  for (const auto& row : out.rows)
    std::printf("%-20s %-12s final %.4f +- %.4f  peak %.4f +- %.4f\n", row.dataset.c_str(), row.method.c_str(),
                row.mean_auc, row.std_auc, row.mean_peak_auc, row.std_peak_auc);
  return kOk;
}

int report(const std::string& runs, const std::string& out) {
  const auto traces = gxplain::read_traces(runs);
  if (traces.empty()) throw gxplain::ConfigError("no trace files in " + runs);
  gxplain::emit_report(traces, out);
  std::printf("aggregated %zu traces into %s\n", traces.size(), out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gxplain: graph explainer training with graded candidate mixing"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic motif dataset");
  gen->add_option("--task", gd.task, "counting | volume")->required()->check(CLI::IsMember({"counting", "volume"}));
  gen->add_option("--n-graphs", gd.n_graphs, "number of instances")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gd.seed, "generator seed")->required();
  gen->add_option("--out", gd.out, "dataset file")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train-gnn", "train the GCN to be explained");
  tr->add_option("--data", ta.data, "dataset file")->required();
  tr->add_option("--epochs", ta.cfg.epochs, "full-batch epochs")->required()->check(CLI::PositiveNumber);
  tr->add_option("--seed", ta.seed, "initialisation seed")->required();
  tr->add_option("--out", ta.out, "model file")->required();
  tr->add_option("--lr", ta.cfg.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--hidden", ta.cfg.hidden, "hidden width")->capture_default_str();

  ExplainArgs ea;
  ea.cfg.epochs = 100;
  auto* ex = app.add_subcommand("explain", "train an explainer against a frozen model");
  ex->add_option("--data", ea.data, "dataset file")->required();
  ex->add_option("--model", ea.model, "model file")->required();
  ex->add_option("--grader", ea.grader, "oracle | random | llm | const:<v> | none")->required();
  ex->add_option("--epochs", ea.cfg.epochs, "explainer epochs")->capture_default_str();
  ex->add_option("--seed", ea.cfg.seed, "run seed")->required();
  ex->add_option("--lambda", ea.cfg.lambda, "label-term weight")->capture_default_str();
  ex->add_option("--out", ea.out, "output directory")->required();
  ex->add_option("--lr", ea.cfg.lr, "Adam learning rate")->capture_default_str();
  ex->add_option("--gamma", ea.cfg.gamma, "entropy weight in the size term")->capture_default_str();
  ex->add_option("--tau-start", ea.cfg.tau.start, "initial temperature")->capture_default_str();
  ex->add_option("--tau-end", ea.cfg.tau.end, "final temperature")->capture_default_str();
  ex->add_option("--update", ea.update, "per-epoch | per-graph")->capture_default_str();
  ex->add_option("--size-term", ea.size_term, "mixed | candidate")->capture_default_str();
  ex->add_option("--eval-on", ea.eval_on, "test | train")->capture_default_str();
  ex->add_option("--grade-period", ea.period, "grade every k-th epoch")->capture_default_str();
  ex->add_option("--grader-fallback", ea.fallback, "fail | cache | one")->capture_default_str();
  ex->add_option("--llm-endpoint", ea.llm_endpoint, "chat-completion URL");
  ex->add_option("--llm-model", ea.llm_model, "model name");
  ex->add_option("--llm-cache", ea.llm_cache, "response cache file");
  ex->add_option("--llm-max-retries", ea.llm_retries, "retries after the first attempt")->capture_default_str();
  ex->add_option("--llm-timeout", ea.llm_timeout, "request timeout in seconds")->capture_default_str();
  ex->add_option("--llm-backoff", ea.llm_backoff, "base backoff in seconds")->capture_default_str();
  ex->add_option("--llm-max-in-flight", ea.llm_in_flight, "concurrent requests")->capture_default_str();
  ex->add_option("--prompt-task", ea.prompt_task, "counting | volume (default: from dataset name)");

  std::string config_path;
  auto* expt = app.add_subcommand("experiment", "run a seed sweep from a JSON config");
  expt->add_option("--config", config_path, "config file")->required();

  std::string runs_dir, report_out;
  auto* rep = app.add_subcommand("report", "aggregate trace files");
  rep->add_option("--runs", runs_dir, "directory of trace files")->required();
  rep->add_option("--out", report_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*gen) return gen_data(gd);
    if (*tr) return train(ta);
    if (*ex) return explain(ea);
    if (*expt) return experiment(config_path);
    if (*rep) return report(runs_dir, report_out);
  } catch (const gxplain::GraderUnavailable& e) {
    std::cerr << "grader unavailable: " << e.what() << "\n";
    return kGraderUnavailable;
  } catch (const gxplain::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const gxplain::ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const gxplain::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const gxplain::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const gxplain::LoadError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kRunFailure;
  }
  return kConfigError;
}
