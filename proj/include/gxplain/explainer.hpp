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
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gxplain/gcn.hpp"
#include "gxplain/graph.hpp"
#include "gxplain/metrics.hpp"
#include "gxplain/mixing.hpp"
#include "gxplain/optim.hpp"
#include "gxplain/rng.hpp"
#include "gxplain/tensor.hpp"
#include "gxplain/trace.hpp"

namespace gxplain {

/// Edge scorer g: MLP over concatenated endpoint embeddings (2h -> hidden -> 1).
struct ExplainerParams {
  std::size_t embedding_dim = 20;
  std::size_t hidden = 64;
  Tensor w1, b1, w2, b2;

  static ExplainerParams init(std::size_t embedding_dim, std::size_t hidden, Rng& rng) {
    ExplainerParams p;
    p.embedding_dim = embedding_dim;
    p.hidden = hidden;
    p.w1 = glorot(2 * embedding_dim, hidden, rng);
    p.b1 = Tensor(1, hidden);
    p.w2 = glorot(hidden, 1, rng);
    p.b2 = Tensor(1, 1);
    return p;
  }

  std::array<Tensor*, 4> params() { return {&w1, &b1, &w2, &b2}; }
  std::array<const Tensor*, 4> params() const { return {&w1, &b1, &w2, &b2}; }

  friend bool operator==(const ExplainerParams&, const ExplainerParams&) = default;
};

struct ExplainerBinding {
  std::array<ad::Var, 4> vars;
  ExplainerBinding(ad::Tape& tape, const ExplainerParams& p, bool trainable) {
    const auto ps = p.params();
    for (std::size_t k = 0; k < ps.size(); ++k) vars[k] = tape.leaf(*ps[k], trainable);
  }
};

/// Annealed temperature: start * (end/start)^((epoch-1)/(epochs-1)), epochs 1-based.
struct Temperature {
  double start = 5.0;
  double end = 1.0;

  double at(std::size_t epoch, std::size_t epochs) const {
    if (!(start > 0.0) || !(end > 0.0)) throw ParameterError("temperature must be positive");
    if (epochs <= 1) return start;
    const double frac = static_cast<double>(epoch - 1) / static_cast<double>(epochs - 1);
    return start * std::pow(end / start, frac);
  }
};

/// Rows [emb[src], emb[dst]] for every edge.
inline Tensor edge_input_matrix(const Tensor& emb, const std::vector<Edge>& edges) {
  Tensor z(edges.size(), 2 * emb.cols);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [s, d] = edges[e];
    if (s >= emb.rows || d >= emb.rows) throw ContractError("edge endpoint beyond embedding rows");
    for (std::size_t j = 0; j < emb.cols; ++j) {
      z(e, j) = emb(s, j);
      z(e, emb.cols + j) = emb(d, j);
    }
  }
  return z;
}

/// Per-graph constants derived from the frozen predictor.
struct GraphContext {
  const Graph* graph = nullptr;
  std::vector<std::size_t> flat_edges;
  std::vector<std::size_t> partner;
  Tensor edge_inputs;  // E x 2h
  double target = 0.0;  // f(G): regression output or predicted class index
};

inline double prediction_target(const Tensor& prediction, const Task& task) {
  return task.is_regression() ? prediction.data[0] : static_cast<double>(argmax(prediction));
}

inline GraphContext make_context(const GcnModel& f, const Graph& g) {
  GraphContext ctx;
  ctx.graph = &g;
  ctx.flat_edges = g.flat_edges();
  ctx.partner = g.reverse_index();
  const auto out = gcn_forward(f, g);
  ctx.edge_inputs = edge_input_matrix(out.node_embeddings, g.edges);
  ctx.target = prediction_target(out.prediction, f.task);
  return ctx;
}

/// Records omega = pair_average(MLP(edge_inputs)).
inline ad::Var record_edge_logits(ad::Tape& tape, const ExplainerBinding& bind, const Tensor& edge_inputs,
                                  std::span<const std::size_t> partner) {
  const auto& v = bind.vars;
  if (edge_inputs.cols != v[0].rows())
    throw ContractError("edge input width " + std::to_string(edge_inputs.cols) + " != explainer input " +
                        std::to_string(v[0].rows()));
  const auto hidden = ad::relu(ad::add_bias(ad::matmul(tape.constant(edge_inputs), v[0]), v[1]));
  const auto raw = ad::add_bias(ad::matmul(hidden, v[2]), v[3]);
  return ad::pair_average(raw, partner);
}

/// Symmetrised edge logits omega for every edge of g given node embeddings.
inline std::vector<double> edge_logits(const ExplainerParams& params, const Tensor& embeddings, const Graph& g) {
  if (embeddings.rows != g.n)
    throw ContractError("embedding rows " + std::to_string(embeddings.rows) + " != node count " + std::to_string(g.n));
  ad::Tape tape;
  const ExplainerBinding bind(tape, params, false);
  const auto partner = g.reverse_index();
  return record_edge_logits(tape, bind, edge_input_matrix(embeddings, g.edges), partner).value().data;
}

/// Logistic noise ln u - ln(1-u), one draw per undirected pair (in edge order
/// of the pair's first appearance) mirrored to both directions.
inline std::vector<double> draw_logistic_noise(std::span<const std::size_t> partner, Rng& rng,
                                               std::vector<double>* u_out = nullptr) {
  std::vector<double> noise(partner.size());
  if (u_out) u_out->assign(partner.size(), 0.0);
  for (std::size_t e = 0; e < partner.size(); ++e) {
    if (partner[e] < e) continue;
    const double u = rng.uniform_open();
    noise[e] = noise[partner[e]] = std::log(u) - std::log(1.0 - u);
    if (u_out) (*u_out)[e] = (*u_out)[partner[e]] = u;
  }
  return noise;
}

/// Binary-concrete candidate sigmoid((omega + noise) / tau) on a tape.
inline ad::Var record_candidate(ad::Tape& tape, ad::Var logits, const std::vector<double>& noise, double tau) {
  return ad::sigmoid(ad::scale(ad::add(logits, tape.constant(Tensor::column(noise))), 1.0 / tau));
}

/// Stochastic relaxed mask; `u_out` receives the uniforms drawn per edge.
inline EdgeMask sample_mask(std::span<const double> logits, std::span<const std::size_t> partner, double tau, Rng& rng,
                            std::vector<double>* u_out = nullptr) {
  if (!(tau > 0.0)) throw ParameterError("temperature must be positive");
  if (logits.size() != partner.size()) throw ContractError("sample_mask: logits and pairing differ in length");
  const auto noise = draw_logistic_noise(partner, rng, u_out);
  ad::Tape tape;
  const auto w = tape.constant(Tensor::column({logits.begin(), logits.end()}));
  return {record_candidate(tape, w, noise, tau).value().data};
}

/// Evaluation-mode mask sigmoid(omega).
inline EdgeMask deterministic_mask(std::span<const double> logits) {
  EdgeMask m;
  m.weights.reserve(logits.size());
  for (double x : logits) m.weights.push_back(sigmoid(x));
  return m;
}

struct GibLoss {
  double size_term = 0.0;
  double label_term = 0.0;
  double lambda = 1.0;
  double total = 0.0;
};

struct GibLossVars {
  ad::Var size_term;
  ad::Var label_term;
  ad::Var total;
  double lambda = 1.0;

  GibLoss values() const {
    return {size_term.value().item(), label_term.value().item(), lambda, total.value().item()};
  }
};

/// size = mean(mask) + gamma * mean(binary entropy(mask));
/// label = task loss of the masked prediction against the target;
/// total = size + lambda * label.
inline GibLossVars record_gib_loss(ad::Tape& tape, ad::Var prediction, double target, ad::Var size_mask, double lambda,
                                   double gamma, const Task& task) {
  auto size = ad::mean(size_mask);
  if (gamma != 0.0) size = ad::add(size, ad::scale(ad::mean(ad::binary_entropy(size_mask)), gamma));
  const auto label = task_loss(tape, prediction, task, target);
  const auto total = ad::add(size, ad::scale(label, lambda));
  for (auto v : {size, label, total})
    if (!std::isfinite(v.value().item())) throw NumericError("non-finite GIB loss component");
  return {size, label, total, lambda};
}

/// Plain evaluation of the GIB loss for a prediction on the masked graph.
inline GibLoss gib_loss(const PredictorOutput& out, double target, const EdgeMask& mask, double lambda, double gamma,
                        const Task& task) {
  for (double w : mask.weights)
    if (!std::isfinite(w)) throw NumericError("non-finite mask weight");
  ad::Tape tape;
  return record_gib_loss(tape, tape.constant(out.prediction), target, tape.constant(Tensor::column(mask.weights)),
                         lambda, gamma, task)
      .values();
}

/// f evaluated on the graph re-weighted by `mask`.
inline ad::Var record_masked_prediction(ad::Tape& tape, const GcnBinding& f, const GraphContext& ctx, ad::Var mask) {
  const auto adj = ad::normalized_adjacency(mask, ctx.flat_edges, ctx.graph->n);
  return gcn_record(f, adj, tape.constant(ctx.graph->features)).prediction;
}

enum class UpdateMode { PerGraph, PerEpoch };
enum class SizeTermOn { Mixed, Candidate };

struct ExplainerConfig {
  std::size_t epochs = 100;
  double lr = 0.003;
  double lambda = 1.0;
  double gamma = 0.1;
  Temperature tau{5.0, 1.0};
  std::uint64_t seed = 0;
  std::size_t hidden = 64;
  UpdateMode update = UpdateMode::PerEpoch;
  SizeTermOn size_on = SizeTermOn::Mixed;  // only consulted when mixing is active
  bool eval_on_train = false;
};

/// Supplies fitting scores for a batch of candidates, in the given order.
using ScoreFn = std::function<std::vector<double>(std::size_t epoch, std::span<const std::size_t> instance_ids,
                                                  std::span<const EdgeMask> candidates, Rng& grader_stream)>;

struct ExplainResult {
  ExplainerParams initial;
  ExplainerParams params;
  TrainingTrace trace;
};

/// Mean per-graph AUC of deterministic masks over `ids`, skipping single-class graphs.
inline double evaluate_auc(const ExplainerParams& params, const Dataset& ds, const std::vector<GraphContext>& contexts,
                           const std::vector<std::size_t>& ids) {
  double total = 0.0;
  std::size_t counted = 0;
  for (auto i : ids) {
    ad::Tape tape;
    const ExplainerBinding bind(tape, params, false);
    const auto omega = record_edge_logits(tape, bind, contexts[i].edge_inputs, contexts[i].partner);
    const auto mask = deterministic_mask(omega.value().data);
    try {
      total += auc_roc(mask.weights, ds.instances[i].truth.gt_edges);
      ++counted;
    } catch (const UndefinedMetricError&) {
    }
  }
  return counted ? total / static_cast<double>(counted) : 0.5;
}

namespace detail {

/// Shared training loop. With `score` empty this is the plain GIB baseline;
/// otherwise each candidate is mixed as s*m0 + (1-s)*eps, clamped to [0,1].
/// Ground truth is read only by the tracer (eval AUC, baseline score curve).
inline ExplainResult run_explainer(const Dataset& ds, const GcnModel& f, const ExplainerConfig& cfg,
                                   const ScoreFn& score) {
  if (ds.splits.train.empty()) throw ParameterError("explainer training needs a nonempty training split");
  if (cfg.epochs < 1) throw ParameterError("epochs must be >= 1");
  RngStreams streams(cfg.seed);
  ExplainResult result;
  result.initial = ExplainerParams::init(f.hidden, cfg.hidden, streams.init);
  result.params = result.initial;
  auto& params = result.params;

  std::vector<GraphContext> contexts(ds.instances.size());
  auto eval_ids = cfg.eval_on_train ? ds.splits.train : ds.splits.test;
  if (eval_ids.empty()) eval_ids = ds.splits.train;
  std::vector<int> needed(ds.instances.size(), 0);
  for (auto i : ds.splits.train) needed[i] = 1;
  for (auto i : eval_ids) needed[i] = 1;
  for (std::size_t i = 0; i < ds.instances.size(); ++i)
    if (needed[i]) contexts[i] = make_context(f, ds.instances[i].graph);

  Adam opt(cfg.lr);
  const bool mixing = static_cast<bool>(score);
  const auto& train = ds.splits.train;
  const double inv_n = 1.0 / static_cast<double>(train.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double tau = cfg.tau.at(epoch, cfg.epochs);
    std::vector<std::size_t> order = train;
    streams.shuffle.shuffle(order);

    // One graph step: returns total loss and adds d(total * weight)/d(alpha) into grads.
    auto graph_step = [&](std::size_t inst, const std::vector<double>& logistic, double s, const NoiseMask& noise,
                          double weight, std::array<Tensor, 4>& grads) {
      const auto& ctx = contexts[inst];
      ad::Tape tape;
      const ExplainerBinding bind(tape, params, true);
      const GcnBinding fbind(tape, f, false);
      const auto omega = record_edge_logits(tape, bind, ctx.edge_inputs, ctx.partner);
      const auto m0 = record_candidate(tape, omega, logistic, tau);
      ad::Var mixed = m0;
      ad::Var size_mask = m0;
      if (mixing) {
        mixed = record_mix(tape, m0, s, noise);
        if (cfg.size_on == SizeTermOn::Mixed) size_mask = mixed;
      }
      const auto pred = record_masked_prediction(tape, fbind, ctx, mixed);
      GibLossVars loss;
      try {
        loss = record_gib_loss(tape, pred, ctx.target, size_mask, cfg.lambda, cfg.gamma, f.task);
      } catch (const NumericError& e) {
        throw NumericError("explainer loss at epoch " + std::to_string(epoch) + ", instance " + std::to_string(inst) +
                           ": " + e.what());
      }
      const auto root = weight == 1.0 ? loss.total : ad::scale(loss.total, weight);
      tape.backward(root);
      for (std::size_t k = 0; k < 4; ++k) {
        const auto& gk = bind.vars[k].grad();
        if (gk.size())
          for (std::size_t q = 0; q < gk.size(); ++q) grads[k].data[q] += gk.data[q];
      }
      return loss.total.value().item();
    };

    auto candidate_of = [&](std::size_t inst, const std::vector<double>& logistic) {
      ad::Tape tape;
      const ExplainerBinding bind(tape, params, false);
      const auto omega = record_edge_logits(tape, bind, contexts[inst].edge_inputs, contexts[inst].partner);
      return EdgeMask{record_candidate(tape, omega, logistic, tau).value().data};
    };

    auto fresh_grads = [&] {
      std::array<Tensor, 4> g;
      const auto ps = params.params();
      for (std::size_t k = 0; k < 4; ++k) g[k] = Tensor(ps[k]->rows, ps[k]->cols);
      return g;
    };

    TraceRow row;
    row.epoch = epoch;
    double loss_sum = 0.0, s_sum = 0.0;

    if (cfg.update == UpdateMode::PerEpoch) {
      std::vector<std::vector<double>> logistic(order.size());
      std::vector<EdgeMask> candidates(order.size());
      for (std::size_t t = 0; t < order.size(); ++t) {
        logistic[t] = draw_logistic_noise(contexts[order[t]].partner, streams.mask);
        candidates[t] = candidate_of(order[t], logistic[t]);
      }
      std::vector<double> scores(order.size(), 1.0);
      if (mixing) {
        scores = score(epoch, order, candidates, streams.grader);
        if (scores.size() != order.size()) throw ContractError("grader returned wrong number of scores");
      } else {
        for (std::size_t t = 0; t < order.size(); ++t)
          scores[t] = soft_jaccard(candidates[t].weights, ds.instances[order[t]].truth.gt_edges);
      }
      auto grads = fresh_grads();
      for (std::size_t t = 0; t < order.size(); ++t) {
        NoiseMask noise;
        if (mixing) noise = NoiseMask::draw(contexts[order[t]].partner, streams.noise);
        loss_sum += graph_step(order[t], logistic[t], scores[t], noise, inv_n, grads);
        s_sum += scores[t];
      }
      row.max_grad_norm = l2_norm(grads);
      opt.step(params.params(), grads);
    } else {
      for (std::size_t t = 0; t < order.size(); ++t) {
        const auto inst = order[t];
        const auto logistic = draw_logistic_noise(contexts[inst].partner, streams.mask);
        double s = 1.0;
        NoiseMask noise;
        if (mixing) {
          const auto cand = candidate_of(inst, logistic);
          const std::size_t id[1] = {inst};
          const auto sv = score(epoch, id, std::span<const EdgeMask>(&cand, 1), streams.grader);
          if (sv.size() != 1) throw ContractError("grader returned wrong number of scores");
          s = sv[0];
          noise = NoiseMask::draw(contexts[inst].partner, streams.noise);
          s_sum += s;
        } else {
          s_sum += soft_jaccard(candidate_of(inst, logistic).weights, ds.instances[inst].truth.gt_edges);
        }
        auto grads = fresh_grads();
        loss_sum += graph_step(inst, logistic, s, noise, 1.0, grads);
        row.max_grad_norm = std::max(row.max_grad_norm, l2_norm(grads));
        opt.step(params.params(), grads);
      }
    }
    row.mean_loss = loss_sum * (cfg.update == UpdateMode::PerEpoch ? 1.0 : inv_n);
    row.mean_s = s_sum * inv_n;
    row.eval_auc = evaluate_auc(params, ds, contexts, eval_ids);
    result.trace.rows.push_back(row);
  }
  return result;
}

}  // namespace detail

/// GIB-only training of the edge scorer against the frozen predictor `f`.
/// The trace's mean_s column records the soft-Jaccard overlap of the sampled
/// candidates with ground truth, as a diagnostic only.
inline ExplainResult train_baseline(const Dataset& ds, const GcnModel& f, const ExplainerConfig& cfg) {
  auto r = detail::run_explainer(ds, f, cfg, {});
  r.trace.meta.dataset = ds.name;
  r.trace.meta.method = "baseline";
  r.trace.meta.seed = cfg.seed;
  return r;
}

}  // namespace gxplain
