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

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gxplain/explainer.hpp"
#include "gxplain/grader.hpp"
#include "gxplain/mixing.hpp"

namespace gxplain {

enum class FallbackPolicy { Fail, Cache, One };

inline FallbackPolicy parse_fallback(std::string_view s) {
  if (s == "fail") return FallbackPolicy::Fail;
  if (s == "cache") return FallbackPolicy::Cache;
  if (s == "one") return FallbackPolicy::One;
  throw ConfigError("grader fallback must be fail, cache or one (got '" + std::string(s) + "')");
}

struct GradingConfig {
  std::size_t period = 1;  // grade on epochs 1, 1+k, 1+2k, ...; reuse the last score otherwise
  FallbackPolicy fallback = FallbackPolicy::Fail;
};

/// Explainer training with score-weighted noise mixing of every candidate.
inline ExplainResult train_llmexplainer(const Dataset& ds, const GcnModel& f, Grader& grader,
                                        const GradingConfig& grading, const ExplainerConfig& cfg) {
  if (grading.period < 1) throw ConfigError("grading period must be >= 1");
  std::vector<std::optional<double>> last(ds.instances.size());

  ScoreFn score = [&](std::size_t epoch, std::span<const std::size_t> ids, std::span<const EdgeMask> candidates,
                      Rng& stream) {
    const bool fresh = (epoch - 1) % grading.period == 0;
    std::vector<double> s(ids.size(), 0.0);
    std::vector<std::size_t> pending_ids;
    std::vector<EdgeMask> pending;
    std::vector<std::size_t> slots;
    for (std::size_t t = 0; t < ids.size(); ++t) {
      if (fresh || !last[ids[t]]) {
        pending_ids.push_back(ids[t]);
        pending.push_back(candidates[t]);
        slots.push_back(t);
      } else {
        s[t] = *last[ids[t]];
      }
    }
    if (pending.empty()) return s;
    try {
      const auto graded = grader.grade(pending_ids, pending, stream);
      if (graded.size() != pending.size()) throw ContractError("grader returned wrong number of scores");
      for (std::size_t q = 0; q < slots.size(); ++q) {
        s[slots[q]] = graded[q].s;
        last[pending_ids[q]] = graded[q].s;
      }
    } catch (const GraderUnavailable&) {
      if (grading.fallback == FallbackPolicy::Fail) throw;
      for (std::size_t q = 0; q < slots.size(); ++q) {
        if (grading.fallback == FallbackPolicy::One) {
          s[slots[q]] = 1.0;
        } else if (last[pending_ids[q]]) {
          s[slots[q]] = *last[pending_ids[q]];
        } else {
          throw;
        }
      }
    }
    return s;
  };

  auto r = detail::run_explainer(ds, f, cfg, score);
  r.trace.meta.dataset = ds.name;
  r.trace.meta.method = grader.method();
  r.trace.meta.seed = cfg.seed;
  return r;
}

struct AttenuationReport {
  double s = 0.0;
  double grad_norm_mixed = 0.0;     // |d label / d m0| through the mix
  double grad_norm_baseline = 0.0;  // |d label / d G| with the mixed mask fed in directly
  double ratio = 0.0;
};

namespace detail {
/// Label term of f on `mask` for a prepared context.
inline ad::Var record_label_term(ad::Tape& tape, const GcnModel& f, const GraphContext& ctx, ad::Var mask) {
  const GcnBinding fbind(tape, f, false);
  return task_loss(tape, record_masked_prediction(tape, fbind, ctx, mask), f.task, ctx.target);
}
}  // namespace detail

/// Compares the label-term gradient w.r.t. the candidate m0 = sigmoid(omega)
/// through the mix against the gradient at the same mixed point without the mix.
inline AttenuationReport gradient_attenuation_diag(const GcnModel& f, const ExplainerParams& alpha, const Graph& g,
                                                   const std::function<GraderScore(const EdgeMask&)>& grade,
                                                   const NoiseMask& noise) {
  const auto ctx = make_context(f, g);
  EdgeMask m0;
  {
    ad::Tape tape;
    const ExplainerBinding bind(tape, alpha, false);
    m0 = deterministic_mask(record_edge_logits(tape, bind, ctx.edge_inputs, ctx.partner).value().data);
  }
  const GraderScore s = grade(m0);
  const auto mixed = mix_candidate(m0, s, noise);

  AttenuationReport rep;
  rep.s = s.s;
  {
    ad::Tape tape;
    const auto leaf = tape.leaf(Tensor::column(m0.weights), true);
    tape.backward(detail::record_label_term(tape, f, ctx, record_mix(tape, leaf, s.s, noise)));
    rep.grad_norm_mixed = l2_norm(std::span<const Tensor>(&leaf.grad(), 1));
  }
  {
    ad::Tape tape;
    const auto leaf = tape.leaf(Tensor::column(mixed.mask.weights), true);
    tape.backward(detail::record_label_term(tape, f, ctx, leaf));
    rep.grad_norm_baseline = l2_norm(std::span<const Tensor>(&leaf.grad(), 1));
  }
  rep.ratio = rep.grad_norm_baseline > 0.0 ? rep.grad_norm_mixed / rep.grad_norm_baseline : 0.0;
  return rep;
}

/// KL(mixed || candidate) estimates over the candidate's support (m0 >= 0.5).
struct KlEstimate {
  double direct = 0.0;  // mean of p ln(p / m0), p = s*m0 + (1-s)*eps, over p > 0
  double approx = 0.0;  // (1-s) * mean(eps - m0)
  std::size_t support = 0;
};

inline KlEstimate kl_estimates(const EdgeMask& m0, double s, const NoiseMask& noise, double support_threshold = 0.5) {
  check_mix_inputs(m0.weights.size(), s, noise);
  KlEstimate k;
  double direct = 0.0, approx = 0.0;
  std::size_t direct_n = 0;
  for (std::size_t e = 0; e < m0.weights.size(); ++e) {
    const double m = m0.weights[e];
    if (!(m >= support_threshold)) continue;
    ++k.support;
    approx += noise.eps[e] - m;
    const double p = s * m + (1.0 - s) * noise.eps[e];
    if (p > 0.0) {
      direct += p * std::log(p / m);
      ++direct_n;
    }
  }
  if (k.support) k.approx = (1.0 - s) * approx / static_cast<double>(k.support);
  if (direct_n) k.direct = direct / static_cast<double>(direct_n);
  return k;
}

struct VariationalDiagnostics {
  double L_E_hat = 0.0;
  double L_E_stderr = 0.0;
  double L_C_hat = 0.0;  // appendix approximation when s >= 0.9, direct estimator otherwise
  double L_C_direct = 0.0;
  double L_C_approx = 0.0;
  double mean_s = 0.0;
  double grad_norm = 0.0;  // mean |d label / d m0| over the draws
};

/// Monte Carlo estimates over K resampled (candidate, noise) draws. The error
/// term uses the label term of f on the mixed mask.
inline VariationalDiagnostics variational_diagnostics(const GcnModel& f, const ExplainerParams& alpha, const Graph& g,
                                                      const std::function<GraderScore(const EdgeMask&)>& grade,
                                                      std::size_t samples, std::uint64_t seed, double tau = 1.0) {
  if (samples < 2) throw ParameterError("variational_diagnostics needs at least 2 samples");
  const auto ctx = make_context(f, g);
  RngStreams streams(seed);
  std::vector<double> losses;
  losses.reserve(samples);
  VariationalDiagnostics d;
  for (std::size_t k = 0; k < samples; ++k) {
    ad::Tape tape;
    const ExplainerBinding bind(tape, alpha, false);
    const auto omega = record_edge_logits(tape, bind, ctx.edge_inputs, ctx.partner);
    const auto logistic = draw_logistic_noise(ctx.partner, streams.mask);
    const auto w = tape.constant(Tensor::column(omega.value().data));
    const EdgeMask m0{record_candidate(tape, w, logistic, tau).value().data};
    const auto s = grade(m0);
    const auto noise = NoiseMask::draw(ctx.partner, streams.noise);

    const auto leaf = tape.leaf(Tensor::column(m0.weights), true);
    const auto label = detail::record_label_term(tape, f, ctx, record_mix(tape, leaf, s.s, noise));
    tape.backward(label);
    losses.push_back(label.value().item());
    d.grad_norm += l2_norm(std::span<const Tensor>(&leaf.grad(), 1));

    const auto kl = kl_estimates(m0, s.s, noise);
    d.L_C_direct += kl.direct;
    d.L_C_approx += kl.approx;
    d.mean_s += s.s;
  }
  const double K = static_cast<double>(samples);
  const auto ms = mean_std(losses);
  d.L_E_hat = ms.mean;
  d.L_E_stderr = ms.std * std::sqrt(K / (K - 1.0)) / std::sqrt(K);
  d.L_C_direct /= K;
  d.L_C_approx /= K;
  d.mean_s /= K;
  d.grad_norm /= K;
  d.L_C_hat = d.mean_s >= 0.9 ? d.L_C_approx : d.L_C_direct;
  for (double v : {d.L_E_hat, d.L_C_hat, d.grad_norm})
    if (!std::isfinite(v)) throw NumericError("variational diagnostics produced a non-finite value");
  return d;
}

}  // namespace gxplain
