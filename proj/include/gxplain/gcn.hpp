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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gxplain/graph.hpp"
#include "gxplain/io.hpp"
#include "gxplain/optim.hpp"
#include "gxplain/rng.hpp"
#include "gxplain/tensor.hpp"

namespace gxplain {

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The frozen predictor f: three GCN layers, mean-pool readout, linear head.
struct GcnModel {
  Task task = Task::regression();
  std::size_t input_dim = 1;
  std::size_t hidden = 20;
  Tensor w1, b1, w2, b2, w3, b3, head, head_bias;

  static GcnModel init(std::size_t d, std::size_t hidden, Task task, Rng& rng) {
    GcnModel m;
    m.task = task;
    m.input_dim = d;
    m.hidden = hidden;
    m.w1 = glorot(d, hidden, rng);
    m.w2 = glorot(hidden, hidden, rng);
    m.w3 = glorot(hidden, hidden, rng);
    m.head = glorot(hidden, task.classes, rng);
    m.b1 = m.b2 = m.b3 = Tensor(1, hidden);
    m.head_bias = Tensor(1, task.classes);
    return m;
  }

  static constexpr std::array<const char*, 8> kNames{"w1", "b1", "w2", "b2", "w3", "b3", "head", "head_bias"};
  std::array<Tensor*, 8> params() { return {&w1, &b1, &w2, &b2, &w3, &b3, &head, &head_bias}; }
  std::array<const Tensor*, 8> params() const { return {&w1, &b1, &w2, &b2, &w3, &b3, &head, &head_bias}; }

  friend bool operator==(const GcnModel&, const GcnModel&) = default;
};

struct PredictorOutput {
  Tensor node_embeddings;  // n x h
  Tensor graph_embedding;  // 1 x h
  Tensor prediction;       // 1 x C
};

/// Tape handles of one forward pass.
struct GcnVars {
  ad::Var node_embeddings;
  ad::Var graph_embedding;
  ad::Var prediction;
};

/// Model weights recorded on a tape, trainable or constant.
struct GcnBinding {
  std::array<ad::Var, 8> vars;

  GcnBinding(ad::Tape& tape, const GcnModel& m, bool trainable) {
    const auto ps = m.params();
    for (std::size_t k = 0; k < ps.size(); ++k) vars[k] = tape.leaf(*ps[k], trainable);
  }
};

namespace detail {
inline ad::Var propagate(ad::Var adj, ad::Var h, ad::Var w) {
  // Pick the cheaper association; both are exact products.
  if (h.cols() < w.cols()) return ad::matmul(ad::matmul(adj, h), w);
  return ad::matmul(adj, ad::matmul(h, w));
}
}  // namespace detail

/// Records H_i = relu(adj H_{i-1} W_i + b_i), readout = mean over rows,
/// prediction = readout * head + head_bias.
inline GcnVars gcn_record(const GcnBinding& bind, ad::Var adj, ad::Var features) {
  const auto& v = bind.vars;
  if (features.cols() != v[0].rows())
    throw ContractError("feature dimension " + std::to_string(features.cols()) + " != model input dimension " +
                        std::to_string(v[0].rows()));
  if (adj.rows() != features.rows())
    throw ContractError("adjacency is " + adj.value().shape_string() + " for " + std::to_string(features.rows()) +
                        " nodes");
  ad::Var h = ad::relu(ad::add_bias(detail::propagate(adj, features, v[0]), v[1]));
  h = ad::relu(ad::add_bias(detail::propagate(adj, h, v[2]), v[3]));
  h = ad::relu(ad::add_bias(detail::propagate(adj, h, v[4]), v[5]));
  const ad::Var readout = ad::mean_rows(h);
  const ad::Var pred = ad::add_bias(ad::matmul(readout, v[6]), v[7]);
  return {h, readout, pred};
}

/// Forward pass on a (optionally masked) graph.
inline PredictorOutput gcn_forward(const GcnModel& model, const Graph& g, const EdgeMask* mask = nullptr) {
  if (g.feature_dim() != model.input_dim)
    throw ContractError("graph feature dimension " + std::to_string(g.feature_dim()) + " != model input dimension " +
                        std::to_string(model.input_dim));
  ad::Tape tape;
  const GcnBinding bind(tape, model, false);
  const auto adj = tape.constant(normalized_adjacency(g, mask));
  const auto out = gcn_record(bind, adj, tape.constant(g.features));
  return {out.node_embeddings.value(), out.graph_embedding.value(), out.prediction.value()};
}

inline PredictorOutput gcn_forward(const GcnModel& model, const Graph& g, const EdgeMask& mask) {
  return gcn_forward(model, g, &mask);
}

/// Per-graph task loss recorded on a tape.
inline ad::Var task_loss(ad::Tape& tape, ad::Var prediction, const Task& task, double target) {
  if (task.is_regression()) return ad::mse(prediction, tape.constant(Tensor::scalar(target)));
  return ad::softmax_cross_entropy(prediction, static_cast<std::size_t>(target));
}

inline std::size_t argmax(const Tensor& t) {
  return static_cast<std::size_t>(std::max_element(t.data.begin(), t.data.end()) - t.data.begin());
}

struct GnnTrainConfig {
  std::size_t epochs = 1000;
  double lr = 0.005;
  std::size_t hidden = 32;
  std::uint64_t seed = 0;
};

struct GnnTrainReport {
  std::vector<double> train_loss;  // per epoch, before the update
  double train_metric = 0.0;       // mse (regression) or accuracy (classification)
  double val_metric = 0.0;
};

/// Mean task loss and metric of `model` over the given instances.
inline std::pair<double, double> evaluate_gnn(const GcnModel& model, const Dataset& ds,
                                              const std::vector<std::size_t>& idx) {
  if (idx.empty()) return {0.0, 0.0};
  double loss = 0.0, metric = 0.0;
  for (auto i : idx) {
    const auto& g = ds.instances[i].graph;
    const auto out = gcn_forward(model, g);
    ad::Tape tape;
    loss += task_loss(tape, tape.constant(out.prediction), model.task, g.label).value().item();
    if (!model.task.is_regression()) metric += argmax(out.prediction) == static_cast<std::size_t>(g.label) ? 1.0 : 0.0;
  }
  loss /= static_cast<double>(idx.size());
  metric = model.task.is_regression() ? loss : metric / static_cast<double>(idx.size());
  return {loss, metric};
}

/// Full-batch Adam on the mean task loss over the training split.
/// For regression the head starts at zero and its bias at the mean training label.
inline std::pair<GcnModel, GnnTrainReport> train_gnn(const Dataset& ds, const GnnTrainConfig& cfg) {
  if (ds.instances.empty() || ds.splits.train.empty()) throw ParameterError("train_gnn: empty training split");
  RngStreams streams(cfg.seed);
  GcnModel model = GcnModel::init(ds.feature_dim, cfg.hidden, ds.task, streams.init);
  const auto& train = ds.splits.train;
  if (ds.task.is_regression()) {
    double mean_label = 0.0;
    for (auto i : train) mean_label += ds.instances[i].graph.label;
    std::fill(model.head.data.begin(), model.head.data.end(), 0.0);
    model.head_bias.data[0] = mean_label / static_cast<double>(train.size());
  }

  std::vector<Tensor> adjacency;
  adjacency.reserve(train.size());
  for (auto i : train) adjacency.push_back(normalized_adjacency(ds.instances[i].graph));

  Adam opt(cfg.lr);
  GnnTrainReport report;
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::array<Tensor, 8> grads;
    const auto ps = model.params();
    for (std::size_t k = 0; k < ps.size(); ++k) grads[k] = Tensor(ps[k]->rows, ps[k]->cols);
    double epoch_loss = 0.0;
    for (std::size_t t = 0; t < train.size(); ++t) {
      const auto& g = ds.instances[train[t]].graph;
      ad::Tape tape;
      const GcnBinding bind(tape, model, true);
      const auto out = gcn_record(bind, tape.constant(adjacency[t]), tape.constant(g.features));
      const auto loss = ad::scale(task_loss(tape, out.prediction, model.task, g.label), inv_n);
      epoch_loss += loss.value().item();
      tape.backward(loss);
      for (std::size_t k = 0; k < grads.size(); ++k) {
        const auto& gk = bind.vars[k].grad();
        if (gk.size())
          for (std::size_t q = 0; q < gk.size(); ++q) grads[k].data[q] += gk.data[q];
      }
    }
    if (!std::isfinite(epoch_loss))
      throw NumericError("train_gnn: non-finite loss at epoch " + std::to_string(epoch) + " (lr=" + format_real(cfg.lr) +
                         " may be too high)");
    report.train_loss.push_back(epoch_loss);
    opt.step(ps, grads);
  }
  report.train_metric = evaluate_gnn(model, ds, train).second;
  report.val_metric = evaluate_gnn(model, ds, ds.splits.val).second;
  return {std::move(model), std::move(report)};
}

// Model file format:
//   gxplain-gcn 1
//   task regression | task classification <C>
//   d <input dim>
//   hidden <h>
//   then for each of w1 b1 w2 b2 w3 b3 head head_bias:
//   tensor <name> <rows> <cols>
//   <row values> (rows lines, 17 significant digits)

inline std::string serialize_model(const GcnModel& m) {
  std::string out = "gxplain-gcn 1\n";
  out += m.task.is_regression() ? "task regression\n" : "task classification " + std::to_string(m.task.classes) + "\n";
  out += "d " + std::to_string(m.input_dim) + "\nhidden " + std::to_string(m.hidden) + "\n";
  const auto ps = m.params();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const Tensor& t = *ps[k];
    out += std::string("tensor ") + GcnModel::kNames[k] + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) +
           "\n";
    for (std::size_t i = 0; i < t.rows; ++i) {
      for (std::size_t j = 0; j < t.cols; ++j) out += (j ? " " : "") + format_real(t(i, j));
      out += "\n";
    }
  }
  return out;
}

/// Parses a model; when `expected_d` is given it must match the stored input dimension.
inline GcnModel parse_model(std::string_view text, std::optional<std::size_t> expected_d = std::nullopt,
                            const std::string& source = "model") {
  LineReader in(text, source);
  const auto magic = in.next("header");
  if (magic.size() != 2 || magic[0] != "gxplain-gcn" || magic[1] != "1") in.fail("not a gxplain-gcn v1 file");
  GcnModel m;
  const auto task = in.expect("task", -1);
  if (task[0] == "regression" && task.size() == 1)
    m.task = Task::regression();
  else if (task[0] == "classification" && task.size() == 2)
    m.task = Task::classification(in.index(task[1], "classes"));
  else
    in.fail("unknown task specification");
  m.input_dim = in.index(in.expect("d", 1)[0], "d");
  m.hidden = in.index(in.expect("hidden", 1)[0], "hidden");
  if (expected_d && *expected_d != m.input_dim)
    throw LoadError(source + ": model input dimension d=" + std::to_string(m.input_dim) + " but expected d=" +
                    std::to_string(*expected_d));
  const std::size_t h = m.hidden, d = m.input_dim, c = m.task.classes;
  const std::array<std::pair<std::size_t, std::size_t>, 8> shapes{
      {{d, h}, {1, h}, {h, h}, {1, h}, {h, h}, {1, h}, {h, c}, {1, c}}};
  auto ps = m.params();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const auto hdr = in.expect("tensor", 3);
    if (hdr[0] != GcnModel::kNames[k]) in.fail("expected tensor " + std::string(GcnModel::kNames[k]));
    const auto rows = in.index(hdr[1], "rows");
    const auto cols = in.index(hdr[2], "cols");
    if (rows != shapes[k].first || cols != shapes[k].second)
      throw LoadError(source + ": tensor " + hdr[0] + " has shape [" + std::to_string(rows) + "x" +
                      std::to_string(cols) + "], expected [" + std::to_string(shapes[k].first) + "x" +
                      std::to_string(shapes[k].second) + "]");
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      const auto vals = in.next("tensor row");
      if (vals.size() != cols) in.fail("tensor row has " + std::to_string(vals.size()) + " values");
      for (std::size_t j = 0; j < cols; ++j) t(i, j) = in.real(vals[j], hdr[0]);
    }
    *ps[k] = std::move(t);
  }
  if (!in.done()) in.fail("trailing content");
  return m;
}

inline void write_model(const std::filesystem::path& path, const GcnModel& m) { write_file(path, serialize_model(m)); }

inline GcnModel read_model(const std::filesystem::path& path, std::optional<std::size_t> expected_d = std::nullopt) {
  return parse_model(read_file(path), expected_d, path.string());
}

}  // namespace gxplain
