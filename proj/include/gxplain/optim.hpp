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
#include <span>
#include <vector>

#include "gxplain/rng.hpp"
#include "gxplain/tensor.hpp"

namespace gxplain {

/// Adam over a fixed list of parameter tensors. A zero gradient leaves a
/// parameter bitwise unchanged as long as its moment estimates are zero.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
    if (params.size() != grads.size()) throw ContractError("Adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const auto* p : params) {
        m_.emplace_back(p->rows, p->cols);
        v_.emplace_back(p->rows, p->cols);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k]->data;
      const auto& g = grads[k].data;
      auto& m = m_[k].data;
      auto& v = v_[k].data;
      if (g.size() != p.size()) throw ContractError("Adam: gradient shape mismatch");
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        const double update = lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        if (update != 0.0) p[i] -= update;
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

/// Glorot/Xavier uniform initialisation.
inline Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (auto& x : t.data) x = rng.uniform(-limit, limit);
  return t;
}

inline double l2_norm(std::span<const Tensor> ts) {
  double s = 0.0;
  for (const auto& t : ts)
    for (double x : t.data) s += x * x;
  return std::sqrt(s);
}

}  // namespace gxplain
