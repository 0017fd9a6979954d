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
#include <span>
#include <vector>

#include "gxplain/grader.hpp"
#include "gxplain/graph.hpp"
#include "gxplain/rng.hpp"
#include "gxplain/tensor.hpp"

namespace gxplain {

/// Standard normal draw per undirected pair, mirrored to both directions.
struct NoiseMask {
  std::vector<double> eps;

  static NoiseMask draw(std::span<const std::size_t> partner, Rng& rng) {
    NoiseMask n;
    n.eps.assign(partner.size(), 0.0);
    for (std::size_t e = 0; e < partner.size(); ++e)
      if (partner[e] >= e) n.eps[e] = n.eps[partner[e]] = rng.normal();
    return n;
  }
};

struct MixedCandidate {
  EdgeMask mask;  // clamp01(pre_clamp)
  GraderScore s_used;
  std::vector<double> pre_clamp;  // s*m0 + (1-s)*eps
};

inline void check_mix_inputs(std::size_t m0_len, double s, const NoiseMask& noise) {
  if (m0_len != noise.eps.size())
    throw ContractError("mix: mask has " + std::to_string(m0_len) + " entries, noise " +
                        std::to_string(noise.eps.size()));
  if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("mix: score outside [0,1]");
}

inline MixedCandidate mix_candidate(const EdgeMask& m0, const GraderScore& s, const NoiseMask& noise) {
  check_mix_inputs(m0.weights.size(), s.s, noise);
  MixedCandidate out;
  out.s_used = s;
  out.pre_clamp.resize(m0.weights.size());
  out.mask.weights.resize(m0.weights.size());
  for (std::size_t e = 0; e < m0.weights.size(); ++e) {
    out.pre_clamp[e] = m0.weights[e] * s.s + (1.0 - s.s) * noise.eps[e];
    out.mask.weights[e] = std::clamp(out.pre_clamp[e], 0.0, 1.0);
  }
  return out;
}

/// Same arithmetic on a tape; s is a constant, so d(mixed)/d(m0) is s inside
/// (0,1) and 0 where clamped.
inline ad::Var record_mix(ad::Tape& tape, ad::Var m0, double s, const NoiseMask& noise) {
  check_mix_inputs(m0.rows() * m0.cols(), s, noise);
  std::vector<double> shifted(noise.eps.size());
  for (std::size_t e = 0; e < shifted.size(); ++e) shifted[e] = (1.0 - s) * noise.eps[e];
  return ad::clamp01(ad::add(ad::scale(m0, s), tape.constant(Tensor::column(std::move(shifted)))));
}

}  // namespace gxplain
