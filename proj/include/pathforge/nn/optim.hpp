// Copyright 2026 The Pathforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pathforge/nn/graph.hpp"

namespace pathforge::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are created on the first step and
// must keep matching the parameter list afterwards.
template <class T>
struct Adam {
  AdamConfig cfg;
  std::int64_t steps = 0;
  std::vector<Tensor<T>> m, v;

  Adam() = default;
  explicit Adam(AdamConfig c) : cfg(c) {}

  void step(const std::vector<Parameter<T>*>& params) {
    if (m.empty()) {
      for (auto* p : params) {
        m.emplace_back(p->value.shape);
        v.emplace_back(p->value.shape);
      }
    }
    if (m.size() != params.size()) throw ShapeMismatch("adam: parameter count changed");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i]->grad.shape != m[i].shape || params[i]->value.shape != m[i].shape)
        throw ShapeMismatch("adam: " + params[i]->name + " is " + shape_str(params[i]->value.shape) +
                            ", moments are " + shape_str(m[i].shape));
    ++steps;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(steps));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T step_size = static_cast<T>(cfg.lr / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2), eps = static_cast<T>(cfg.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = params[i]->value.data;
      const auto& g = params[i]->grad.data;
      auto& mi = m[i].data;
      auto& vi = v[i].data;
      for (std::size_t k = 0; k < w.size(); ++k) {
        mi[k] = b1 * mi[k] + (T(1) - b1) * g[k];
        vi[k] = b2 * vi[k] + (T(1) - b2) * g[k] * g[k];
        w[k] -= step_size * mi[k] / (std::sqrt(vi[k] * inv_c2) + eps);
      }
    }
  }
};

// Uniform in ±sqrt(1 / (in_ch * 16)).
template <class T>
void init_uniform(Tensor<T>& t, int in_ch, CounterRng& rng) {
  const double bound = std::sqrt(1.0 / (in_ch * 16.0));
  for (auto& x : t.data) x = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace pathforge::nn
