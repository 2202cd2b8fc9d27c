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

// Central finite-difference check of Graph gradients, intended for double.

#include <algorithm>
#include <cmath>
#include <vector>

#include "pathforge/nn/graph.hpp"

namespace pathforge::nn {

// `build(graph, ids)` must record a scalar loss from the leaf ids and return
// its id. Returns the worst per-input relative error
// ||analytic - numeric|| / max(||analytic||, ||numeric||).
template <class Build>
double gradcheck(const std::vector<Tensor<double>>& inputs, Build&& build, double h = 1e-3) {
  auto eval = [&](const std::vector<Tensor<double>>& xs) {
    Graph<double> g(false);
    std::vector<int> ids;
    for (const auto& x : xs) ids.push_back(g.input(x));
    return g.scalar(build(g, ids));
  };
  Graph<double> g;
  std::vector<int> ids;
  for (const auto& x : inputs) ids.push_back(g.leaf(x));
  g.backward(build(g, ids));

  double worst = 0.0;
  std::vector<Tensor<double>> xs = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor<double>& analytic = g.grad(ids[k]);
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = xs[k].data[i];
      xs[k].data[i] = x0 + h;
      const double up = eval(xs);
      xs[k].data[i] = x0 - h;
      const double down = eval(xs);
      xs[k].data[i] = x0;
      const double num = (up - down) / (2 * h);
      const double a = analytic.data.empty() ? 0.0 : analytic.data[i];
      diff2 += (a - num) * (a - num);
      a2 += a * a;
      n2 += num * num;
    }
    const double scale = std::sqrt(std::max(a2, n2));
    if (scale > 0) worst = std::max(worst, std::sqrt(diff2) / scale);
  }
  return worst;
}

}  // namespace pathforge::nn
