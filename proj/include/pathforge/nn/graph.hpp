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

// Tape-based reverse-mode differentiation over the ops in ops.hpp. Nodes are
// appended in forward order; backward walks the tape in reverse and
// accumulates gradients, so a value feeding several consumers receives the
// sum of their contributions.

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pathforge/nn/ops.hpp"

namespace pathforge::nn {

struct GraphNotRecorded : Error {
  explicit GraphNotRecorded(const std::string& w) : Error("GraphNotRecorded", w) {}
};

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}
  void zero_grad() { grad = Tensor<T>(value.shape); }
};

template <class T>
class Graph {
 public:
  using Id = int;

  // With record = false no backward closures are kept (inference mode).
  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Id input(Tensor<T> v) { return push(std::move(v), false); }
  Id leaf(Tensor<T> v) { return push(std::move(v), record_); }
  Id param(Parameter<T>& p) {
    const Id id = push(p.value, record_);
    if (record_) params_.emplace_back(id, &p);
    return id;
  }

  const Tensor<T>& value(Id id) const { return nodes_.at(id).value; }
  const Tensor<T>& grad(Id id) const { return nodes_.at(id).grad; }
  T scalar(Id id) const { return nodes_.at(id).value.data.at(0); }

  Id conv(Id x, Id w, Id b) {
    Tensor<T> y = conv_forward(value(x), value(w), value(b));
    return op(std::move(y), {x, w, b}, [x, w, b](Graph& g, Id self) {
      Tensor<T>* dx = g.needs(x) ? &g.grad_buf(x) : nullptr;
      conv_backward(g.value(x), g.value(w), g.grad(self), dx, g.grad_buf(w), g.grad_buf(b));
    });
  }

  Id deconv(Id x, Id w, Id b) {
    Tensor<T> y = deconv_forward(value(x), value(w), value(b));
    return op(std::move(y), {x, w, b}, [x, w, b](Graph& g, Id self) {
      Tensor<T>* dx = g.needs(x) ? &g.grad_buf(x) : nullptr;
      deconv_backward(g.value(x), g.value(w), g.grad(self), dx, g.grad_buf(w), g.grad_buf(b));
    });
  }

  Id relu(Id x) {
    return op(nn::relu(value(x)), {x}, [x](Graph& g, Id self) {
      const auto& xv = g.value(x).data;
      const auto& dy = g.grad(self).data;
      auto& dx = g.grad_buf(x).data;
      for (std::size_t i = 0; i < dy.size(); ++i)
        if (xv[i] > T(0)) dx[i] += dy[i];
    });
  }

  Id sigmoid(Id x) {
    return op(nn::sigmoid(value(x)), {x}, [x](Graph& g, Id self) {
      const auto& y = g.value(self).data;
      const auto& dy = g.grad(self).data;
      auto& dx = g.grad_buf(x).data;
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
    });
  }

  // Channel concatenation of NCHW tensors with equal N, H, W.
  Id concat(std::vector<Id> parts) {
    if (parts.empty()) throw ShapeMismatch("concat: no inputs");
    const Shape& s0 = value(parts[0]).shape;
    detail::check_image(s0, "concat");
    int channels = 0;
    for (Id p : parts) {
      const Shape& s = value(p).shape;
      detail::check_image(s, "concat");
      if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
        throw ShapeMismatch("concat: " + shape_str(s) + " vs " + shape_str(s0));
      channels += s[1];
    }
    const int n = s0[0];
    const std::size_t plane = static_cast<std::size_t>(s0[2]) * s0[3];
    Tensor<T> y({n, channels, s0[2], s0[3]});
    for (int b = 0; b < n; ++b) {
      T* dst = &y.data[static_cast<std::size_t>(b) * channels * plane];
      for (Id p : parts) {
        const Tensor<T>& v = value(p);
        const std::size_t len = v.dim(1) * plane;
        std::copy_n(&v.data[b * len], len, dst);
        dst += len;
      }
    }
    return op(std::move(y), parts, [parts, channels, plane](Graph& g, Id self) {
      const auto& dy = g.grad(self).data;
      const int n = g.value(self).dim(0);
      for (int b = 0; b < n; ++b) {
        const T* src = &dy[static_cast<std::size_t>(b) * channels * plane];
        for (Id p : parts) {
          const std::size_t len = g.value(p).dim(1) * plane;
          if (g.needs(p)) {
            T* dst = &g.grad_buf(p).data[b * len];
            for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
          }
          src += len;
        }
      }
    });
  }

  // Scalar mean pixel cross-entropy against a constant target.
  Id bce(Id pred, const Tensor<T>& target) {
    Tensor<T> dp;
    const T loss = pixel_bce(value(pred), target, &dp);
    return op(Tensor<T>({1}, loss), {pred}, [pred, dp = std::move(dp)](Graph& g, Id self) {
      const T s = g.grad(self).data[0];
      auto& dx = g.grad_buf(pred).data;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += s * dp.data[i];
    });
  }

  // Scalar Σ c_i · x_i against a constant tensor c.
  Id dot(Id x, Tensor<T> c) {
    if (c.shape != value(x).shape)
      throw ShapeMismatch("dot: " + shape_str(c.shape) + " vs " + shape_str(value(x).shape));
    T total = 0;
    for (std::size_t i = 0; i < c.size(); ++i) total += c.data[i] * value(x).data[i];
    return op(Tensor<T>({1}, total), {x}, [x, c = std::move(c)](Graph& g, Id self) {
      const T s = g.grad(self).data[0];
      auto& dx = g.grad_buf(x).data;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += s * c.data[i];
    });
  }

  // Σ w_i · x_i over scalar nodes.
  Id weighted_sum(std::vector<std::pair<Id, T>> terms) {
    T total = 0;
    std::vector<Id> ins;
    for (auto [id, w] : terms) {
      if (value(id).size() != 1) throw ShapeMismatch("weighted_sum: operands must be scalars");
      total += w * scalar(id);
      ins.push_back(id);
    }
    return op(Tensor<T>({1}, total), ins, [terms = std::move(terms)](Graph& g, Id self) {
      const T s = g.grad(self).data[0];
      for (auto [id, w] : terms)
        if (g.needs(id)) g.grad_buf(id).data[0] += s * w;
    });
  }

  // Backpropagates from scalar `loss`, then adds parameter gradients into each
  // Parameter::grad.
  void backward(Id loss, T seed = T(1)) {
    if (!record_) throw GraphNotRecorded("graph was built without recording");
    if (loss < 0 || loss >= static_cast<Id>(nodes_.size()))
      throw GraphNotRecorded("node " + std::to_string(loss) + " is not on the tape");
    if (nodes_[loss].value.size() != 1) throw ShapeMismatch("backward: loss must be a scalar");
    if (done_) throw GraphNotRecorded("tape was already consumed by a backward pass");
    done_ = true;
    grad_buf(loss).data[0] += seed;
    for (Id i = loss; i >= 0; --i) {
      Node& nd = nodes_[i];
      if (nd.backward && !nd.grad.data.empty()) nd.backward(*this, i);
    }
    for (auto [id, p] : params_) {
      const Tensor<T>& g = nodes_[id].grad;
      if (g.data.empty()) continue;
      for (std::size_t k = 0; k < g.size(); ++k) p->grad.data[k] += g.data[k];
    }
  }

 private:
  using Backward = std::function<void(Graph&, Id)>;
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until first touched
    bool needs_grad = false;
    Backward backward;
  };

  Id push(Tensor<T> v, bool needs) {
    nodes_.push_back(Node{std::move(v), {}, needs, {}});
    return static_cast<Id>(nodes_.size()) - 1;
  }

  Id op(Tensor<T> y, const std::vector<Id>& ins, Backward fn) {
    bool needs = false;
    for (Id i : ins) needs = needs || nodes_.at(i).needs_grad;
    const Id id = push(std::move(y), record_ && needs);
    if (record_ && needs) nodes_[id].backward = std::move(fn);
    return id;
  }

  bool needs(Id id) const { return nodes_[id].needs_grad; }

  Tensor<T>& grad_buf(Id id) {
    Node& nd = nodes_[id];
    if (nd.grad.data.empty()) nd.grad = Tensor<T>(nd.value.shape);
    return nd.grad;
  }

  bool record_;
  bool done_ = false;
  std::deque<Node> nodes_;  // stable references across push_back
  std::vector<std::pair<Id, Parameter<T>*>> params_;
};

}  // namespace pathforge::nn
