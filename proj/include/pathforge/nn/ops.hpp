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

// Convolution kernels for the fixed 4x4 / stride 2 / padding 1 geometry, plus
// the elementwise activations and pixel cross-entropy.
//
// Conv weights are (out_ch, in_ch, 4, 4). Transposed-conv weights are
// (in_ch, out_ch, 4, 4): the transposed layer with weights W is the adjoint of
// the conv layer with the same W, which maps out_ch -> in_ch.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pathforge/nn/tensor.hpp"

namespace pathforge::nn {

inline constexpr int kKernel = 4;
inline constexpr int kStride = 2;
inline constexpr int kPad = 1;
inline constexpr int kTaps = kKernel * kKernel;

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

namespace detail {

inline void check_image(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeMismatch(std::string(what) + ": expected NCHW, got " + shape_str(s));
}

}  // namespace detail

namespace detail {

// Output positions o in [0, n_out) with 0 <= o*2 - 1 + k < n_in.
inline void tap_range(int k, int n_in, int n_out, int& lo, int& hi) {
  lo = std::min(k < kPad ? 1 : 0, n_out);
  const int last = n_in - 1 + kPad - k;  // largest valid o*2
  hi = last < 0 ? lo : std::max(lo, std::min(n_out, last / kStride + 1));
}

}  // namespace detail

// (N, C, H, W) -> (C*16, N*Ho*Wo) with Ho = H/2. Row c*16 + kh*4 + kw, column
// n*Ho*Wo + oh*Wo + ow.
template <class T>
RowMat<T> im2col(const Tensor<T>& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = h / 2, wo = w / 2, p = ho * wo;
  RowMat<T> cols(static_cast<Eigen::Index>(c) * kTaps, static_cast<Eigen::Index>(n) * p);
  for (int ci = 0; ci < c; ++ci)
    for (int kh = 0; kh < kKernel; ++kh) {
      int oh0, oh1;
      detail::tap_range(kh, h, ho, oh0, oh1);
      for (int kw = 0; kw < kKernel; ++kw) {
        int ow0, ow1;
        detail::tap_range(kw, w, wo, ow0, ow1);
        T* row = cols.row(ci * kTaps + kh * kKernel + kw).data();
        for (int b = 0; b < n; ++b) {
          const T* src = &x.data[(static_cast<std::size_t>(b) * c + ci) * h * w];
          T* dst = row + static_cast<std::size_t>(b) * p;
          for (int oh = 0; oh < ho; ++oh) {
            T* d = dst + oh * wo;
            if (oh < oh0 || oh >= oh1) {
              std::fill_n(d, wo, T(0));
              continue;
            }
            const T* srow = src + (oh * kStride - kPad + kh) * w + kw - kPad;
            std::fill_n(d, ow0, T(0));
            for (int ow = ow0; ow < ow1; ++ow) d[ow] = srow[ow * kStride];
            std::fill_n(d + ow1, wo - ow1, T(0));
          }
        }
      }
    }
  return cols;
}

// Adjoint of im2col: scatters columns back into an (N, C, H, W) tensor.
template <class T>
Tensor<T> col2im(const RowMat<T>& cols, int n, int c, int h, int w) {
  Tensor<T> x({n, c, h, w});
  const int ho = h / 2, wo = w / 2, p = ho * wo;
  for (int ci = 0; ci < c; ++ci)
    for (int kh = 0; kh < kKernel; ++kh) {
      int oh0, oh1;
      detail::tap_range(kh, h, ho, oh0, oh1);
      for (int kw = 0; kw < kKernel; ++kw) {
        int ow0, ow1;
        detail::tap_range(kw, w, wo, ow0, ow1);
        const T* row = cols.row(ci * kTaps + kh * kKernel + kw).data();
        for (int b = 0; b < n; ++b) {
          T* dst = &x.data[(static_cast<std::size_t>(b) * c + ci) * h * w];
          const T* src = row + static_cast<std::size_t>(b) * p;
          for (int oh = oh0; oh < oh1; ++oh) {
            T* drow = dst + (oh * kStride - kPad + kh) * w + kw - kPad;
            const T* s = src + oh * wo;
            for (int ow = ow0; ow < ow1; ++ow) drow[ow * kStride] += s[ow];
          }
        }
      }
    }
  return x;
}

namespace detail {

// (C, N*P) matrix -> (N, C, P) tensor data, optionally adding a per-channel bias.
template <class T>
Tensor<T> unfold_channels(const RowMat<T>& m, int n, int c, int h, int w, const Tensor<T>* bias) {
  Tensor<T> out({n, c, h, w});
  const std::size_t p = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < n; ++b)
    for (int ci = 0; ci < c; ++ci) {
      const T* src = m.row(ci).data() + b * p;
      T* dst = &out.data[(static_cast<std::size_t>(b) * c + ci) * p];
      const T add = bias ? bias->data[ci] : T(0);
      for (std::size_t i = 0; i < p; ++i) dst[i] = src[i] + add;
    }
  return out;
}

// (N, C, H, W) -> (C, N*H*W).
template <class T>
RowMat<T> fold_channels(const Tensor<T>& x) {
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t p = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  RowMat<T> m(c, static_cast<Eigen::Index>(n * p));
  for (int b = 0; b < n; ++b)
    for (int ci = 0; ci < c; ++ci)
      std::copy_n(&x.data[(static_cast<std::size_t>(b) * c + ci) * p], p, m.row(ci).data() + b * p);
  return m;
}

template <class T>
void check_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, bool transposed,
                const char* what) {
  check_image(x.shape, what);
  if (w.ndim() != 4 || w.dim(2) != kKernel || w.dim(3) != kKernel)
    throw ShapeMismatch(std::string(what) + ": weights must be (*, *, 4, 4), got " +
                        shape_str(w.shape));
  const int in_ch = transposed ? w.dim(0) : w.dim(1);
  const int out_ch = transposed ? w.dim(1) : w.dim(0);
  if (x.dim(1) != in_ch)
    throw ShapeMismatch(std::string(what) + ": input has " + std::to_string(x.dim(1)) +
                        " channels, weights expect " + std::to_string(in_ch));
  if (b.shape != Shape{out_ch})
    throw ShapeMismatch(std::string(what) + ": bias must be (" + std::to_string(out_ch) + ")");
  if (!transposed && (x.dim(2) < 2 || x.dim(3) < 2 || x.dim(2) % 2 || x.dim(3) % 2))
    throw ShapeMismatch(std::string(what) + ": spatial dims must be even and >= 2, got " +
                        shape_str(x.shape));
}

}  // namespace detail

template <class T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::check_conv(x, w, b, false, "conv_forward");
  const int cout = w.dim(0), cin = w.dim(1);
  const RowMat<T> cols = im2col(x);
  const ConstMatMap<T> wm(w.data.data(), cout, cin * kTaps);
  const RowMat<T> out = wm * cols;
  return detail::unfold_channels<T>(out, x.dim(0), cout, x.dim(2) / 2, x.dim(3) / 2, &b);
}

// Gradients of conv_forward. `dx` may be null when the input needs none.
template <class T>
void conv_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                   Tensor<T>& dw, Tensor<T>& db) {
  const int cout = w.dim(0), cin = w.dim(1);
  const RowMat<T> dym = detail::fold_channels(dy);
  const RowMat<T> cols = im2col(x);
  MatMap<T>(dw.data.data(), cout, cin * kTaps).noalias() += dym * cols.transpose();
  for (int c = 0; c < cout; ++c) db.data[c] += dym.row(c).sum();
  if (dx) {
    const ConstMatMap<T> wm(w.data.data(), cout, cin * kTaps);
    const RowMat<T> dcols = wm.transpose() * dym;
    const Tensor<T> g = col2im<T>(dcols, x.dim(0), cin, x.dim(2), x.dim(3));
    for (std::size_t i = 0; i < g.size(); ++i) dx->data[i] += g.data[i];
  }
}

template <class T>
Tensor<T> deconv_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::check_conv(x, w, b, true, "deconv_forward");
  const int cin = w.dim(0), cout = w.dim(1);
  const ConstMatMap<T> wm(w.data.data(), cin, cout * kTaps);
  const RowMat<T> cols = wm.transpose() * detail::fold_channels(x);
  Tensor<T> y = col2im<T>(cols, x.dim(0), cout, 2 * x.dim(2), 2 * x.dim(3));
  const std::size_t p = static_cast<std::size_t>(y.dim(2)) * y.dim(3);
  for (int n = 0; n < y.dim(0); ++n)
    for (int c = 0; c < cout; ++c) {
      T* dst = &y.data[(static_cast<std::size_t>(n) * cout + c) * p];
      for (std::size_t i = 0; i < p; ++i) dst[i] += b.data[c];
    }
  return y;
}

template <class T>
void deconv_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                     Tensor<T>& dw, Tensor<T>& db) {
  const int cin = w.dim(0), cout = w.dim(1);
  const RowMat<T> dcols = im2col(dy);
  const RowMat<T> xm = detail::fold_channels(x);
  MatMap<T>(dw.data.data(), cin, cout * kTaps).noalias() += xm * dcols.transpose();
  const std::size_t p = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
  for (int n = 0; n < dy.dim(0); ++n)
    for (int c = 0; c < cout; ++c) {
      const T* src = &dy.data[(static_cast<std::size_t>(n) * cout + c) * p];
      T s = 0;
      for (std::size_t i = 0; i < p; ++i) s += src[i];
      db.data[c] += s;
    }
  if (dx) {
    const ConstMatMap<T> wm(w.data.data(), cin, cout * kTaps);
    const RowMat<T> g = wm * dcols;
    const Tensor<T> gt = detail::unfold_channels<T>(g, x.dim(0), cin, x.dim(2), x.dim(3), nullptr);
    for (std::size_t i = 0; i < gt.size(); ++i) dx->data[i] += gt.data[i];
  }
}

// Direct loops, used as test references.
template <class T>
Tensor<T> conv_forward_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::check_conv(x, w, b, false, "conv_forward_naive");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(0);
  Tensor<T> y({n, cout, h / 2, wd / 2});
  for (int bi = 0; bi < n; ++bi)
    for (int co = 0; co < cout; ++co)
      for (int oh = 0; oh < h / 2; ++oh)
        for (int ow = 0; ow < wd / 2; ++ow) {
          T s = b.data[co];
          for (int ci = 0; ci < cin; ++ci)
            for (int kh = 0; kh < kKernel; ++kh)
              for (int kw = 0; kw < kKernel; ++kw) {
                const int ih = oh * kStride - kPad + kh, iw = ow * kStride - kPad + kw;
                if (ih < 0 || ih >= h || iw < 0 || iw >= wd) continue;
                s += w.at(co, ci, kh, kw) * x.at(bi, ci, ih, iw);
              }
          y.at(bi, co, oh, ow) = s;
        }
  return y;
}

template <class T>
Tensor<T> deconv_forward_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::check_conv(x, w, b, true, "deconv_forward_naive");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(1);
  Tensor<T> y({n, cout, 2 * h, 2 * wd});
  for (int bi = 0; bi < n; ++bi)
    for (int co = 0; co < cout; ++co)
      for (int i = 0; i < 2 * h * 2 * wd; ++i) y.data[(bi * cout + co) * 4 * h * wd + i] = b.data[co];
  for (int bi = 0; bi < n; ++bi)
    for (int ci = 0; ci < cin; ++ci)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < wd; ++iw)
          for (int co = 0; co < cout; ++co)
            for (int kh = 0; kh < kKernel; ++kh)
              for (int kw = 0; kw < kKernel; ++kw) {
                const int oh = ih * kStride - kPad + kh, ow = iw * kStride - kPad + kw;
                if (oh < 0 || oh >= 2 * h || ow < 0 || ow >= 2 * wd) continue;
                y.at(bi, co, oh, ow) += w.at(ci, co, kh, kw) * x.at(bi, ci, ih, iw);
              }
  return y;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return y;
}

// Kept strictly inside (0, 1) even where the exact value rounds to 0 or 1.
template <class T>
T sigmoid(T z) {
  constexpr T lo = std::numeric_limits<T>::epsilon() / 2;
  if (z >= T(0)) return std::min(T(1) / (T(1) + std::exp(-z)), T(1) - lo);
  const T e = std::exp(z);
  return std::max(e / (T(1) + e), lo);
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = sigmoid(x.data[i]);
  return y;
}

inline constexpr double kBceEps = 1e-6;

// Mean per-pixel binary cross-entropy. If `grad` is given it receives
// d loss / d pred.
template <class T>
T pixel_bce(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad = nullptr) {
  if (pred.shape != target.shape)
    throw ShapeMismatch("pixel_bce: pred " + shape_str(pred.shape) + " vs target " +
                        shape_str(target.shape));
  const std::size_t n = pred.size();
  if (grad) *grad = Tensor<T>(pred.shape);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(static_cast<double>(pred.data[i]), kBceEps, 1.0 - kBceEps);
    const double t = target.data[i];
    loss -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
    if (grad) grad->data[i] = static_cast<T>((p - t) / (p * (1.0 - p)) / static_cast<double>(n));
  }
  return static_cast<T>(loss / static_cast<double>(n));
}

}  // namespace pathforge::nn
