#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "slg/error.hpp"

namespace slg::lgn {

// Channel-major feature grid (C x H x W).
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0)
      : c(channels), h(height), w(width), v(static_cast<std::size_t>(channels) * height * width, fill) {}

  double& operator()(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  double operator()(int ch, int y, int x) const { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  double* plane(int ch) { return v.data() + static_cast<std::size_t>(ch) * h * w; }
  const double* plane(int ch) const { return v.data() + static_cast<std::size_t>(ch) * h * w; }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

inline void tanh_inplace(Tensor& t) {
  for (auto& x : t.v) x = std::tanh(x);
}

// dy -> da for y = tanh(a), in place on dy.
inline void tanh_backward(const Tensor& y, Tensor& dy) {
  for (std::size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= 1.0 - y.v[i] * y.v[i];
}

inline Tensor upsample2(const Tensor& x) {
  Tensor y(x.c, x.h * 2, x.w * 2);
  for (int ch = 0; ch < x.c; ++ch)
    for (int i = 0; i < y.h; ++i)
      for (int j = 0; j < y.w; ++j) y(ch, i, j) = x(ch, i / 2, j / 2);
  return y;
}

// Adjoint of upsample2: sums each 2x2 block.
inline void upsample2_backward(const Tensor& dy, Tensor& dx) {
  for (int ch = 0; ch < dx.c; ++ch)
    for (int i = 0; i < dy.h; ++i)
      for (int j = 0; j < dy.w; ++j) dx(ch, i / 2, j / 2) += dy(ch, i, j);
}

// Square-kernel convolution with "same" zero padding; output is H/stride x W/stride.
struct Conv2d {
  int in = 0, out = 0, k = 1, stride = 1;
  std::vector<double> w;  // [out][in][k][k]
  std::vector<double> b;  // [out]

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int kernel, int s)
      : in(in_ch), out(out_ch), k(kernel), stride(s),
        w(static_cast<std::size_t>(out_ch) * in_ch * kernel * kernel, 0.0), b(out_ch, 0.0) {}

  double& weight(int o, int i, int ky, int kx) { return w[((static_cast<std::size_t>(o) * in + i) * k + ky) * k + kx]; }
  double weight(int o, int i, int ky, int kx) const {
    return w[((static_cast<std::size_t>(o) * in + i) * k + ky) * k + kx];
  }

  // Output column range [lo, hi) whose tap kx lands inside an input of width n.
  std::pair<int, int> valid(int kx, int n, int n_out) const {
    const int p = k / 2;
    int lo = 0;
    while (lo < n_out && lo * stride + kx - p < 0) ++lo;
    int hi = n_out;
    while (hi > lo && (hi - 1) * stride + kx - p >= n) --hi;
    return {lo, hi};
  }

  Tensor forward(const Tensor& x) const {
    if (x.c != in || x.h % stride || x.w % stride)
      throw ModelError("ShapeMismatch", "convolution input shape does not match layer");
    Tensor y(out, x.h / stride, x.w / stride);
    const int p = k / 2;
    for (int o = 0; o < out; ++o) {
      double* yp = y.plane(o);
      std::fill(yp, yp + static_cast<std::size_t>(y.h) * y.w, b[o]);
      for (int i = 0; i < in; ++i) {
        const double* xp = x.plane(i);
        for (int ky = 0; ky < k; ++ky) {
          const auto [rlo, rhi] = valid(ky, x.h, y.h);
          for (int kx = 0; kx < k; ++kx) {
            const double wt = weight(o, i, ky, kx);
            const auto [clo, chi] = valid(kx, x.w, y.w);
            for (int r = rlo; r < rhi; ++r) {
              const double* xrow = xp + static_cast<std::size_t>(r * stride + ky - p) * x.w + (kx - p);
              double* yrow = yp + static_cast<std::size_t>(r) * y.w;
              if (stride == 1)
                for (int c = clo; c < chi; ++c) yrow[c] += wt * xrow[c];
              else
                for (int c = clo; c < chi; ++c) yrow[c] += wt * xrow[c * stride];
            }
          }
        }
      }
    }
    return y;
  }

  // Accumulates parameter gradients into `grad`; returns dL/dx when `need_dx`.
  Tensor backward(const Tensor& x, const Tensor& dy, Conv2d& grad, bool need_dx = true) const {
    Tensor dx;
    if (need_dx) dx = Tensor(x.c, x.h, x.w);
    const int p = k / 2;
    for (int o = 0; o < out; ++o) {
      const double* dyp = dy.plane(o);
      double sb = 0.0;
      for (std::size_t n = 0; n < static_cast<std::size_t>(dy.h) * dy.w; ++n) sb += dyp[n];
      grad.b[o] += sb;
      for (int i = 0; i < in; ++i) {
        const double* xp = x.plane(i);
        double* dxp = need_dx ? dx.plane(i) : nullptr;
        for (int ky = 0; ky < k; ++ky) {
          const auto [rlo, rhi] = valid(ky, x.h, dy.h);
          for (int kx = 0; kx < k; ++kx) {
            const double wt = weight(o, i, ky, kx);
            const auto [clo, chi] = valid(kx, x.w, dy.w);
            double sw = 0.0;
            for (int r = rlo; r < rhi; ++r) {
              const std::size_t off = static_cast<std::size_t>(r * stride + ky - p) * x.w + (kx - p);
              const double* xrow = xp + off;
              const double* dyrow = dyp + static_cast<std::size_t>(r) * dy.w;
              if (stride == 1) {
                for (int c = clo; c < chi; ++c) sw += dyrow[c] * xrow[c];
                if (dxp)
                  for (int c = clo; c < chi; ++c) dxp[off + c] += wt * dyrow[c];
              } else {
                for (int c = clo; c < chi; ++c) sw += dyrow[c] * xrow[c * stride];
                if (dxp)
                  for (int c = clo; c < chi; ++c) dxp[off + c * stride] += wt * dyrow[c];
              }
            }
            grad.weight(o, i, ky, kx) += sw;
          }
        }
      }
    }
    return dx;
  }
};

// y = W x + b with W stored row-major [out][in].
struct Dense {
  int in = 0, out = 0;
  std::vector<double> w;
  std::vector<double> b;

  Dense() = default;
  Dense(int in_dim, int out_dim)
      : in(in_dim), out(out_dim), w(static_cast<std::size_t>(in_dim) * out_dim, 0.0), b(out_dim, 0.0) {}

  std::vector<double> forward(const std::vector<double>& x) const {
    std::vector<double> y(b);
    for (int o = 0; o < out; ++o) {
      const double* row = w.data() + static_cast<std::size_t>(o) * in;
      double s = 0.0;
      for (int i = 0; i < in; ++i) s += row[i] * x[i];
      y[o] += s;
    }
    return y;
  }

  // Accumulates scale-free gradients; returns dL/dx.
  std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& dy, Dense& grad) const {
    std::vector<double> dx(in, 0.0);
    for (int o = 0; o < out; ++o) {
      if (dy[o] == 0.0) continue;
      const double* row = w.data() + static_cast<std::size_t>(o) * in;
      double* grow = grad.w.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        grow[i] += dy[o] * x[i];
        dx[i] += row[i] * dy[o];
      }
      grad.b[o] += dy[o];
    }
    return dx;
  }
};

// Glorot-uniform weights, zero biases.
template <class Rng>
void glorot(std::vector<double>& w, int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& x : w) x = u(rng);
}

}  // namespace slg::lgn
