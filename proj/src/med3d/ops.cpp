// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace med3d::tensor {

std::string shape_string(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "x" : "") << s[i];
  out << ']';
  return out.str();
}

}  // namespace med3d::tensor

namespace med3d::ops {
namespace {

// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteValue, std::string(op) + " produced NaN/Inf");
  }
}

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  require(s.size() == rank, ErrorCode::kShapeMismatch,
          std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
              tensor::shape_string(s));
}

std::size_t spatial(const Shape& s) {
  return static_cast<std::size_t>(s[2]) * static_cast<std::size_t>(s[3]) * static_cast<std::size_t>(s[4]);
}

// Floor division valid for negative numerators.
int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Correlation geometry shared by conv3d and its adjoint. "big" is the
// conv input side, "small" the conv output side; small index o and tap t
// touch big index o*stride + t*dilation - padding.
struct Geometry {
  std::array<int, 3> big{};
  std::array<int, 3> small{};
  int k = 1;
  int stride = 1;
  int padding = 0;
  int dilation = 1;

  std::size_t big_count() const {
    return static_cast<std::size_t>(big[0]) * static_cast<std::size_t>(big[1]) * static_cast<std::size_t>(big[2]);
  }
  std::size_t small_count() const {
    return static_cast<std::size_t>(small[0]) * static_cast<std::size_t>(small[1]) * static_cast<std::size_t>(small[2]);
  }
  int taps() const { return k * k * k; }

  // Valid small-index range [lo, hi) along one axis for tap kk.
  void range(int axis, int kk, int& lo, int& hi) const {
    const int off = kk * dilation - padding;
    lo = std::max(0, -floor_div(off, stride));
    if (lo * stride + off < 0) ++lo;
    hi = std::min(small[axis], floor_div(big[axis] - 1 - off, stride) + 1);
    if (hi < lo) hi = lo;
  }
  bool pointwise() const { return k == 1 && stride == 1 && padding == 0 && big == small; }
};

// Channels-first blocks: big is Cb x big_count, small is Cs x small_count,
// weight is Cs x Cb x taps.

template <typename T>
void gather_direct(const Geometry& g, int cs_n, int cb_n, const T* big, const T* w, T* small) {
  const int bh = g.big[1], bw = g.big[2], sh = g.small[1], sw = g.small[2];
  for (int cs = 0; cs < cs_n; ++cs) {
    T* sp_c = small + static_cast<std::size_t>(cs) * g.small_count();
    for (int cb = 0; cb < cb_n; ++cb) {
      const T* bp_c = big + static_cast<std::size_t>(cb) * g.big_count();
      const T* wp = w + (static_cast<std::size_t>(cs) * cb_n + cb) * g.taps();
      for (int kd = 0; kd < g.k; ++kd) {
        int d0, d1;
        g.range(0, kd, d0, d1);
        for (int kh = 0; kh < g.k; ++kh) {
          int h0, h1;
          g.range(1, kh, h0, h1);
          for (int kw = 0; kw < g.k; ++kw) {
            int w0, w1;
            g.range(2, kw, w0, w1);
            const T wv = wp[(kd * g.k + kh) * g.k + kw];
            if (wv == T{0} || w1 <= w0) continue;
            for (int od = d0; od < d1; ++od) {
              const int id = od * g.stride + kd * g.dilation - g.padding;
              for (int oh = h0; oh < h1; ++oh) {
                const int ih = oh * g.stride + kh * g.dilation - g.padding;
                const T* bp = bp_c + (static_cast<std::size_t>(id) * bh + ih) * bw +
                              (w0 * g.stride + kw * g.dilation - g.padding);
                T* sp = sp_c + (static_cast<std::size_t>(od) * sh + oh) * sw + w0;
                const int n = w1 - w0;
                for (int i = 0; i < n; ++i) sp[i] += wv * bp[i * g.stride];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void scatter_direct(const Geometry& g, int cs_n, int cb_n, const T* small, const T* w, T* big) {
  const int bh = g.big[1], bw = g.big[2], sh = g.small[1], sw = g.small[2];
  for (int cs = 0; cs < cs_n; ++cs) {
    const T* sp_c = small + static_cast<std::size_t>(cs) * g.small_count();
    for (int cb = 0; cb < cb_n; ++cb) {
      T* bp_c = big + static_cast<std::size_t>(cb) * g.big_count();
      const T* wp = w + (static_cast<std::size_t>(cs) * cb_n + cb) * g.taps();
      for (int kd = 0; kd < g.k; ++kd) {
        int d0, d1;
        g.range(0, kd, d0, d1);
        for (int kh = 0; kh < g.k; ++kh) {
          int h0, h1;
          g.range(1, kh, h0, h1);
          for (int kw = 0; kw < g.k; ++kw) {
            int w0, w1;
            g.range(2, kw, w0, w1);
            const T wv = wp[(kd * g.k + kh) * g.k + kw];
            if (wv == T{0} || w1 <= w0) continue;
            for (int od = d0; od < d1; ++od) {
              const int id = od * g.stride + kd * g.dilation - g.padding;
              for (int oh = h0; oh < h1; ++oh) {
                const int ih = oh * g.stride + kh * g.dilation - g.padding;
                T* bp = bp_c + (static_cast<std::size_t>(id) * bh + ih) * bw +
                        (w0 * g.stride + kw * g.dilation - g.padding);
                const T* sp = sp_c + (static_cast<std::size_t>(od) * sh + oh) * sw + w0;
                const int n = w1 - w0;
                for (int i = 0; i < n; ++i) bp[i * g.stride] += wv * sp[i];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void wgrad_direct(const Geometry& g, int cs_n, int cb_n, const T* small, const T* big, T* dw) {
  const int bh = g.big[1], bw = g.big[2], sh = g.small[1], sw = g.small[2];
  for (int cs = 0; cs < cs_n; ++cs) {
    const T* sp_c = small + static_cast<std::size_t>(cs) * g.small_count();
    for (int cb = 0; cb < cb_n; ++cb) {
      const T* bp_c = big + static_cast<std::size_t>(cb) * g.big_count();
      T* wp = dw + (static_cast<std::size_t>(cs) * cb_n + cb) * g.taps();
      for (int kd = 0; kd < g.k; ++kd) {
        int d0, d1;
        g.range(0, kd, d0, d1);
        for (int kh = 0; kh < g.k; ++kh) {
          int h0, h1;
          g.range(1, kh, h0, h1);
          for (int kw = 0; kw < g.k; ++kw) {
            int w0, w1;
            g.range(2, kw, w0, w1);
            if (w1 <= w0) continue;
            T acc{0};
            for (int od = d0; od < d1; ++od) {
              const int id = od * g.stride + kd * g.dilation - g.padding;
              for (int oh = h0; oh < h1; ++oh) {
                const int ih = oh * g.stride + kh * g.dilation - g.padding;
                const T* bp = bp_c + (static_cast<std::size_t>(id) * bh + ih) * bw +
                              (w0 * g.stride + kw * g.dilation - g.padding);
                const T* sp = sp_c + (static_cast<std::size_t>(od) * sh + oh) * sw + w0;
                const int n = w1 - w0;
                for (int i = 0; i < n; ++i) acc += sp[i] * bp[i * g.stride];
              }
            }
            wp[(kd * g.k + kh) * g.k + kw] += acc;
          }
        }
      }
    }
  }
}

// col is (cb_n * taps) x small_count.
template <typename T>
void im2col(const Geometry& g, int cb_n, const T* big, T* col) {
  const int bh = g.big[1], bw = g.big[2], sh = g.small[1], sw = g.small[2];
  const std::size_t p = g.small_count();
  std::fill(col, col + static_cast<std::size_t>(cb_n) * g.taps() * p, T{0});
  for (int cb = 0; cb < cb_n; ++cb) {
    const T* bp_c = big + static_cast<std::size_t>(cb) * g.big_count();
    for (int kd = 0; kd < g.k; ++kd) {
      int d0, d1;
      g.range(0, kd, d0, d1);
      for (int kh = 0; kh < g.k; ++kh) {
        int h0, h1;
        g.range(1, kh, h0, h1);
        for (int kw = 0; kw < g.k; ++kw) {
          int w0, w1;
          g.range(2, kw, w0, w1);
          T* row = col + ((static_cast<std::size_t>(cb) * g.k + kd) * g.k * g.k + kh * g.k + kw) * p;
          if (w1 <= w0) continue;
          for (int od = d0; od < d1; ++od) {
            const int id = od * g.stride + kd * g.dilation - g.padding;
            for (int oh = h0; oh < h1; ++oh) {
              const int ih = oh * g.stride + kh * g.dilation - g.padding;
              const T* bp = bp_c + (static_cast<std::size_t>(id) * bh + ih) * bw +
                            (w0 * g.stride + kw * g.dilation - g.padding);
              T* rp = row + (static_cast<std::size_t>(od) * sh + oh) * sw + w0;
              const int n = w1 - w0;
              if (g.stride == 1) {
                std::copy(bp, bp + n, rp);
              } else {
                for (int i = 0; i < n; ++i) rp[i] = bp[i * g.stride];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const Geometry& g, int cb_n, const T* col, T* big) {
  const int bh = g.big[1], bw = g.big[2], sh = g.small[1], sw = g.small[2];
  const std::size_t p = g.small_count();
  for (int cb = 0; cb < cb_n; ++cb) {
    T* bp_c = big + static_cast<std::size_t>(cb) * g.big_count();
    for (int kd = 0; kd < g.k; ++kd) {
      int d0, d1;
      g.range(0, kd, d0, d1);
      for (int kh = 0; kh < g.k; ++kh) {
        int h0, h1;
        g.range(1, kh, h0, h1);
        for (int kw = 0; kw < g.k; ++kw) {
          int w0, w1;
          g.range(2, kw, w0, w1);
          const T* row = col + ((static_cast<std::size_t>(cb) * g.k + kd) * g.k * g.k + kh * g.k + kw) * p;
          if (w1 <= w0) continue;
          for (int od = d0; od < d1; ++od) {
            const int id = od * g.stride + kd * g.dilation - g.padding;
            for (int oh = h0; oh < h1; ++oh) {
              const int ih = oh * g.stride + kh * g.dilation - g.padding;
              T* bp = bp_c + (static_cast<std::size_t>(id) * bh + ih) * bw +
                      (w0 * g.stride + kw * g.dilation - g.padding);
              const T* rp = row + (static_cast<std::size_t>(od) * sh + oh) * sw + w0;
              const int n = w1 - w0;
              for (int i = 0; i < n; ++i) bp[i * g.stride] += rp[i];
            }
          }
        }
      }
    }
  }
}

// The three correlation primitives, dispatched on algorithm. Each handles
// a single batch item.
template <typename T>
struct Correlator {
  const Geometry& g;
  int cs_n;
  int cb_n;
  ConvAlgo algo;
  std::vector<T> col;

  Correlator(const Geometry& geom, int cs, int cb, ConvAlgo a) : g(geom), cs_n(cs), cb_n(cb), algo(a) {
    if (algo == ConvAlgo::kGemm && !g.pointwise()) {
      col.resize(static_cast<std::size_t>(cb_n) * g.taps() * g.small_count());
    }
  }

  const T* columns(const T* big) {
    if (g.pointwise()) return big;
    im2col(g, cb_n, big, col.data());
    return col.data();
  }

  // small += W * big
  void gather(const T* big, const T* w, T* small) {
    if (algo == ConvAlgo::kDirect) return gather_direct(g, cs_n, cb_n, big, w, small);
    const T* c = columns(big);
    const int kdim = cb_n * g.taps();
    const int p = static_cast<int>(g.small_count());
    gemm(false, false, cs_n, p, kdim, T{1}, w, kdim, c, p, T{1}, small, p);
  }

  // big += W^T * small
  void scatter(const T* small, const T* w, T* big) {
    if (algo == ConvAlgo::kDirect) return scatter_direct(g, cs_n, cb_n, small, w, big);
    const int kdim = cb_n * g.taps();
    const int p = static_cast<int>(g.small_count());
    if (g.pointwise()) {
      gemm(true, false, kdim, p, cs_n, T{1}, w, kdim, small, p, T{1}, big, p);
      return;
    }
    gemm(true, false, kdim, p, cs_n, T{1}, w, kdim, small, p, T{0}, col.data(), p);
    col2im(g, cb_n, col.data(), big);
  }

  // dW += small * big_cols^T
  void wgrad(const T* small, const T* big, T* dw) {
    if (algo == ConvAlgo::kDirect) return wgrad_direct(g, cs_n, cb_n, small, big, dw);
    const T* c = columns(big);
    const int kdim = cb_n * g.taps();
    const int p = static_cast<int>(g.small_count());
    gemm(false, true, cs_n, kdim, p, T{1}, small, p, c, p, T{1}, dw, kdim);
  }
};

void check_kernel(const Shape& w, int& k) {
  require_rank(w, 5, "weight");
  require(w[2] == w[3] && w[3] == w[4], ErrorCode::kShapeMismatch, "kernels must be cubic");
  k = w[2];
}

}  // namespace

int conv_output_extent(int n, int kernel, const ConvParams& p) {
  const int span = p.dilation * (kernel - 1) + 1;
  const int padded = n + 2 * p.padding;
  if (padded < span) return 0;
  return (padded - span) / p.stride + 1;
}

int conv_transpose_output_extent(int n, int kernel, const ConvTransposeParams& p) {
  return (n - 1) * p.stride - 2 * p.padding + p.dilation * (kernel - 1) + p.output_padding + 1;
}

template <typename T>
Tensor<T> conv3d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, const ConvParams& p,
                 ConvAlgo algo) {
  require_rank(input.shape(), 5, "conv3d input");
  int k = 0;
  check_kernel(weight.shape(), k);
  require(p.stride >= 1 && p.dilation >= 1 && p.padding >= 0, ErrorCode::kShapeMismatch,
          "conv3d: invalid stride/dilation/padding");
  const int n = input.dim(0), cin = input.dim(1), cout = weight.dim(0);
  require(weight.dim(1) == cin, ErrorCode::kShapeMismatch,
          "conv3d: weight " + tensor::shape_string(weight.shape()) + " vs input " +
              tensor::shape_string(input.shape()));
  Geometry g;
  g.k = k;
  g.stride = p.stride;
  g.padding = p.padding;
  g.dilation = p.dilation;
  for (int a = 0; a < 3; ++a) {
    g.big[a] = input.dim(2 + a);
    g.small[a] = conv_output_extent(g.big[a], k, p);
    require(g.small[a] >= 1, ErrorCode::kShapeMismatch, "conv3d: input too small for kernel");
  }

  Tensor<T> out({n, cout, g.small[0], g.small[1], g.small[2]});
  {
    Correlator<T> corr(g, cout, cin, algo);
    for (int b = 0; b < n; ++b) {
      corr.gather(input.values().data() + static_cast<std::size_t>(b) * cin * g.big_count(),
                  weight.values().data(),
                  out.values().data() + static_cast<std::size_t>(b) * cout * g.small_count());
    }
  }
  check_finite(out, "conv3d");

  if (tape.should_record({&input, &weight})) {
    tape.record("conv3d", {input, weight}, out, [input, weight, out, g, algo]() mutable {
      const int n = input.dim(0), cin = input.dim(1), cout = weight.dim(0);
      Correlator<T> corr(g, cout, cin, algo);
      const T* dy = out.grad().data();
      T* dx = input.requires_grad() ? input.ensure_grad().data() : nullptr;
      T* dw = weight.requires_grad() ? weight.ensure_grad().data() : nullptr;
      for (int b = 0; b < n; ++b) {
        const T* dyb = dy + static_cast<std::size_t>(b) * cout * g.small_count();
        if (dw) corr.wgrad(dyb, input.values().data() + static_cast<std::size_t>(b) * cin * g.big_count(), dw);
        if (dx) corr.scatter(dyb, weight.values().data(), dx + static_cast<std::size_t>(b) * cin * g.big_count());
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv_transpose3d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight,
                           const ConvTransposeParams& p, ConvAlgo algo) {
  require_rank(input.shape(), 5, "conv_transpose3d input");
  int k = 0;
  check_kernel(weight.shape(), k);
  require(p.stride >= 1 && p.dilation >= 1 && p.padding >= 0 && p.output_padding >= 0 &&
              p.output_padding < std::max(p.stride, p.dilation),
          ErrorCode::kShapeMismatch, "conv_transpose3d: invalid parameters");
  const int n = input.dim(0), cin = input.dim(1), cout = weight.dim(1);
  require(weight.dim(0) == cin, ErrorCode::kShapeMismatch,
          "conv_transpose3d: weight " + tensor::shape_string(weight.shape()) + " vs input " +
              tensor::shape_string(input.shape()));
  Geometry g;
  g.k = k;
  g.stride = p.stride;
  g.padding = p.padding;
  g.dilation = p.dilation;
  for (int a = 0; a < 3; ++a) {
    g.small[a] = input.dim(2 + a);
    g.big[a] = conv_transpose_output_extent(g.small[a], k, p);
    require(g.big[a] >= 1, ErrorCode::kShapeMismatch, "conv_transpose3d: empty output");
  }

  Tensor<T> out({n, cout, g.big[0], g.big[1], g.big[2]});
  {
    Correlator<T> corr(g, cin, cout, algo);
    for (int b = 0; b < n; ++b) {
      corr.scatter(input.values().data() + static_cast<std::size_t>(b) * cin * g.small_count(),
                   weight.values().data(),
                   out.values().data() + static_cast<std::size_t>(b) * cout * g.big_count());
    }
  }
  check_finite(out, "conv_transpose3d");

  if (tape.should_record({&input, &weight})) {
    tape.record("conv_transpose3d", {input, weight}, out, [input, weight, out, g, algo]() mutable {
      const int n = input.dim(0), cin = input.dim(1), cout = weight.dim(1);
      Correlator<T> corr(g, cin, cout, algo);
      const T* dy = out.grad().data();
      T* dx = input.requires_grad() ? input.ensure_grad().data() : nullptr;
      T* dw = weight.requires_grad() ? weight.ensure_grad().data() : nullptr;
      for (int b = 0; b < n; ++b) {
        const T* dyb = dy + static_cast<std::size_t>(b) * cout * g.big_count();
        const T* xb = input.values().data() + static_cast<std::size_t>(b) * cin * g.small_count();
        if (dw) corr.wgrad(xb, dyb, dw);
        if (dx) corr.gather(dyb, weight.values().data(), dx + static_cast<std::size_t>(b) * cin * g.small_count());
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm3d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& gamma,
                      const Tensor<T>& beta, RunningStats<T>& running, NormMode mode,
                      double momentum, double eps) {
  require_rank(input.shape(), 5, "batchnorm3d input");
  const int n = input.dim(0), c = input.dim(1);
  const std::size_t s = spatial(input.shape());
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &running.mean, &running.var}) {
    require(t->numel() == static_cast<std::size_t>(c), ErrorCode::kShapeMismatch,
            "batchnorm3d: channel count mismatch");
  }
  const std::size_t m = static_cast<std::size_t>(n) * s;

  std::vector<T> mean(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
  const T* x = input.values().data();
  for (int ch = 0; ch < c; ++ch) {
    double mu, var;
    if (mode == NormMode::kTrain) {
      double acc = 0.0;
      for (int b = 0; b < n; ++b) {
        const T* p = x + (static_cast<std::size_t>(b) * c + ch) * s;
        for (std::size_t i = 0; i < s; ++i) acc += p[i];
      }
      mu = acc / static_cast<double>(m);
      double sq = 0.0;
      for (int b = 0; b < n; ++b) {
        const T* p = x + (static_cast<std::size_t>(b) * c + ch) * s;
        for (std::size_t i = 0; i < s; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(m);
      auto rm = running.mean.values();
      auto rv = running.var.values();
      const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
      rm[static_cast<std::size_t>(ch)] =
          static_cast<T>((1.0 - momentum) * rm[static_cast<std::size_t>(ch)] + momentum * mu);
      rv[static_cast<std::size_t>(ch)] =
          static_cast<T>((1.0 - momentum) * rv[static_cast<std::size_t>(ch)] + momentum * unbiased);
    } else {
      mu = running.mean.values()[static_cast<std::size_t>(ch)];
      var = running.var.values()[static_cast<std::size_t>(ch)];
    }
    mean[static_cast<std::size_t>(ch)] = static_cast<T>(mu);
    inv_std[static_cast<std::size_t>(ch)] = static_cast<T>(1.0 / std::sqrt(var + eps));
  }

  Tensor<T> out(input.shape());
  Tensor<T> xhat(input.shape());
  T* y = out.values().data();
  T* xh = xhat.values().data();
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * s;
      const T mu = mean[static_cast<std::size_t>(ch)], is = inv_std[static_cast<std::size_t>(ch)];
      const T ga = gamma.values()[static_cast<std::size_t>(ch)], be = beta.values()[static_cast<std::size_t>(ch)];
      for (std::size_t i = 0; i < s; ++i) {
        xh[base + i] = (x[base + i] - mu) * is;
        y[base + i] = ga * xh[base + i] + be;
      }
    }
  }
  check_finite(out, "batchnorm3d");

  if (tape.should_record({&input, &gamma, &beta})) {
    tape.record("batchnorm3d", {input, gamma, beta}, out,
                [input, gamma, beta, out, xhat, inv_std, mode, s]() mutable {
                  const int n = input.dim(0), c = input.dim(1);
                  const double m = static_cast<double>(n) * static_cast<double>(s);
                  const T* dy = out.grad().data();
                  const T* xh = xhat.values().data();
                  std::vector<double> sum_dy(static_cast<std::size_t>(c), 0.0),
                      sum_dy_xh(static_cast<std::size_t>(c), 0.0);
                  for (int b = 0; b < n; ++b)
                    for (int ch = 0; ch < c; ++ch) {
                      const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * s;
                      for (std::size_t i = 0; i < s; ++i) {
                        sum_dy[static_cast<std::size_t>(ch)] += dy[base + i];
                        sum_dy_xh[static_cast<std::size_t>(ch)] += dy[base + i] * xh[base + i];
                      }
                    }
                  if (gamma.requires_grad()) {
                    auto g = gamma.ensure_grad();
                    for (int ch = 0; ch < c; ++ch) g[static_cast<std::size_t>(ch)] += static_cast<T>(sum_dy_xh[static_cast<std::size_t>(ch)]);
                  }
                  if (beta.requires_grad()) {
                    auto g = beta.ensure_grad();
                    for (int ch = 0; ch < c; ++ch) g[static_cast<std::size_t>(ch)] += static_cast<T>(sum_dy[static_cast<std::size_t>(ch)]);
                  }
                  if (!input.requires_grad()) return;
                  T* dx = input.ensure_grad().data();
                  for (int b = 0; b < n; ++b)
                    for (int ch = 0; ch < c; ++ch) {
                      const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * s;
                      const auto cu = static_cast<std::size_t>(ch);
                      const T scale = gamma.values()[cu] * inv_std[cu];
                      if (mode == NormMode::kEval) {
                        for (std::size_t i = 0; i < s; ++i) dx[base + i] += scale * dy[base + i];
                        continue;
                      }
                      const T mdy = static_cast<T>(sum_dy[cu] / m);
                      const T mdyx = static_cast<T>(sum_dy_xh[cu] / m);
                      for (std::size_t i = 0; i < s; ++i) {
                        dx[base + i] += scale * (dy[base + i] - mdy - xh[base + i] * mdyx);
                      }
                    }
                });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  auto x = input.values();
  auto y = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  check_finite(out, "relu");
  if (tape.should_record({&input})) {
    tape.record("relu", {input}, out, [input, out]() mutable {
      auto dx = input.ensure_grad();
      auto dy = out.grad();
      auto x = input.values();
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (x[i] > T{0}) dx[i] += dy[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> maxpool3d(Tape<T>& tape, const Tensor<T>& input, int kernel, int stride, int padding) {
  require_rank(input.shape(), 5, "maxpool3d input");
  require(kernel >= 1 && stride >= 1 && padding >= 0 && 2 * padding <= kernel,
          ErrorCode::kShapeMismatch, "maxpool3d: invalid parameters");
  const int n = input.dim(0), c = input.dim(1);
  std::array<int, 3> in{input.dim(2), input.dim(3), input.dim(4)}, o{};
  for (int a = 0; a < 3; ++a) {
    o[a] = (in[a] + 2 * padding - kernel) / stride + 1;
    require(o[a] >= 1 && in[a] + 2 * padding >= kernel, ErrorCode::kShapeMismatch,
            "maxpool3d: input smaller than window");
  }
  Tensor<T> out({n, c, o[0], o[1], o[2]});
  std::vector<std::size_t> argmax(out.numel());
  const T* x = input.values().data();
  T* y = out.values().data();
  const std::size_t in_s = spatial(input.shape()), out_s = spatial(out.shape());
  std::size_t oi = 0;
  for (int bc = 0; bc < n * c; ++bc) {
    const std::size_t base = static_cast<std::size_t>(bc) * in_s;
    for (int od = 0; od < o[0]; ++od)
      for (int oh = 0; oh < o[1]; ++oh)
        for (int ow = 0; ow < o[2]; ++ow, ++oi) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_i = base;
          for (int kd = 0; kd < kernel; ++kd) {
            const int id = od * stride - padding + kd;
            if (id < 0 || id >= in[0]) continue;
            for (int kh = 0; kh < kernel; ++kh) {
              const int ih = oh * stride - padding + kh;
              if (ih < 0 || ih >= in[1]) continue;
              for (int kw = 0; kw < kernel; ++kw) {
                const int iw = ow * stride - padding + kw;
                if (iw < 0 || iw >= in[2]) continue;
                const std::size_t idx = base + (static_cast<std::size_t>(id) * in[1] + ih) * in[2] + iw;
                if (x[idx] > best) {
                  best = x[idx];
                  best_i = idx;
                }
              }
            }
          }
          y[oi] = best;
          argmax[oi] = best_i;
        }
  }
  (void)out_s;
  check_finite(out, "maxpool3d");
  if (tape.should_record({&input})) {
    tape.record("maxpool3d", {input}, out, [input, out, argmax = std::move(argmax)]() mutable {
      auto dx = input.ensure_grad();
      auto dy = out.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avgpool(Tape<T>& tape, const Tensor<T>& input) {
  require_rank(input.shape(), 5, "global_avgpool input");
  const int n = input.dim(0), c = input.dim(1);
  const std::size_t s = spatial(input.shape());
  Tensor<T> out({n, c, 1, 1, 1});
  const T* x = input.values().data();
  for (std::size_t bc = 0; bc < static_cast<std::size_t>(n) * c; ++bc) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s; ++i) acc += x[bc * s + i];
    out.values()[bc] = static_cast<T>(acc / static_cast<double>(s));
  }
  check_finite(out, "global_avgpool");
  if (tape.should_record({&input})) {
    tape.record("global_avgpool", {input}, out, [input, out, s]() mutable {
      auto dx = input.ensure_grad();
      auto dy = out.grad();
      const T inv = T{1} / static_cast<T>(s);
      for (std::size_t bc = 0; bc < dy.size(); ++bc)
        for (std::size_t i = 0; i < s; ++i) dx[bc * s + i] += dy[bc] * inv;
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& input, Shape shape) {
  require(tensor::numel(shape) == input.numel(), ErrorCode::kShapeMismatch,
          "reshape: element count changes");
  Tensor<T> out(std::move(shape), std::vector<T>(input.values().begin(), input.values().end()));
  if (tape.should_record({&input})) {
    tape.record("reshape", {input}, out, [input, out]() mutable {
      accumulate_grad(input, std::span<const T>(out.grad()));
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input.shape(), 2, "linear input");
  require_rank(weight.shape(), 2, "linear weight");
  const int n = input.dim(0), f = input.dim(1), k = weight.dim(1);
  require(weight.dim(0) == f && bias.numel() == static_cast<std::size_t>(k), ErrorCode::kShapeMismatch,
          "linear: inner extents differ");
  Tensor<T> out({n, k});
  T* y = out.values().data();
  for (int b = 0; b < n; ++b)
    for (int j = 0; j < k; ++j) y[static_cast<std::size_t>(b) * k + j] = bias.values()[static_cast<std::size_t>(j)];
  gemm(false, false, n, k, f, T{1}, input.values().data(), f, weight.values().data(), k, T{1}, y, k);
  check_finite(out, "linear");
  if (tape.should_record({&input, &weight, &bias})) {
    tape.record("linear", {input, weight, bias}, out, [input, weight, bias, out]() mutable {
      const int n = input.dim(0), f = input.dim(1), k = weight.dim(1);
      const T* dy = out.grad().data();
      if (input.requires_grad()) {
        gemm(false, true, n, f, k, T{1}, dy, k, weight.values().data(), k, T{1},
             input.ensure_grad().data(), f);
      }
      if (weight.requires_grad()) {
        gemm(true, false, f, k, n, T{1}, input.values().data(), f, dy, k, T{1},
             weight.ensure_grad().data(), k);
      }
      if (bias.requires_grad()) {
        auto db = bias.ensure_grad();
        for (int b = 0; b < n; ++b)
          for (int j = 0; j < k; ++j) db[static_cast<std::size_t>(j)] += dy[static_cast<std::size_t>(b) * k + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_channel_bias(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& bias) {
  require(input.rank() >= 2, ErrorCode::kShapeMismatch, "add_channel_bias: rank < 2");
  const int n = input.dim(0), c = input.dim(1);
  require(bias.numel() == static_cast<std::size_t>(c), ErrorCode::kShapeMismatch,
          "add_channel_bias: bias length differs from channel count");
  const std::size_t s = input.numel() / (static_cast<std::size_t>(n) * c);
  Tensor<T> out(input.shape());
  for (std::size_t bc = 0; bc < static_cast<std::size_t>(n) * c; ++bc) {
    const T b = bias.values()[bc % static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < s; ++i) out.values()[bc * s + i] = input.values()[bc * s + i] + b;
  }
  check_finite(out, "add_channel_bias");
  if (tape.should_record({&input, &bias})) {
    tape.record("add_channel_bias", {input, bias}, out, [input, bias, out, s]() mutable {
      auto dy = out.grad();
      if (input.requires_grad()) accumulate_grad(input, std::span<const T>(dy));
      if (bias.requires_grad()) {
        auto db = bias.ensure_grad();
        const std::size_t c = db.size();
        for (std::size_t bc = 0; bc < dy.size() / s; ++bc) {
          T acc{0};
          for (std::size_t i = 0; i < s; ++i) acc += dy[bc * s + i];
          db[bc % c] += acc;
        }
      }
    });
  }
  return out;
}

namespace {

struct AxisMap {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

AxisMap axis_map(int in, int out) {
  AxisMap m;
  m.i0.resize(static_cast<std::size_t>(out));
  m.i1.resize(static_cast<std::size_t>(out));
  m.frac.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const auto ou = static_cast<std::size_t>(o);
    m.i0[ou] = i0;
    m.i1[ou] = std::min(i0 + 1, in - 1);
    m.frac[ou] = std::min(1.0, src - i0);
  }
  return m;
}

}  // namespace

template <typename T>
Tensor<T> trilinear_upsample(Tape<T>& tape, const Tensor<T>& input, std::array<int, 3> target) {
  require_rank(input.shape(), 5, "trilinear_upsample input");
  for (int t : target) require(t >= 1, ErrorCode::kShapeMismatch, "trilinear_upsample: target extent < 1");
  const int n = input.dim(0), c = input.dim(1);
  const std::array<int, 3> in{input.dim(2), input.dim(3), input.dim(4)};
  const AxisMap md = axis_map(in[0], target[0]), mh = axis_map(in[1], target[1]),
                mw = axis_map(in[2], target[2]);
  Tensor<T> out({n, c, target[0], target[1], target[2]});
  const std::size_t in_s = spatial(input.shape()), out_s = spatial(out.shape());
  const T* x = input.values().data();
  T* y = out.values().data();
  for (std::size_t bc = 0; bc < static_cast<std::size_t>(n) * c; ++bc) {
    const T* xp = x + bc * in_s;
    T* yp = y + bc * out_s;
    std::size_t oi = 0;
    for (int od = 0; od < target[0]; ++od) {
      const auto d = static_cast<std::size_t>(od);
      const T fd = static_cast<T>(md.frac[d]);
      for (int oh = 0; oh < target[1]; ++oh) {
        const auto h = static_cast<std::size_t>(oh);
        const T fh = static_cast<T>(mh.frac[h]);
        for (int ow = 0; ow < target[2]; ++ow, ++oi) {
          const auto w = static_cast<std::size_t>(ow);
          const T fw = static_cast<T>(mw.frac[w]);
          auto at = [&](int dd, int hh, int ww) {
            return xp[(static_cast<std::size_t>(dd) * in[1] + hh) * in[2] + ww];
          };
          const T c00 = at(md.i0[d], mh.i0[h], mw.i0[w]) * (T{1} - fw) + at(md.i0[d], mh.i0[h], mw.i1[w]) * fw;
          const T c01 = at(md.i0[d], mh.i1[h], mw.i0[w]) * (T{1} - fw) + at(md.i0[d], mh.i1[h], mw.i1[w]) * fw;
          const T c10 = at(md.i1[d], mh.i0[h], mw.i0[w]) * (T{1} - fw) + at(md.i1[d], mh.i0[h], mw.i1[w]) * fw;
          const T c11 = at(md.i1[d], mh.i1[h], mw.i0[w]) * (T{1} - fw) + at(md.i1[d], mh.i1[h], mw.i1[w]) * fw;
          const T c0 = c00 * (T{1} - fh) + c01 * fh;
          const T c1 = c10 * (T{1} - fh) + c11 * fh;
          yp[oi] = c0 * (T{1} - fd) + c1 * fd;
        }
      }
    }
  }
  check_finite(out, "trilinear_upsample");
  if (tape.should_record({&input})) {
    tape.record("trilinear_upsample", {input}, out, [input, out, md, mh, mw, in, target, in_s, out_s]() mutable {
      T* dx = input.ensure_grad().data();
      const T* dy = out.grad().data();
      const std::size_t bcs = input.numel() / in_s;
      for (std::size_t bc = 0; bc < bcs; ++bc) {
        T* xp = dx + bc * in_s;
        const T* yp = dy + bc * out_s;
        std::size_t oi = 0;
        for (int od = 0; od < target[0]; ++od) {
          const auto d = static_cast<std::size_t>(od);
          const T fd = static_cast<T>(md.frac[d]);
          for (int oh = 0; oh < target[1]; ++oh) {
            const auto h = static_cast<std::size_t>(oh);
            const T fh = static_cast<T>(mh.frac[h]);
            for (int ow = 0; ow < target[2]; ++ow, ++oi) {
              const auto w = static_cast<std::size_t>(ow);
              const T fw = static_cast<T>(mw.frac[w]);
              const T g = yp[oi];
              auto at = [&](int dd, int hh, int ww) -> T& {
                return xp[(static_cast<std::size_t>(dd) * in[1] + hh) * in[2] + ww];
              };
              at(md.i0[d], mh.i0[h], mw.i0[w]) += g * (T{1} - fd) * (T{1} - fh) * (T{1} - fw);
              at(md.i0[d], mh.i0[h], mw.i1[w]) += g * (T{1} - fd) * (T{1} - fh) * fw;
              at(md.i0[d], mh.i1[h], mw.i0[w]) += g * (T{1} - fd) * fh * (T{1} - fw);
              at(md.i0[d], mh.i1[h], mw.i1[w]) += g * (T{1} - fd) * fh * fw;
              at(md.i1[d], mh.i0[h], mw.i0[w]) += g * fd * (T{1} - fh) * (T{1} - fw);
              at(md.i1[d], mh.i0[h], mw.i1[w]) += g * fd * (T{1} - fh) * fw;
              at(md.i1[d], mh.i1[h], mw.i0[w]) += g * fd * fh * (T{1} - fw);
              at(md.i1[d], mh.i1[h], mw.i1[w]) += g * fd * fh * fw;
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::span<const std::int32_t> targets,
                                std::optional<std::int32_t> ignore_label) {
  require(logits.rank() == 2 || logits.rank() == 5, ErrorCode::kShapeMismatch,
          "softmax_cross_entropy: logits must be N x C or N x C x D x H x W");
  const int n = logits.dim(0), c = logits.dim(1);
  const std::size_t s = logits.rank() == 5 ? spatial(logits.shape()) : 1;
  require(targets.size() == static_cast<std::size_t>(n) * s, ErrorCode::kShapeMismatch,
          "softmax_cross_entropy: target count differs from position count");
  const T* x = logits.values().data();

  // Softmax probabilities are kept for the backward rule.
  std::vector<T> prob(logits.numel());
  double total = 0.0;
  std::size_t valid = 0;
  for (int b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < s; ++i) {
      const std::int32_t t = targets[static_cast<std::size_t>(b) * s + i];
      const bool ignored = ignore_label && t == *ignore_label;
      if (!ignored && (t < 0 || t >= c)) {
        fail(ErrorCode::kTargetOutOfRange, "target " + std::to_string(t) + " with " +
                                               std::to_string(c) + " classes");
      }
      auto idx = [&](int ch) { return (static_cast<std::size_t>(b) * c + ch) * s + i; };
      T mx = x[idx(0)];
      for (int ch = 1; ch < c; ++ch) mx = std::max(mx, x[idx(ch)]);
      double z = 0.0;
      for (int ch = 0; ch < c; ++ch) z += std::exp(static_cast<double>(x[idx(ch)] - mx));
      const double log_z = std::log(z);
      for (int ch = 0; ch < c; ++ch) {
        prob[idx(ch)] = static_cast<T>(std::exp(static_cast<double>(x[idx(ch)] - mx) - log_z));
      }
      if (ignored) continue;
      total += log_z - static_cast<double>(x[idx(t)] - mx);
      ++valid;
    }
  }
  Tensor<T> out({1});
  out.values()[0] = valid ? static_cast<T>(total / static_cast<double>(valid)) : T{0};
  check_finite(out, "softmax_cross_entropy");

  if (tape.should_record({&logits})) {
    std::vector<std::int32_t> tgt(targets.begin(), targets.end());
    tape.record("softmax_cross_entropy", {logits}, out,
                [logits, out, prob = std::move(prob), tgt = std::move(tgt), ignore_label, valid, s]() mutable {
                  if (valid == 0) return;
                  const int n = logits.dim(0), c = logits.dim(1);
                  const T scale = out.grad()[0] / static_cast<T>(valid);
                  auto dx = logits.ensure_grad();
                  for (int b = 0; b < n; ++b)
                    for (std::size_t i = 0; i < s; ++i) {
                      const std::int32_t t = tgt[static_cast<std::size_t>(b) * s + i];
                      if (ignore_label && t == *ignore_label) continue;
                      for (int ch = 0; ch < c; ++ch) {
                        const std::size_t k = (static_cast<std::size_t>(b) * c + ch) * s + i;
                        dx[k] += scale * (prob[k] - (ch == t ? T{1} : T{0}));
                      }
                    }
                });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), ErrorCode::kShapeMismatch,
          "add: " + tensor::shape_string(a.shape()) + " vs " + tensor::shape_string(b.shape()));
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = a.values()[i] + b.values()[i];
  check_finite(out, "add");
  if (tape.should_record({&a, &b})) {
    tape.record("add", {a, b}, out, [a, b, out]() mutable {
      if (a.requires_grad()) accumulate_grad(a, std::span<const T>(out.grad()));
      if (b.requires_grad()) accumulate_grad(b, std::span<const T>(out.grad()));
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), ErrorCode::kShapeMismatch, "mul: shapes differ");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
  check_finite(out, "mul");
  if (tape.should_record({&a, &b})) {
    tape.record("mul", {a, b}, out, [a, b, out]() mutable {
      auto dy = out.grad();
      if (a.requires_grad()) {
        auto da = a.ensure_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b.values()[i];
      }
      if (b.requires_grad()) {
        auto db = b.ensure_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a.values()[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& input) {
  double acc = 0.0;
  for (T v : input.values()) acc += v;
  Tensor<T> out({1});
  out.values()[0] = static_cast<T>(acc);
  check_finite(out, "sum");
  if (tape.should_record({&input})) {
    tape.record("sum", {input}, out, [input, out]() mutable {
      auto dx = input.ensure_grad();
      const T g = out.grad()[0];
      for (T& v : dx) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  const int n = logits.dim(0), c = logits.dim(1);
  const std::size_t s = logits.numel() / (static_cast<std::size_t>(n) * c);
  Tensor<T> out(logits.shape());
  for (int b = 0; b < n; ++b)
    for (std::size_t i = 0; i < s; ++i) {
      auto idx = [&](int ch) { return (static_cast<std::size_t>(b) * c + ch) * s + i; };
      T mx = logits.values()[idx(0)];
      for (int ch = 1; ch < c; ++ch) mx = std::max(mx, logits.values()[idx(ch)]);
      double z = 0.0;
      for (int ch = 0; ch < c; ++ch) z += std::exp(static_cast<double>(logits.values()[idx(ch)] - mx));
      for (int ch = 0; ch < c; ++ch) {
        out.values()[idx(ch)] = static_cast<T>(std::exp(static_cast<double>(logits.values()[idx(ch)] - mx)) / z);
      }
    }
  return out;
}

template <typename T>
std::vector<std::int32_t> argmax_channels(const Tensor<T>& logits) {
  const int n = logits.dim(0), c = logits.dim(1);
  const std::size_t s = logits.numel() / (static_cast<std::size_t>(n) * c);
  std::vector<std::int32_t> out(static_cast<std::size_t>(n) * s);
  for (int b = 0; b < n; ++b)
    for (std::size_t i = 0; i < s; ++i) {
      int best = 0;
      T best_v = logits.values()[(static_cast<std::size_t>(b) * c) * s + i];
      for (int ch = 1; ch < c; ++ch) {
        const T v = logits.values()[(static_cast<std::size_t>(b) * c + ch) * s + i];
        if (v > best_v) {
          best_v = v;
          best = ch;
        }
      }
      out[static_cast<std::size_t>(b) * s + i] = best;
    }
  return out;
}

#define MED3D_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> conv3d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const ConvParams&,       \
                            ConvAlgo);                                                              \
  template Tensor<T> conv_transpose3d(Tape<T>&, const Tensor<T>&, const Tensor<T>&,                \
                                      const ConvTransposeParams&, ConvAlgo);                        \
  template Tensor<T> batchnorm3d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                 RunningStats<T>&, NormMode, double, double);                       \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> maxpool3d(Tape<T>&, const Tensor<T>&, int, int, int);                         \
  template Tensor<T> global_avgpool(Tape<T>&, const Tensor<T>&);                                   \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                   \
  template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> add_channel_bias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> trilinear_upsample(Tape<T>&, const Tensor<T>&, std::array<int, 3>);           \
  template Tensor<T> softmax_cross_entropy(Tape<T>&, const Tensor<T>&,                             \
                                           std::span<const std::int32_t>,                          \
                                           std::optional<std::int32_t>);                           \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                              \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                           \
  template std::vector<std::int32_t> argmax_channels(const Tensor<T>&);

MED3D_INSTANTIATE_OPS(float)
MED3D_INSTANTIATE_OPS(double)

#undef MED3D_INSTANTIATE_OPS

}  // namespace med3d::ops
