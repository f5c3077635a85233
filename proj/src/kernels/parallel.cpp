/*
 * Copyright (c) 2026, The davit-logo Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// OpenMP kernels. Work is split over independent output rows, planes or
// channels only; each output element is reduced in a fixed order by a single
// thread, so results are identical for any thread count.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "davit/kernels.hpp"

namespace davit::kernels::parallel {

namespace {

// Column range [lo, hi) of outputs whose input index o * stride + k - pad lies in [0, extent).
inline void valid_range(std::size_t out, std::size_t stride, std::size_t k, std::size_t pad, std::size_t extent,
                        std::size_t& lo, std::size_t& hi) {
  // o * stride + k >= pad  and  o * stride + k < extent + pad
  lo = k >= pad ? 0 : (pad - k + stride - 1) / stride;
  const std::size_t lim = extent + pad;
  hi = k >= lim ? 0 : std::min(out, (lim - k + stride - 1) / stride);
  if (hi < lo) hi = lo;
}

}  // namespace

template <typename Real>
void gemm(const GemmShape& s, const Real* a, const Real* b, Real* c, bool accumulate) {
  // B^T is materialized once so the inner loop runs over contiguous columns.
  std::vector<Real> bt;
  std::size_t stride_b = s.stride_b;
  if (s.trans_b) {
    const std::size_t distinct = s.stride_b == 0 ? 1 : s.batch;
    bt.resize(distinct * s.k * s.n);
#pragma omp parallel for schedule(static)
    for (long long bi = 0; bi < (long long)distinct; ++bi) {
      const Real* src = b + bi * s.stride_b;
      Real* dst = bt.data() + bi * s.k * s.n;
      for (std::size_t j = 0; j < s.n; ++j) {
        for (std::size_t p = 0; p < s.k; ++p) dst[p * s.n + j] = src[j * s.k + p];
      }
    }
    b = bt.data();
    stride_b = s.stride_b == 0 ? 0 : s.k * s.n;
  }

  const long long rows = (long long)(s.batch * s.m);
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < rows; ++r) {
    const std::size_t bi = std::size_t(r) / s.m, i = std::size_t(r) % s.m;
    const Real* ab = a + bi * s.stride_a;
    const Real* bb = b + bi * stride_b;
    Real* crow = c + bi * s.stride_c + i * s.n;
    if (!accumulate) std::fill(crow, crow + s.n, Real(0));
    for (std::size_t p = 0; p < s.k; ++p) {
      const Real av = s.trans_a ? ab[p * s.m + i] : ab[i * s.k + p];
      const Real* brow = bb + p * s.n;
      for (std::size_t j = 0; j < s.n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Real>
void conv2d_forward(const ConvGeometry& g, const Real* x, const Real* w, Real* y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const long long planes = (long long)(g.batch * g.out_channels);
#pragma omp parallel for schedule(static)
  for (long long pl = 0; pl < planes; ++pl) {
    const std::size_t n = std::size_t(pl) / g.out_channels, co = std::size_t(pl) % g.out_channels;
    Real* yp = y + std::size_t(pl) * oh * ow;
    std::fill(yp, yp + oh * ow, Real(0));
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      const Real* xp = x + (n * g.in_channels + ci) * g.in_h * g.in_w;
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        std::size_t oy_lo, oy_hi;
        valid_range(oh, g.stride, ky, g.pad_top, g.in_h, oy_lo, oy_hi);
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          std::size_t ox_lo, ox_hi;
          valid_range(ow, g.stride, kx, g.pad_left, g.in_w, ox_lo, ox_hi);
          const Real wv = w[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
          for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
            const Real* xrow = xp + (oy * g.stride + ky - g.pad_top) * g.in_w;
            Real* yrow = yp + oy * ow;
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
              yrow[ox] += wv * xrow[ox * g.stride + kx - g.pad_left];
            }
          }
        }
      }
    }
  }
}

template <typename Real>
void conv2d_backward_input(const ConvGeometry& g, const Real* dy, const Real* w, Real* dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const long long planes = (long long)(g.batch * g.in_channels);
#pragma omp parallel for schedule(static)
  for (long long pl = 0; pl < planes; ++pl) {
    const std::size_t n = std::size_t(pl) / g.in_channels, ci = std::size_t(pl) % g.in_channels;
    Real* dxp = dx + std::size_t(pl) * g.in_h * g.in_w;
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const Real* dyp = dy + (n * g.out_channels + co) * oh * ow;
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        std::size_t oy_lo, oy_hi;
        valid_range(oh, g.stride, ky, g.pad_top, g.in_h, oy_lo, oy_hi);
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          std::size_t ox_lo, ox_hi;
          valid_range(ow, g.stride, kx, g.pad_left, g.in_w, ox_lo, ox_hi);
          const Real wv = w[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
          for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
            Real* dxrow = dxp + (oy * g.stride + ky - g.pad_top) * g.in_w;
            const Real* dyrow = dyp + oy * ow;
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
              dxrow[ox * g.stride + kx - g.pad_left] += wv * dyrow[ox];
            }
          }
        }
      }
    }
  }
}

template <typename Real>
void conv2d_backward_weight(const ConvGeometry& g, const Real* dy, const Real* x, Real* dw) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const long long pairs = (long long)(g.out_channels * g.in_channels);
#pragma omp parallel for schedule(static)
  for (long long pr = 0; pr < pairs; ++pr) {
    const std::size_t co = std::size_t(pr) / g.in_channels, ci = std::size_t(pr) % g.in_channels;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      std::size_t oy_lo, oy_hi;
      valid_range(oh, g.stride, ky, g.pad_top, g.in_h, oy_lo, oy_hi);
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        std::size_t ox_lo, ox_hi;
        valid_range(ow, g.stride, kx, g.pad_left, g.in_w, ox_lo, ox_hi);
        Real acc = 0;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const Real* dyp = dy + (n * g.out_channels + co) * oh * ow;
          const Real* xp = x + (n * g.in_channels + ci) * g.in_h * g.in_w;
          for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
            const Real* xrow = xp + (oy * g.stride + ky - g.pad_top) * g.in_w;
            const Real* dyrow = dyp + oy * ow;
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) acc += dyrow[ox] * xrow[ox * g.stride + kx - g.pad_left];
          }
        }
        dw[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx] += acc;
      }
    }
  }
}

template <typename Real>
void softmax(std::size_t outer, std::size_t n, std::size_t inner, const Real* x, Real* y, RowMask mask) {
  const long long rows = (long long)(outer * inner);
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < rows; ++r) {
    const std::size_t o = std::size_t(r) / inner, i = std::size_t(r) % inner;
    const std::uint8_t* m = mask.data ? mask.data + (std::size_t(r) / mask.rows_per_pattern % mask.patterns) * n
                                      : nullptr;
    const Real* xr = x + o * n * inner + i;
    Real* yr = y + o * n * inner + i;
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (m && !m[j]) continue;
      mx = std::max(mx, xr[j * inner]);
    }
    Real sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      yr[j * inner] = (m && !m[j]) ? Real(0) : std::exp(xr[j * inner] - mx);
      sum += yr[j * inner];
    }
    for (std::size_t j = 0; j < n; ++j) yr[j * inner] /= sum;
  }
}

template <typename Real>
void softmax_backward(std::size_t outer, std::size_t n, std::size_t inner, const Real* y, const Real* dy, Real* dx) {
  const long long rows = (long long)(outer * inner);
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < rows; ++r) {
    const std::size_t base = (std::size_t(r) / inner) * n * inner + std::size_t(r) % inner;
    Real dot = 0;
    for (std::size_t j = 0; j < n; ++j) dot += y[base + j * inner] * dy[base + j * inner];
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t at = base + j * inner;
      dx[at] += y[at] * (dy[at] - dot);
    }
  }
}

template <typename Real>
void layer_norm(std::size_t rows, std::size_t c, const Real* x, const Real* gamma, const Real* beta, double eps,
                Real* y, Real* mean, Real* rstd) {
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < (long long)rows; ++r) {
    const Real* xr = x + r * c;
    double mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= double(c);
    double var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= double(c);
    const double rs = 1.0 / std::sqrt(var + eps);
    Real* yr = y + r * c;
    for (std::size_t j = 0; j < c; ++j) yr[j] = static_cast<Real>((xr[j] - mu) * rs * gamma[j] + beta[j]);
    mean[r] = static_cast<Real>(mu);
    rstd[r] = static_cast<Real>(rs);
  }
}

template <typename Real>
void layer_norm_backward(std::size_t rows, std::size_t c, const Real* x, const Real* gamma, const Real* mean,
                         const Real* rstd, const Real* dy, Real* dx, Real* dgamma, Real* dbeta) {
  if (dx) {
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < (long long)rows; ++r) {
      const Real* xr = x + r * c;
      const Real* gr = dy + r * c;
      double mean_g = 0, mean_gx = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const double xhat = (double(xr[j]) - mean[r]) * rstd[r];
        const double gh = double(gr[j]) * gamma[j];
        mean_g += gh;
        mean_gx += gh * xhat;
      }
      mean_g /= double(c);
      mean_gx /= double(c);
      for (std::size_t j = 0; j < c; ++j) {
        const double xhat = (double(xr[j]) - mean[r]) * rstd[r];
        const double gh = double(gr[j]) * gamma[j];
        dx[r * c + j] += static_cast<Real>(rstd[r] * (gh - mean_g - xhat * mean_gx));
      }
    }
  }
  if (dgamma || dbeta) {
#pragma omp parallel for schedule(static)
    for (long long j = 0; j < (long long)c; ++j) {
      double gsum = 0, bsum = 0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double xhat = (double(x[r * c + j]) - mean[r]) * rstd[r];
        gsum += double(dy[r * c + j]) * xhat;
        bsum += dy[r * c + j];
      }
      if (dgamma) dgamma[j] += static_cast<Real>(gsum);
      if (dbeta) dbeta[j] += static_cast<Real>(bsum);
    }
  }
}

#define DAVIT_INSTANTIATE(Real)                                                                             \
  template void gemm<Real>(const GemmShape&, const Real*, const Real*, Real*, bool);                        \
  template void conv2d_forward<Real>(const ConvGeometry&, const Real*, const Real*, Real*);                 \
  template void conv2d_backward_input<Real>(const ConvGeometry&, const Real*, const Real*, Real*);          \
  template void conv2d_backward_weight<Real>(const ConvGeometry&, const Real*, const Real*, Real*);         \
  template void softmax<Real>(std::size_t, std::size_t, std::size_t, const Real*, Real*, RowMask);          \
  template void softmax_backward<Real>(std::size_t, std::size_t, std::size_t, const Real*, const Real*,     \
                                       Real*);                                                              \
  template void layer_norm<Real>(std::size_t, std::size_t, const Real*, const Real*, const Real*, double,   \
                                 Real*, Real*, Real*);                                                      \
  template void layer_norm_backward<Real>(std::size_t, std::size_t, const Real*, const Real*, const Real*,  \
                                          const Real*, const Real*, Real*, Real*, Real*);

DAVIT_INSTANTIATE(float)
DAVIT_INSTANTIATE(double)

}  // namespace davit::kernels::parallel
