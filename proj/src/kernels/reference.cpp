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

// Serial reference kernels. Plain loops in the most literal order; these are
// the baseline the parallel kernels are tested and benchmarked against.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "davit/kernels.hpp"

namespace davit::kernels::reference {

template <typename Real>
void gemm(const GemmShape& s, const Real* a, const Real* b, Real* c, bool accumulate) {
  for (std::size_t bi = 0; bi < s.batch; ++bi) {
    const Real* ab = a + bi * s.stride_a;
    const Real* bb = b + bi * s.stride_b;
    Real* cb = c + bi * s.stride_c;
    for (std::size_t i = 0; i < s.m; ++i) {
      for (std::size_t j = 0; j < s.n; ++j) {
        Real acc = accumulate ? cb[i * s.n + j] : Real(0);
        for (std::size_t p = 0; p < s.k; ++p) {
          const Real av = s.trans_a ? ab[p * s.m + i] : ab[i * s.k + p];
          const Real bv = s.trans_b ? bb[j * s.k + p] : bb[p * s.n + j];
          acc += av * bv;
        }
        cb[i * s.n + j] = acc;
      }
    }
  }
}

template <typename Real>
void conv2d_forward(const ConvGeometry& g, const Real* x, const Real* w, Real* y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          Real acc = 0;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < g.kernel; ++ky) {
              for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                const long iy = long(oy * g.stride + ky) - long(g.pad_top);
                const long ix = long(ox * g.stride + kx) - long(g.pad_left);
                if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
                acc += x[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix] *
                       w[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
              }
            }
          }
          y[((n * g.out_channels + co) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

template <typename Real>
void conv2d_backward_input(const ConvGeometry& g, const Real* dy, const Real* w, Real* dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const Real gv = dy[((n * g.out_channels + co) * oh + oy) * ow + ox];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < g.kernel; ++ky) {
              for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                const long iy = long(oy * g.stride + ky) - long(g.pad_top);
                const long ix = long(ox * g.stride + kx) - long(g.pad_left);
                if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
                dx[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix] +=
                    gv * w[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
              }
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
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          Real acc = 0;
          for (std::size_t n = 0; n < g.batch; ++n) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const long iy = long(oy * g.stride + ky) - long(g.pad_top);
                const long ix = long(ox * g.stride + kx) - long(g.pad_left);
                if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
                acc += dy[((n * g.out_channels + co) * oh + oy) * ow + ox] *
                       x[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
          dw[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx] += acc;
        }
      }
    }
  }
}

template <typename Real>
void softmax(std::size_t outer, std::size_t n, std::size_t inner, const Real* x, Real* y, RowMask mask) {
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::uint8_t* m =
          mask.data ? mask.data + ((o * inner + i) / mask.rows_per_pattern % mask.patterns) * n : nullptr;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (m && !m[j]) continue;
        mx = std::max(mx, x[(o * n + j) * inner + i]);
      }
      Real sum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t at = (o * n + j) * inner + i;
        y[at] = (m && !m[j]) ? Real(0) : std::exp(x[at] - mx);
        sum += y[at];
      }
      for (std::size_t j = 0; j < n; ++j) y[(o * n + j) * inner + i] /= sum;
    }
  }
}

template <typename Real>
void softmax_backward(std::size_t outer, std::size_t n, std::size_t inner, const Real* y, const Real* dy, Real* dx) {
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t at = (o * n + j) * inner + i;
        dot += y[at] * dy[at];
      }
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t at = (o * n + j) * inner + i;
        dx[at] += y[at] * (dy[at] - dot);
      }
    }
  }
}

template <typename Real>
void layer_norm(std::size_t rows, std::size_t c, const Real* x, const Real* gamma, const Real* beta, double eps,
                Real* y, Real* mean, Real* rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * c;
    double mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= double(c);
    double var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= double(c);
    const double rs = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      y[r * c + j] = static_cast<Real>((xr[j] - mu) * rs * gamma[j] + beta[j]);
    }
    mean[r] = static_cast<Real>(mu);
    rstd[r] = static_cast<Real>(rs);
  }
}

template <typename Real>
void layer_norm_backward(std::size_t rows, std::size_t c, const Real* x, const Real* gamma, const Real* mean,
                         const Real* rstd, const Real* dy, Real* dx, Real* dgamma, Real* dbeta) {
  std::vector<double> gsum(c, 0.0), bsum(c, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * c;
    const Real* gr = dy + r * c;
    double mean_g = 0, mean_gx = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double xhat = (double(xr[j]) - mean[r]) * rstd[r];
      const double gh = double(gr[j]) * gamma[j];
      mean_g += gh;
      mean_gx += gh * xhat;
      gsum[j] += double(gr[j]) * xhat;
      bsum[j] += gr[j];
    }
    mean_g /= double(c);
    mean_gx /= double(c);
    if (dx) {
      for (std::size_t j = 0; j < c; ++j) {
        const double xhat = (double(xr[j]) - mean[r]) * rstd[r];
        const double gh = double(gr[j]) * gamma[j];
        dx[r * c + j] += static_cast<Real>(rstd[r] * (gh - mean_g - xhat * mean_gx));
      }
    }
  }
  for (std::size_t j = 0; j < c; ++j) {
    if (dgamma) dgamma[j] += static_cast<Real>(gsum[j]);
    if (dbeta) dbeta[j] += static_cast<Real>(bsum[j]);
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

}  // namespace davit::kernels::reference
