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

#pragma once

#include <cstddef>
#include <cstdint>

// Raw compute kernels behind the differentiable ops.
//
// Each family has a `reference` implementation (plain serial loops, kept as
// the test oracle and benchmark baseline) and a `parallel` implementation
// (OpenMP over independent output rows/channels). Every parallel kernel
// computes each output element with a fixed reduction order, so results do
// not depend on the thread count.
namespace davit::kernels {

enum class Backend { Reference, Parallel };

void set_backend(Backend b);
Backend backend();
const char* backend_name(Backend b);

// Scoped backend override.
class BackendGuard {
 public:
  explicit BackendGuard(Backend b) : saved_(backend()) { set_backend(b); }
  ~BackendGuard() { set_backend(saved_); }
  BackendGuard(const BackendGuard&) = delete;
  BackendGuard& operator=(const BackendGuard&) = delete;

 private:
  Backend saved_;
};

// C[b] (+)= op(A[b]) * op(B[b]) for b in [0, batch).
// op(A) is m x k, op(B) is k x n, C is m x n, all row-major and contiguous.
// A stride of 0 broadcasts that operand across the batch.
struct GemmShape {
  std::size_t batch = 1;
  std::size_t m = 0, n = 0, k = 0;
  bool trans_a = false;
  bool trans_b = false;
  std::size_t stride_a = 0, stride_b = 0, stride_c = 0;
};

// NCHW convolution with square kernel and asymmetric zero padding.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 0, in_h = 0, in_w = 0;
  std::size_t out_channels = 0, kernel = 1, stride = 1;
  std::size_t pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
  std::size_t out_h() const { return (in_h + pad_top + pad_bottom - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + pad_left + pad_right - kernel) / stride + 1; }
};

// Optional key mask for row softmax: row r uses pattern (r / rows_per_pattern) % patterns,
// a run of `n` bytes where 0 marks a position that must get zero weight.
struct RowMask {
  const std::uint8_t* data = nullptr;
  std::size_t rows_per_pattern = 1;
  std::size_t patterns = 1;
};

#define DAVIT_KERNEL_DECLS                                                                                    \
  template <typename Real>                                                                                    \
  void gemm(const GemmShape& s, const Real* a, const Real* b, Real* c, bool accumulate);                      \
  template <typename Real>                                                                                    \
  void conv2d_forward(const ConvGeometry& g, const Real* x, const Real* w, Real* y);                           \
  template <typename Real>                                                                                    \
  void conv2d_backward_input(const ConvGeometry& g, const Real* dy, const Real* w, Real* dx);                  \
  template <typename Real>                                                                                    \
  void conv2d_backward_weight(const ConvGeometry& g, const Real* dy, const Real* x, Real* dw);                \
  /* Softmax over axis of extent n; element j of row (o, i) sits at (o * n + j) * inner + i. */              \
  template <typename Real>                                                                                    \
  void softmax(std::size_t outer, std::size_t n, std::size_t inner, const Real* x, Real* y, RowMask mask);    \
  template <typename Real>                                                                                    \
  void softmax_backward(std::size_t outer, std::size_t n, std::size_t inner, const Real* y, const Real* dy,   \
                        Real* dx);                                                                            \
  template <typename Real>                                                                                    \
  void layer_norm(std::size_t rows, std::size_t c, const Real* x, const Real* gamma, const Real* beta,        \
                  double eps, Real* y, Real* mean, Real* rstd);                                               \
  template <typename Real>                                                                                    \
  void layer_norm_backward(std::size_t rows, std::size_t c, const Real* x, const Real* gamma,                 \
                           const Real* mean, const Real* rstd, const Real* dy, Real* dx, Real* dgamma,        \
                           Real* dbeta);

namespace reference {
DAVIT_KERNEL_DECLS
}  // namespace reference

namespace parallel {
DAVIT_KERNEL_DECLS
}  // namespace parallel

#undef DAVIT_KERNEL_DECLS

// Dispatch to the active backend.
template <typename Real>
void gemm(const GemmShape& s, const Real* a, const Real* b, Real* c, bool accumulate) {
  backend() == Backend::Parallel ? parallel::gemm(s, a, b, c, accumulate) : reference::gemm(s, a, b, c, accumulate);
}
template <typename Real>
void conv2d_forward(const ConvGeometry& g, const Real* x, const Real* w, Real* y) {
  backend() == Backend::Parallel ? parallel::conv2d_forward(g, x, w, y) : reference::conv2d_forward(g, x, w, y);
}
template <typename Real>
void conv2d_backward_input(const ConvGeometry& g, const Real* dy, const Real* w, Real* dx) {
  backend() == Backend::Parallel ? parallel::conv2d_backward_input(g, dy, w, dx)
                                 : reference::conv2d_backward_input(g, dy, w, dx);
}
template <typename Real>
void conv2d_backward_weight(const ConvGeometry& g, const Real* dy, const Real* x, Real* dw) {
  backend() == Backend::Parallel ? parallel::conv2d_backward_weight(g, dy, x, dw)
                                 : reference::conv2d_backward_weight(g, dy, x, dw);
}
template <typename Real>
void softmax(std::size_t outer, std::size_t n, std::size_t inner, const Real* x, Real* y, RowMask mask = {}) {
  backend() == Backend::Parallel ? parallel::softmax(outer, n, inner, x, y, mask)
                                 : reference::softmax(outer, n, inner, x, y, mask);
}
template <typename Real>
void softmax_backward(std::size_t outer, std::size_t n, std::size_t inner, const Real* y, const Real* dy, Real* dx) {
  backend() == Backend::Parallel ? parallel::softmax_backward(outer, n, inner, y, dy, dx)
                                 : reference::softmax_backward(outer, n, inner, y, dy, dx);
}
template <typename Real>
void layer_norm(std::size_t rows, std::size_t c, const Real* x, const Real* gamma, const Real* beta, double eps,
                Real* y, Real* mean, Real* rstd) {
  backend() == Backend::Parallel ? parallel::layer_norm(rows, c, x, gamma, beta, eps, y, mean, rstd)
                                 : reference::layer_norm(rows, c, x, gamma, beta, eps, y, mean, rstd);
}
template <typename Real>
void layer_norm_backward(std::size_t rows, std::size_t c, const Real* x, const Real* gamma, const Real* mean,
                         const Real* rstd, const Real* dy, Real* dx, Real* dgamma, Real* dbeta) {
  backend() == Backend::Parallel
      ? parallel::layer_norm_backward(rows, c, x, gamma, mean, rstd, dy, dx, dgamma, dbeta)
      : reference::layer_norm_backward(rows, c, x, gamma, mean, rstd, dy, dx, dgamma, dbeta);
}

// Threads available to the parallel backend (1 when built without OpenMP).
int max_threads();
void set_num_threads(int n);

}  // namespace davit::kernels
