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

#include "davit/ops.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "davit/error.hpp"
#include "davit/kernels.hpp"

namespace davit::ops {

namespace {

template <typename Real>
void require_same_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename Real>
void accumulate(const Tensor<Real>& t, std::span<const Real> g) {
  auto dst = t.grad_mut();
  const long long n = (long long)dst.size();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) dst[i] += g[i];
}

// Sums rows of a [rows, n] matrix into dst[n]; columns in parallel, rows in order.
template <typename Real>
void accumulate_column_sums(std::span<Real> dst, std::span<const Real> g, std::size_t rows, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long j = 0; j < (long long)n; ++j) {
    Real acc = 0;
    for (std::size_t r = 0; r < rows; ++r) acc += g[r * n + j];
    dst[j] += acc;
  }
}

}  // namespace

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  require_same_shape(a, b, "add");
  Tensor<Real> out(a.shape());
  auto o = out.data();
  auto x = a.data(), y = b.data();
  const long long n = (long long)o.size();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) o[i] = x[i] + y[i];
  check_finite(out, "add");
  if (auto* tape = Tape<Real>::recording({&a, &b})) {
    tape->record("add", {a, b}, out, [a, b](std::span<const Real> g) mutable {
      if (a.requires_grad()) accumulate(a, g);
      if (b.requires_grad()) accumulate(b, g);
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  require_same_shape(a, b, "mul");
  Tensor<Real> out(a.shape());
  auto o = out.data();
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  check_finite(out, "mul");
  if (auto* tape = Tape<Real>::recording({&a, &b})) {
    tape->record("mul", {a, b}, out, [a, b](std::span<const Real> g) mutable {
      if (a.requires_grad()) {
        auto d = a.grad_mut();
        auto y = b.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i];
      }
      if (b.requires_grad()) {
        auto d = b.grad_mut();
        auto x = a.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * x[i];
      }
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, double factor) {
  Tensor<Real> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  const Real f = static_cast<Real>(factor);
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * f;
  check_finite(out, "scale");
  if (auto* tape = Tape<Real>::recording({&a})) {
    tape->record("scale", {a}, out, [a, f](std::span<const Real> g) mutable {
      auto d = a.grad_mut();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * f;
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> add_bias(const Tensor<Real>& x, const Tensor<Real>& bias) {
  const std::size_t n = x.shape().back();
  if (bias.rank() != 1 || bias.dim(0) != n) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match last axis of " +
                     shape_str(x.shape()));
  }
  Tensor<Real> out(x.shape());
  auto o = out.data();
  auto xv = x.data(), bv = bias.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] + bv[i % n];
  check_finite(out, "add_bias");
  if (auto* tape = Tape<Real>::recording({&x, &bias})) {
    tape->record("add_bias", {x, bias}, out, [x, bias, n](std::span<const Real> g) mutable {
      if (x.requires_grad()) accumulate(x, g);
      if (bias.requires_grad()) accumulate_column_sums(bias.grad_mut(), g, g.size() / n, n);
    });
  }
  return out;
}

namespace {

struct MatmulDims {
  std::size_t batch, m, n, k;
  std::size_t a_rows, a_cols, b_rows, b_cols;
  bool a_batched, b_batched;
};

template <typename Real>
MatmulDims matmul_dims(const Tensor<Real>& a, const Tensor<Real>& b, bool ta, bool tb) {
  const std::size_t ra = a.rank(), rb = b.rank();
  if (ra < 2 || ra > 3 || rb < 2 || rb > 3) {
    throw ShapeError("matmul: operands must be rank 2 or 3, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  MatmulDims d{};
  d.a_batched = ra == 3;
  d.b_batched = rb == 3;
  d.a_rows = a.dim(ra - 2);
  d.a_cols = a.dim(ra - 1);
  d.b_rows = b.dim(rb - 2);
  d.b_cols = b.dim(rb - 1);
  d.m = ta ? d.a_cols : d.a_rows;
  d.k = ta ? d.a_rows : d.a_cols;
  const std::size_t kb = tb ? d.b_cols : d.b_rows;
  d.n = tb ? d.b_rows : d.b_cols;
  if (d.k != kb) {
    throw ShapeError("matmul: inner extents disagree for " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  if (d.a_batched && d.b_batched && a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul: batch extents disagree for " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  d.batch = d.a_batched ? a.dim(0) : (d.b_batched ? b.dim(0) : 1);
  return d;
}

// Runs C (+)= op(A) op(B) batch by batch when C is shared across the batch,
// keeping the reduction order fixed without concurrent writes to C.
template <typename Real>
void gemm_into(kernels::GemmShape s, const Real* a, const Real* b, Real* c) {
  if (s.stride_c != 0 || s.batch == 1) {
    kernels::gemm(s, a, b, c, true);
    return;
  }
  const std::size_t batch = s.batch;
  s.batch = 1;
  for (std::size_t bi = 0; bi < batch; ++bi) kernels::gemm(s, a + bi * s.stride_a, b + bi * s.stride_b, c, true);
}

}  // namespace

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b, bool trans_a, bool trans_b) {
  const MatmulDims d = matmul_dims(a, b, trans_a, trans_b);
  const bool batched = d.a_batched || d.b_batched;
  Tensor<Real> out(batched ? Shape{d.batch, d.m, d.n} : Shape{d.m, d.n});
  kernels::GemmShape s;
  s.batch = d.batch;
  s.m = d.m;
  s.n = d.n;
  s.k = d.k;
  s.trans_a = trans_a;
  s.trans_b = trans_b;
  s.stride_a = d.a_batched ? d.m * d.k : 0;
  s.stride_b = d.b_batched ? d.k * d.n : 0;
  s.stride_c = d.m * d.n;
  kernels::gemm(s, a.data().data(), b.data().data(), out.data().data(), false);
  check_finite(out, "matmul");

  if (auto* tape = Tape<Real>::recording({&a, &b})) {
    tape->record("matmul", {a, b}, out, [a, b, d, trans_a, trans_b](std::span<const Real> g) mutable {
      const std::size_t sa = d.a_batched ? d.m * d.k : 0;
      const std::size_t sb = d.b_batched ? d.k * d.n : 0;
      const std::size_t sg = d.m * d.n;
      if (a.requires_grad()) {
        kernels::GemmShape s;
        s.batch = d.batch;
        if (!trans_a) {  // dA = dC op(B)^T
          s.m = d.m, s.n = d.k, s.k = d.n;
          s.trans_a = false, s.trans_b = !trans_b;
          s.stride_a = sg, s.stride_b = sb, s.stride_c = sa;
          gemm_into(s, g.data(), b.data().data(), a.grad_mut().data());
        } else {  // dA = op(B) dC^T
          s.m = d.k, s.n = d.m, s.k = d.n;
          s.trans_a = trans_b, s.trans_b = true;
          s.stride_a = sb, s.stride_b = sg, s.stride_c = sa;
          gemm_into(s, b.data().data(), g.data(), a.grad_mut().data());
        }
      }
      if (b.requires_grad()) {
        kernels::GemmShape s;
        s.batch = d.batch;
        if (!trans_b) {  // dB = op(A)^T dC
          s.m = d.k, s.n = d.n, s.k = d.m;
          s.trans_a = !trans_a, s.trans_b = false;
          s.stride_a = sa, s.stride_b = sg, s.stride_c = sb;
          gemm_into(s, a.data().data(), g.data(), b.grad_mut().data());
        } else {  // dB = dC^T op(A)
          s.m = d.n, s.n = d.k, s.k = d.m;
          s.trans_a = true, s.trans_b = trans_a;
          s.stride_a = sg, s.stride_b = sa, s.stride_c = sb;
          gemm_into(s, g.data(), a.data().data(), b.grad_mut().data());
        }
      }
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias) {
  if (weight.rank() != 2) throw ShapeError("linear: weight must be rank 2, got " + shape_str(weight.shape()));
  const std::size_t in = weight.dim(1), out_features = weight.dim(0);
  if (x.shape().back() != in) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_features)) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_features;
  Tensor<Real> out(out_shape);

  kernels::GemmShape s;
  s.m = rows, s.n = out_features, s.k = in;
  s.trans_b = true;
  kernels::gemm(s, x.data().data(), weight.data().data(), out.data().data(), false);
  if (bias.defined()) {
    auto o = out.data();
    auto bv = bias.data();
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < (long long)rows; ++r) {
      for (std::size_t j = 0; j < out_features; ++j) o[r * out_features + j] += bv[j];
    }
  }
  check_finite(out, "linear");

  if (auto* tape = Tape<Real>::recording({&x, &weight, &bias})) {
    tape->record("linear", {x, weight, bias.defined() ? bias : Tensor<Real>()}, out,
                 [x, weight, bias, rows, in, out_features](std::span<const Real> g) mutable {
                   if (x.requires_grad()) {  // dX = dY W
                     kernels::GemmShape s;
                     s.m = rows, s.n = in, s.k = out_features;
                     kernels::gemm(s, g.data(), weight.data().data(), x.grad_mut().data(), true);
                   }
                   if (weight.requires_grad()) {  // dW = dY^T X
                     kernels::GemmShape s;
                     s.m = out_features, s.n = in, s.k = rows;
                     s.trans_a = true;
                     kernels::gemm(s, g.data(), x.data().data(), weight.grad_mut().data(), true);
                   }
                   if (bias.defined() && bias.requires_grad()) {
                     accumulate_column_sums(bias.grad_mut(), g, rows, out_features);
                   }
                 });
  }
  return out;
}

namespace {

template <typename Real>
Tensor<Real> softmax_impl(const Tensor<Real>& t, std::size_t outer, std::size_t n, std::size_t inner,
                          kernels::RowMask mask, const char* name) {
  Tensor<Real> out(t.shape());
  kernels::softmax(outer, n, inner, t.data().data(), out.data().data(), mask);
  check_finite(out, name);
  if (auto* tape = Tape<Real>::recording({&t})) {
    Tensor<Real> saved = out.detach();
    tape->record(name, {t}, out, [t, saved, outer, n, inner](std::span<const Real> g) mutable {
      kernels::softmax_backward(outer, n, inner, saved.data().data(), g.data(), t.grad_mut().data());
    });
  }
  return out;
}

}  // namespace

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& t, std::size_t axis) {
  const Shape& s = t.shape();
  if (axis >= s.size()) throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  return softmax_impl(t, outer, s[axis], inner, {}, "softmax");
}

template <typename Real>
Tensor<Real> masked_softmax(const Tensor<Real>& t, const std::vector<std::uint8_t>& mask,
                            std::size_t rows_per_pattern, std::size_t patterns) {
  const std::size_t n = t.shape().back();
  if (patterns == 0 || rows_per_pattern == 0 || mask.size() != patterns * n) {
    throw ShapeError("masked_softmax: mask of " + std::to_string(mask.size()) + " bytes does not hold " +
                     std::to_string(patterns) + " patterns of " + std::to_string(n));
  }
  for (std::size_t p = 0; p < patterns; ++p) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) any = any || mask[p * n + j];
    if (!any) throw ShapeError("masked_softmax: mask pattern " + std::to_string(p) + " masks every position");
  }
  kernels::RowMask rm{mask.data(), rows_per_pattern, patterns};
  return softmax_impl(t, t.numel() / n, n, 1, rm, "masked_softmax");
}

template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                    std::size_t stride, Pad2d pad) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw ShapeError("conv2d: expected rank-4 input and kernel, got " + shape_str(input.shape()) + " and " +
                     shape_str(kernel.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (kernel.dim(2) != kernel.dim(3)) throw ShapeError("conv2d: kernel must be square, got " + shape_str(kernel.shape()));
  if (kernel.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " does not match input channels of " +
                     shape_str(input.shape()));
  }
  kernels::ConvGeometry geo;
  geo.batch = input.dim(0);
  geo.in_channels = input.dim(1);
  geo.in_h = input.dim(2);
  geo.in_w = input.dim(3);
  geo.out_channels = kernel.dim(0);
  geo.kernel = kernel.dim(2);
  geo.stride = stride;
  geo.pad_top = pad.top, geo.pad_left = pad.left, geo.pad_bottom = pad.bottom, geo.pad_right = pad.right;
  if (geo.kernel > geo.in_h + pad.top + pad.bottom || geo.kernel > geo.in_w + pad.left + pad.right) {
    throw ShapeError("conv2d: kernel " + std::to_string(geo.kernel) + " larger than padded input " +
                     shape_str(input.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != geo.out_channels)) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(geo.out_channels) +
                     " output channels");
  }
  const std::size_t oh = geo.out_h(), ow = geo.out_w();
  Tensor<Real> out(Shape{geo.batch, geo.out_channels, oh, ow});
  kernels::conv2d_forward(geo, input.data().data(), kernel.data().data(), out.data().data());
  if (bias.defined()) {
    auto o = out.data();
    auto bv = bias.data();
    const std::size_t plane = oh * ow;
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[(i / plane) % geo.out_channels];
  }
  check_finite(out, "conv2d");

  if (auto* tape = Tape<Real>::recording({&input, &kernel, &bias})) {
    tape->record("conv2d", {input, kernel, bias.defined() ? bias : Tensor<Real>()}, out,
                 [input, kernel, bias, geo](std::span<const Real> g) mutable {
                   if (input.requires_grad()) {
                     kernels::conv2d_backward_input(geo, g.data(), kernel.data().data(), input.grad_mut().data());
                   }
                   if (kernel.requires_grad()) {
                     kernels::conv2d_backward_weight(geo, g.data(), input.data().data(), kernel.grad_mut().data());
                   }
                   if (bias.defined() && bias.requires_grad()) {
                     auto db = bias.grad_mut();
                     const std::size_t plane = geo.out_h() * geo.out_w();
                     for (std::size_t co = 0; co < geo.out_channels; ++co) {
                       Real acc = 0;
                       for (std::size_t n = 0; n < geo.batch; ++n) {
                         const Real* p = g.data() + (n * geo.out_channels + co) * plane;
                         for (std::size_t i = 0; i < plane; ++i) acc += p[i];
                       }
                       db[co] += acc;
                     }
                   }
                 });
  }
  return out;
}

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& t, const Tensor<Real>& gamma, const Tensor<Real>& beta, double eps) {
  if (!(eps > 0.0)) throw ShapeError("layer_norm: eps must be > 0");
  const std::size_t c = t.shape().back();
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != c || beta.dim(0) != c) {
    throw ShapeError("layer_norm: gamma/beta must have extent " + std::to_string(c));
  }
  const std::size_t rows = t.numel() / c;
  Tensor<Real> out(t.shape());
  auto stats = std::make_shared<std::vector<Real>>(2 * rows);
  kernels::layer_norm(rows, c, t.data().data(), gamma.data().data(), beta.data().data(), eps, out.data().data(),
                      stats->data(), stats->data() + rows);
  check_finite(out, "layer_norm");
  if (auto* tape = Tape<Real>::recording({&t, &gamma, &beta})) {
    tape->record("layer_norm", {t, gamma, beta}, out,
                 [t, gamma, beta, stats, rows, c](std::span<const Real> g) mutable {
                   kernels::layer_norm_backward(rows, c, t.data().data(), gamma.data().data(), stats->data(),
                                                stats->data() + rows, g.data(),
                                                t.requires_grad() ? t.grad_mut().data() : nullptr,
                                                gamma.requires_grad() ? gamma.grad_mut().data() : nullptr,
                                                beta.requires_grad() ? beta.grad_mut().data() : nullptr);
                 });
  }
  return out;
}

namespace {
constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
}  // namespace

template <typename Real>
Tensor<Real> gelu(const Tensor<Real>& t) {
  Tensor<Real> out(t.shape());
  auto o = out.data();
  auto x = t.data();
  const long long n = (long long)o.size();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    const double v = x[i];
    o[i] = static_cast<Real>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  check_finite(out, "gelu");
  if (auto* tape = Tape<Real>::recording({&t})) {
    tape->record("gelu", {t}, out, [t](std::span<const Real> g) mutable {
      auto d = t.grad_mut();
      auto x = t.data();
      const long long n = (long long)d.size();
#pragma omp parallel for schedule(static)
      for (long long i = 0; i < n; ++i) {
        const double v = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = std::exp(-0.5 * v * v) * kInvSqrt2Pi;
        d[i] += static_cast<Real>(g[i] * (cdf + v * pdf));
      }
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& t, Shape shape) {
  if (shape_numel(shape) != t.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(t.shape()) + " as " + shape_str(shape));
  }
  auto values = std::vector<Real>(t.data().begin(), t.data().end());
  Tensor<Real> out = Tensor<Real>::from_values(std::move(shape), std::move(values));
  if (auto* tape = Tape<Real>::recording({&t})) {
    tape->record("reshape", {t}, out, [t](std::span<const Real> g) mutable { accumulate(t, g); });
  }
  return out;
}

namespace {

// Maps each output flat index to its source flat index under `perm`.
std::vector<std::size_t> permutation_map(const Shape& in, const std::vector<std::size_t>& perm) {
  const std::size_t r = in.size();
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * in[i + 1];
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = in[perm[i]];
  const std::size_t total = shape_numel(in);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_strides[perm[i]];
    map[flat] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out[i]) break;
      idx[i] = 0;
    }
  }
  return map;
}

}  // namespace

template <typename Real>
Tensor<Real> permute(const Tensor<Real>& t, const std::vector<std::size_t>& perm) {
  const Shape& in = t.shape();
  if (perm.size() != in.size()) throw ShapeError("permute: permutation rank does not match " + shape_str(in));
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out_shape[i] = in[perm[i]];
  auto map = std::make_shared<std::vector<std::size_t>>(permutation_map(in, perm));
  Tensor<Real> out(out_shape);
  auto o = out.data();
  auto x = t.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[(*map)[i]];
  if (auto* tape = Tape<Real>::recording({&t})) {
    tape->record("permute", {t}, out, [t, map](std::span<const Real> g) mutable {
      auto d = t.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) d[(*map)[i]] += g[i];
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> select(const Tensor<Real>& t, std::size_t index) {
  const Shape& in = t.shape();
  if (in.size() < 2) throw ShapeError("select: need rank >= 2, got " + shape_str(in));
  if (index >= in[0]) throw ShapeError("select: index " + std::to_string(index) + " out of range for " + shape_str(in));
  Shape out_shape(in.begin() + 1, in.end());
  const std::size_t block = shape_numel(out_shape);
  auto src = t.data().subspan(index * block, block);
  Tensor<Real> out = Tensor<Real>::from_values(out_shape, std::vector<Real>(src.begin(), src.end()));
  if (auto* tape = Tape<Real>::recording({&t})) {
    tape->record("select", {t}, out, [t, index, block](std::span<const Real> g) mutable {
      auto d = t.grad_mut().subspan(index * block, block);
      for (std::size_t i = 0; i < block; ++i) d[i] += g[i];
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& t) {
  Real acc = 0;
  for (Real v : t.data()) acc += v;
  Tensor<Real> out = Tensor<Real>::from_values({1}, {acc});
  check_finite(out, "sum");
  if (auto* tape = Tape<Real>::recording({&t})) {
    tape->record("sum", {t}, out, [t](std::span<const Real> g) mutable {
      for (Real& d : t.grad_mut()) d += g[0];
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& t) {
  const Real n = static_cast<Real>(t.numel());
  Real acc = 0;
  for (Real v : t.data()) acc += v;
  Tensor<Real> out = Tensor<Real>::from_values({1}, {acc / n});
  check_finite(out, "mean");
  if (auto* tape = Tape<Real>::recording({&t})) {
    tape->record("mean", {t}, out, [t, n](std::span<const Real> g) mutable {
      for (Real& d : t.grad_mut()) d += g[0] / n;
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> mean_axis(const Tensor<Real>& t, std::size_t axis) {
  const Shape& s = t.shape();
  if (axis >= s.size()) throw ShapeError("mean_axis: axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out_shape.push_back(s[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor<Real> out(out_shape);
  auto o = out.data();
  auto x = t.data();
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t i = 0; i < inner; ++i) {
      Real acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += x[(a * n + j) * inner + i];
      o[a * inner + i] = acc / static_cast<Real>(n);
    }
  }
  check_finite(out, "mean_axis");
  if (auto* tape = Tape<Real>::recording({&t})) {
    tape->record("mean_axis", {t}, out, [t, outer, inner, n](std::span<const Real> g) mutable {
      auto d = t.grad_mut();
      for (std::size_t a = 0; a < outer; ++a) {
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t i = 0; i < inner; ++i) d[(a * n + j) * inner + i] += g[a * inner + i] / static_cast<Real>(n);
        }
      }
    });
  }
  return out;
}

#define DAVIT_INSTANTIATE(Real)                                                                               \
  template Tensor<Real> add(const Tensor<Real>&, const Tensor<Real>&);                                        \
  template Tensor<Real> mul(const Tensor<Real>&, const Tensor<Real>&);                                        \
  template Tensor<Real> scale(const Tensor<Real>&, double);                                                   \
  template Tensor<Real> add_bias(const Tensor<Real>&, const Tensor<Real>&);                                   \
  template Tensor<Real> matmul(const Tensor<Real>&, const Tensor<Real>&, bool, bool);                         \
  template Tensor<Real> linear(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&);                \
  template Tensor<Real> softmax(const Tensor<Real>&, std::size_t);                                           \
  template Tensor<Real> masked_softmax(const Tensor<Real>&, const std::vector<std::uint8_t>&, std::size_t,    \
                                       std::size_t);                                                          \
  template Tensor<Real> conv2d(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, std::size_t,    \
                               Pad2d);                                                                        \
  template Tensor<Real> layer_norm(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, double);    \
  template Tensor<Real> gelu(const Tensor<Real>&);                                                            \
  template Tensor<Real> reshape(const Tensor<Real>&, Shape);                                                  \
  template Tensor<Real> permute(const Tensor<Real>&, const std::vector<std::size_t>&);                        \
  template Tensor<Real> select(const Tensor<Real>&, std::size_t);                                             \
  template Tensor<Real> sum(const Tensor<Real>&);                                                             \
  template Tensor<Real> mean(const Tensor<Real>&);                                                            \
  template Tensor<Real> mean_axis(const Tensor<Real>&, std::size_t);

DAVIT_INSTANTIATE(float)
DAVIT_INSTANTIATE(double)

}  // namespace davit::ops
