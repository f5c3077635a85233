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

#include <cstdint>
#include <vector>

#include "davit/tensor.hpp"

// Differentiable tensor operations. Each op checks its preconditions, runs
// the forward computation, rejects non-finite results, and records a backward
// node when a Tape is active and an input requires a gradient.
namespace davit::ops {

struct Pad2d {
  std::size_t top = 0, left = 0, bottom = 0, right = 0;
  static Pad2d symmetric(std::size_t p) { return {p, p, p, p}; }
};

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, double factor);

// x[..., n] + bias[n]
template <typename Real>
Tensor<Real> add_bias(const Tensor<Real>& x, const Tensor<Real>& bias);

// Rank-2 or batched rank-3 product over the last two axes. A rank-2 operand
// paired with a rank-3 one is broadcast across the batch.
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b, bool trans_a = false, bool trans_b = false);

// x[..., in] * weight[out, in]^T + bias[out]; bias may be undefined.
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias);

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& t, std::size_t axis);

// Softmax over the last axis where masked key positions get exactly zero weight.
// Row r of the flattened [rows, n] view uses mask pattern (r / rows_per_pattern) % patterns,
// read from `mask` (patterns * n bytes, 0 = masked).
template <typename Real>
Tensor<Real> masked_softmax(const Tensor<Real>& t, const std::vector<std::uint8_t>& mask,
                            std::size_t rows_per_pattern, std::size_t patterns);

// input N x C_in x H x W, kernel C_out x C_in x k x k, bias C_out (may be undefined).
template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                    std::size_t stride, Pad2d pad);

// Normalizes over the last axis.
template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& t, const Tensor<Real>& gamma, const Tensor<Real>& beta, double eps);

// Exact-erf GELU.
template <typename Real>
Tensor<Real> gelu(const Tensor<Real>& t);

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& t, Shape shape);

// out.shape[i] = t.shape[perm[i]]
template <typename Real>
Tensor<Real> permute(const Tensor<Real>& t, const std::vector<std::size_t>& perm);

// t[index, ...] along axis 0.
template <typename Real>
Tensor<Real> select(const Tensor<Real>& t, std::size_t index);

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& t);

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& t);

// Mean over one axis, which is removed from the result shape.
template <typename Real>
Tensor<Real> mean_axis(const Tensor<Real>& t, std::size_t axis);

}  // namespace davit::ops
