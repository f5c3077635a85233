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
#include <random>
#include <utility>
#include <vector>

#include "davit/tensor.hpp"

namespace davit {

/// Layout of a B x H x W x C map cut into non-overlapping square windows.
///
/// The map is zero-padded on the bottom and right up to the next multiple of
/// the window size. `pad_mask` has one byte per padded-grid token in row-major
/// order: 1 for a real token, 0 for padding.
struct WindowGrid {
  std::size_t window_size = 0;
  std::size_t padded_h = 0, padded_w = 0;
  std::size_t original_h = 0, original_w = 0;
  std::vector<std::uint8_t> pad_mask;

  static WindowGrid make(std::size_t h, std::size_t w, std::size_t window_size);

  std::size_t windows_h() const { return padded_h / window_size; }
  std::size_t windows_w() const { return padded_w / window_size; }
  std::size_t num_windows() const { return windows_h() * windows_w(); }
  std::size_t tokens_per_window() const { return window_size * window_size; }
  bool has_padding() const { return padded_h != original_h || padded_w != original_w; }
  // num_windows() x tokens_per_window() bytes, window-major, 1 = real token.
  std::vector<std::uint8_t> window_token_mask() const;
};

// Which extent scales channel attention logits: 1/sqrt(C_g) or 1/sqrt(H*W).
enum class ChannelScale { GroupWidth, Spatial };

/// Fused QKV projection plus output projection for one attention kernel.
/// `head_width` is C_h for spatial heads or C_g for channel groups.
template <typename Real>
struct AttentionParams {
  Tensor<Real> qkv_weight;   // [3C, C]
  Tensor<Real> qkv_bias;     // [3C]
  Tensor<Real> proj_weight;  // [C, C]
  Tensor<Real> proj_bias;    // [C]
  std::size_t head_width = 0;

  std::size_t channels() const { return proj_weight.dim(0); }
  void validate() const;

  static AttentionParams init(std::size_t channels, std::size_t head_width, std::mt19937_64& rng);
};

template <typename Real>
std::pair<Tensor<Real>, WindowGrid> window_partition(const Tensor<Real>& fmap, std::size_t window_size);

template <typename Real>
Tensor<Real> window_reverse(const Tensor<Real>& windows, const WindowGrid& grid);

// Multi-head self-attention inside each window; padded keys get zero weight.
template <typename Real>
Tensor<Real> spatial_window_attention(const Tensor<Real>& x, const AttentionParams<Real>& p, std::size_t window_size);

// Single-head self-attention over channel tokens, independently per group of
// head_width channels. Each channel token's feature is its whole H*W map.
template <typename Real>
Tensor<Real> channel_group_attention(const Tensor<Real>& x, const AttentionParams<Real>& p,
                                     ChannelScale scale = ChannelScale::GroupWidth);

}  // namespace davit
