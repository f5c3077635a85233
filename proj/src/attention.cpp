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

#include "davit/attention.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "davit/error.hpp"
#include "davit/ops.hpp"

namespace davit {

WindowGrid WindowGrid::make(std::size_t h, std::size_t w, std::size_t window_size) {
  if (window_size < 1) throw ShapeError("window size must be >= 1");
  if (h < 1 || w < 1) throw ShapeError("window grid needs a non-empty map");
  WindowGrid g;
  g.window_size = window_size;
  g.original_h = h;
  g.original_w = w;
  g.padded_h = (h + window_size - 1) / window_size * window_size;
  g.padded_w = (w + window_size - 1) / window_size * window_size;
  g.pad_mask.assign(g.padded_h * g.padded_w, 0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) g.pad_mask[y * g.padded_w + x] = 1;
  }
  return g;
}

std::vector<std::uint8_t> WindowGrid::window_token_mask() const {
  const std::size_t ws = window_size, nww = windows_w();
  std::vector<std::uint8_t> mask(num_windows() * tokens_per_window());
  for (std::size_t win = 0; win < num_windows(); ++win) {
    const std::size_t wy = win / nww, wx = win % nww;
    for (std::size_t t = 0; t < tokens_per_window(); ++t) {
      const std::size_t y = wy * ws + t / ws, x = wx * ws + t % ws;
      mask[win * tokens_per_window() + t] = pad_mask[y * padded_w + x];
    }
  }
  return mask;
}

template <typename Real>
void AttentionParams<Real>::validate() const {
  const std::size_t c = channels();
  if (head_width == 0 || c % head_width != 0) {
    throw ShapeError("attention: channels " + std::to_string(c) + " not divisible by head width " +
                     std::to_string(head_width));
  }
  if (qkv_weight.shape() != Shape{3 * c, c} || qkv_bias.shape() != Shape{3 * c}) {
    throw ShapeError("attention: qkv projection must map " + std::to_string(c) + " to " + std::to_string(3 * c));
  }
  if (proj_weight.shape() != Shape{c, c} || proj_bias.shape() != Shape{c}) {
    throw ShapeError("attention: output projection must be " + std::to_string(c) + " x " + std::to_string(c));
  }
}

template <typename Real>
AttentionParams<Real> AttentionParams<Real>::init(std::size_t channels, std::size_t head_width, std::mt19937_64& rng) {
  AttentionParams p;
  p.head_width = head_width;
  p.qkv_weight = Tensor<Real>({3 * channels, channels});
  fill_truncated_normal(p.qkv_weight.data(), 0.0, 0.02, rng);
  p.qkv_bias = Tensor<Real>::zeros({3 * channels});
  p.proj_weight = Tensor<Real>({channels, channels});
  fill_truncated_normal(p.proj_weight.data(), 0.0, 0.02, rng);
  p.proj_bias = Tensor<Real>::zeros({channels});
  return p;
}

namespace {

// For each element of the windowed layout, the flat index of its source in the
// B x H x W x C map, or -1 for padding.
std::vector<long> window_index_map(std::size_t batch, std::size_t channels, const WindowGrid& g) {
  const std::size_t ws = g.window_size, nw = g.num_windows(), nww = g.windows_w(), tokens = g.tokens_per_window();
  std::vector<long> map(batch * nw * tokens * channels);
  std::size_t at = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t win = 0; win < nw; ++win) {
      const std::size_t wy = win / nww, wx = win % nww;
      for (std::size_t t = 0; t < tokens; ++t) {
        const std::size_t y = wy * ws + t / ws, x = wx * ws + t % ws;
        const bool real = y < g.original_h && x < g.original_w;
        const std::size_t base = ((b * g.original_h + y) * g.original_w + x) * channels;
        for (std::size_t c = 0; c < channels; ++c) map[at++] = real ? long(base + c) : -1;
      }
    }
  }
  return map;
}

}  // namespace

template <typename Real>
std::pair<Tensor<Real>, WindowGrid> window_partition(const Tensor<Real>& fmap, std::size_t window_size) {
  if (fmap.rank() != 4) throw ShapeError("window_partition: expected B x H x W x C, got " + shape_str(fmap.shape()));
  const std::size_t batch = fmap.dim(0), channels = fmap.dim(3);
  WindowGrid grid = WindowGrid::make(fmap.dim(1), fmap.dim(2), window_size);
  auto map = std::make_shared<std::vector<long>>(window_index_map(batch, channels, grid));
  Tensor<Real> out({batch * grid.num_windows(), grid.tokens_per_window(), channels});
  auto o = out.data();
  auto x = fmap.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (*map)[i] < 0 ? Real(0) : x[(*map)[i]];
  if (auto* tape = Tape<Real>::recording({&fmap})) {
    tape->record("window_partition", {fmap}, out, [fmap, map](std::span<const Real> g) mutable {
      auto d = fmap.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if ((*map)[i] >= 0) d[(*map)[i]] += g[i];
      }
    });
  }
  return {out, std::move(grid)};
}

template <typename Real>
Tensor<Real> window_reverse(const Tensor<Real>& windows, const WindowGrid& grid) {
  if (windows.rank() != 3 || grid.window_size == 0 || windows.dim(1) != grid.tokens_per_window() ||
      windows.dim(0) % grid.num_windows() != 0) {
    throw ShapeError("window_reverse: windows " + shape_str(windows.shape()) + " do not match a grid of " +
                     std::to_string(grid.num_windows()) + " windows of " + std::to_string(grid.tokens_per_window()) +
                     " tokens");
  }
  const std::size_t batch = windows.dim(0) / grid.num_windows(), channels = windows.dim(2);
  auto map = std::make_shared<std::vector<long>>(window_index_map(batch, channels, grid));
  Tensor<Real> out({batch, grid.original_h, grid.original_w, channels});
  auto o = out.data();
  auto w = windows.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if ((*map)[i] >= 0) o[(*map)[i]] = w[i];
  }
  if (auto* tape = Tape<Real>::recording({&windows})) {
    tape->record("window_reverse", {windows}, out, [windows, map](std::span<const Real> g) mutable {
      auto d = windows.grad_mut();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if ((*map)[i] >= 0) d[i] += g[(*map)[i]];
      }
    });
  }
  return out;
}

template <typename Real>
Tensor<Real> spatial_window_attention(const Tensor<Real>& x, const AttentionParams<Real>& p, std::size_t window_size) {
  if (x.rank() != 4) throw ShapeError("spatial_window_attention: expected B x H x W x C, got " + shape_str(x.shape()));
  p.validate();
  const std::size_t c = x.dim(3);
  if (c != p.channels()) {
    throw ShapeError("spatial_window_attention: input has " + std::to_string(c) + " channels, params expect " +
                     std::to_string(p.channels()));
  }
  const std::size_t heads = c / p.head_width, hw = p.head_width;

  auto [windows, grid] = window_partition(x, window_size);
  const std::size_t nwin = windows.dim(0), tokens = windows.dim(1);

  auto qkv = ops::linear(windows, p.qkv_weight, p.qkv_bias);
  qkv = ops::reshape(qkv, {nwin, tokens, 3, heads, hw});
  qkv = ops::permute(qkv, {2, 0, 3, 1, 4});
  qkv = ops::reshape(qkv, {3, nwin * heads, tokens, hw});
  auto q = ops::select(qkv, 0), k = ops::select(qkv, 1), v = ops::select(qkv, 2);

  auto scores = ops::scale(ops::matmul(q, k, false, true), 1.0 / std::sqrt(double(hw)));
  auto attn = grid.has_padding()
                  ? ops::masked_softmax(scores, grid.window_token_mask(), heads * tokens, grid.num_windows())
                  : ops::softmax(scores, 2);

  auto out = ops::matmul(attn, v);
  out = ops::reshape(out, {nwin, heads, tokens, hw});
  out = ops::permute(out, {0, 2, 1, 3});
  out = ops::reshape(out, {nwin, tokens, c});
  out = ops::linear(out, p.proj_weight, p.proj_bias);
  return window_reverse(out, grid);
}

template <typename Real>
Tensor<Real> channel_group_attention(const Tensor<Real>& x, const AttentionParams<Real>& p, ChannelScale scale) {
  if (x.rank() != 4) throw ShapeError("channel_group_attention: expected B x H x W x C, got " + shape_str(x.shape()));
  p.validate();
  const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (c != p.channels()) {
    throw ShapeError("channel_group_attention: input has " + std::to_string(c) + " channels, params expect " +
                     std::to_string(p.channels()));
  }
  const std::size_t gw = p.head_width, groups = c / gw, n = h * w;

  auto qkv = ops::linear(ops::reshape(x, {b, n, c}), p.qkv_weight, p.qkv_bias);
  qkv = ops::reshape(qkv, {b, n, 3, groups, gw});
  qkv = ops::permute(qkv, {2, 0, 3, 4, 1});
  qkv = ops::reshape(qkv, {3, b * groups, gw, n});
  auto q = ops::select(qkv, 0), k = ops::select(qkv, 1), v = ops::select(qkv, 2);

  const double denom = scale == ChannelScale::GroupWidth ? double(gw) : double(n);
  auto attn = ops::softmax(ops::scale(ops::matmul(q, k, false, true), 1.0 / std::sqrt(denom)), 2);

  auto out = ops::matmul(attn, v);
  out = ops::reshape(out, {b, groups, gw, n});
  out = ops::permute(out, {0, 3, 1, 2});
  out = ops::reshape(out, {b, n, c});
  out = ops::linear(out, p.proj_weight, p.proj_bias);
  return ops::reshape(out, {b, h, w, c});
}

#define DAVIT_INSTANTIATE(Real)                                                                               \
  template struct AttentionParams<Real>;                                                                      \
  template std::pair<Tensor<Real>, WindowGrid> window_partition(const Tensor<Real>&, std::size_t);            \
  template Tensor<Real> window_reverse(const Tensor<Real>&, const WindowGrid&);                               \
  template Tensor<Real> spatial_window_attention(const Tensor<Real>&, const AttentionParams<Real>&,           \
                                                 std::size_t);                                                \
  template Tensor<Real> channel_group_attention(const Tensor<Real>&, const AttentionParams<Real>&, ChannelScale);

DAVIT_INSTANTIATE(float)
DAVIT_INSTANTIATE(double)

}  // namespace davit
