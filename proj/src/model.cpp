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

#include "davit/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "davit/error.hpp"

namespace davit {

ModelConfig ModelConfig::base() {
  ModelConfig cfg;
  cfg.input_size = 300;
  cfg.num_classes = 10;
  const std::size_t channels[4] = {96, 192, 384, 768};
  for (std::size_t i = 0; i < 4; ++i) {
    StageConfig s;
    s.embed_kernel = i == 0 ? 7 : 2;
    s.embed_stride = i == 0 ? 4 : 2;
    s.embed_pad = i == 0 ? 3 : 0;
    s.ceil_pad = i != 0;
    s.channels = channels[i];
    s.depth = 1;
    s.window_size = 7;
    s.head_width = 32;
    cfg.stages.push_back(s);
  }
  return cfg;
}

ModelConfig ModelConfig::toy() {
  ModelConfig cfg;
  cfg.input_size = 32;
  cfg.num_classes = 10;
  StageConfig s1;
  s1.embed_kernel = 4;
  s1.embed_stride = 4;
  s1.embed_pad = 0;
  s1.channels = 16;
  s1.window_size = 4;
  s1.head_width = 8;
  StageConfig s2;
  s2.embed_kernel = 2;
  s2.embed_stride = 2;
  s2.embed_pad = 0;
  s2.ceil_pad = true;
  s2.channels = 32;
  s2.window_size = 4;
  s2.head_width = 8;
  cfg.stages = {s1, s2};
  return cfg;
}

std::size_t embed_output_size(std::size_t input, const StageConfig& s) {
  const ops::Pad2d pad = embed_padding(input, s);
  return (input + pad.top + pad.bottom - s.embed_kernel) / s.embed_stride + 1;
}

ops::Pad2d embed_padding(std::size_t input, const StageConfig& s) {
  ops::Pad2d pad = ops::Pad2d::symmetric(s.embed_pad);
  if (s.ceil_pad) {
    // Smallest extra bottom/right padding so every input row/column is covered by a window.
    const std::size_t padded = input + 2 * s.embed_pad;
    std::size_t needed = s.embed_kernel;
    if (padded > s.embed_kernel) {
      needed = (padded - s.embed_kernel + s.embed_stride - 1) / s.embed_stride * s.embed_stride + s.embed_kernel;
    }
    const std::size_t extra = needed > padded ? needed - padded : 0;
    pad.bottom += extra;
    pad.right += extra;
  }
  return pad;
}

void ModelConfig::validate() const {
  if (input_channels < 1) throw ConfigError("model: input_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (stages.empty()) throw ConfigError("model: at least one stage is required");
  if (!(ffn_expansion > 0.0)) throw ConfigError("model: ffn_expansion must be > 0");
  if (!(norm_eps > 0.0)) throw ConfigError("model: norm_eps must be > 0");
  std::size_t size = input_size;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageConfig& s = stages[i];
    const std::string at = "model: stage " + std::to_string(i + 1) + ": ";
    if (s.channels < 1 || s.head_width < 1 || s.channels % s.head_width != 0) {
      throw ConfigError(at + "channels " + std::to_string(s.channels) + " not divisible by head width " +
                        std::to_string(s.head_width));
    }
    if (s.depth < 1) throw ConfigError(at + "depth must be >= 1");
    if (s.window_size < 1) throw ConfigError(at + "window size must be >= 1");
    if (s.embed_kernel < 1 || s.embed_stride < 1) throw ConfigError(at + "embedding kernel and stride must be >= 1");
    const ops::Pad2d pad = embed_padding(size, s);
    if (size + pad.top + pad.bottom < s.embed_kernel) {
      throw ConfigError(at + "embedding kernel " + std::to_string(s.embed_kernel) + " exceeds padded input " +
                        std::to_string(size + pad.top + pad.bottom));
    }
    size = embed_output_size(size, s);
    if (size < 1) throw ConfigError(at + "spatial size collapsed to zero");
  }
}

std::vector<std::size_t> ModelConfig::stage_sizes() const {
  std::vector<std::size_t> sizes;
  std::size_t size = input_size;
  for (const StageConfig& s : stages) {
    size = embed_output_size(size, s);
    sizes.push_back(size);
  }
  return sizes;
}

std::size_t ModelConfig::ffn_hidden(std::size_t channels) const {
  const auto h = static_cast<std::size_t>(std::lround(double(channels) * ffn_expansion));
  return h < 1 ? 1 : h;
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "input_size=" << input_size << ";input_channels=" << input_channels << ";num_classes=" << num_classes
     << ";ffn_expansion=" << ffn_expansion << ";channel_scale=" << (channel_scale == ChannelScale::GroupWidth ? "group" : "spatial")
     << ";norm_eps=" << norm_eps;
  for (const StageConfig& s : stages) {
    os << ";stage(" << s.embed_kernel << ',' << s.embed_stride << ',' << s.embed_pad << ',' << s.ceil_pad << ','
       << s.channels << ',' << s.depth << ',' << s.window_size << ',' << s.head_width << ')';
  }
  return os.str();
}

std::uint64_t ModelConfig::hash() const {
  // FNV-1a, stable across platforms and builds.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

template <typename Real>
Tensor<Real> normal_param(Shape shape, std::mt19937_64& rng) {
  Tensor<Real> t(std::move(shape));
  fill_truncated_normal(t.data(), 0.0, 0.02, rng);
  return t;
}

template <typename Real>
NormParams<Real> norm_params(std::size_t c) {
  return {Tensor<Real>::full({c}, 1.0), Tensor<Real>::zeros({c})};
}

template <typename Real>
FeedForward<Real> ffn_params(std::size_t c, std::size_t hidden, std::mt19937_64& rng) {
  FeedForward<Real> f;
  f.fc1_weight = normal_param<Real>({hidden, c}, rng);
  f.fc1_bias = Tensor<Real>::zeros({hidden});
  f.fc2_weight = normal_param<Real>({c, hidden}, rng);
  f.fc2_bias = Tensor<Real>::zeros({c});
  return f;
}

template <typename Real>
void push_attention(std::vector<std::pair<std::string, Tensor<Real>>>& out, const std::string& prefix,
                    const AttentionParams<Real>& p) {
  out.emplace_back(prefix + ".qkv.weight", p.qkv_weight);
  out.emplace_back(prefix + ".qkv.bias", p.qkv_bias);
  out.emplace_back(prefix + ".proj.weight", p.proj_weight);
  out.emplace_back(prefix + ".proj.bias", p.proj_bias);
}

template <typename Real>
void push_norm(std::vector<std::pair<std::string, Tensor<Real>>>& out, const std::string& prefix,
               const NormParams<Real>& p) {
  out.emplace_back(prefix + ".weight", p.weight);
  out.emplace_back(prefix + ".bias", p.bias);
}

template <typename Real>
void push_ffn(std::vector<std::pair<std::string, Tensor<Real>>>& out, const std::string& prefix,
              const FeedForward<Real>& f) {
  out.emplace_back(prefix + ".fc1.weight", f.fc1_weight);
  out.emplace_back(prefix + ".fc1.bias", f.fc1_bias);
  out.emplace_back(prefix + ".fc2.weight", f.fc2_weight);
  out.emplace_back(prefix + ".fc2.bias", f.fc2_bias);
}

}  // namespace

template <typename Real>
std::vector<std::pair<std::string, Tensor<Real>>> Model<Real>::named_parameters() const {
  std::vector<std::pair<std::string, Tensor<Real>>> out;
  for (std::size_t si = 0; si < stages.size(); ++si) {
    const std::string sp = "stages." + std::to_string(si);
    out.emplace_back(sp + ".embed.weight", stages[si].embed_weight);
    out.emplace_back(sp + ".embed.bias", stages[si].embed_bias);
    for (std::size_t bi = 0; bi < stages[si].blocks.size(); ++bi) {
      const DualBlock<Real>& b = stages[si].blocks[bi];
      const std::string bp = sp + ".blocks." + std::to_string(bi);
      push_norm(out, bp + ".norm1", b.norm1);
      push_attention(out, bp + ".spatial_attn", b.spatial);
      push_norm(out, bp + ".norm2", b.norm2);
      push_ffn(out, bp + ".ffn1", b.ffn1);
      push_norm(out, bp + ".norm3", b.norm3);
      push_attention(out, bp + ".channel_attn", b.channel);
      push_norm(out, bp + ".norm4", b.norm4);
      push_ffn(out, bp + ".ffn2", b.ffn2);
    }
  }
  push_norm(out, "head.norm", head_norm);
  out.emplace_back("head.fc.weight", head_weight);
  out.emplace_back("head.fc.bias", head_bias);
  return out;
}

template <typename Real>
std::vector<Tensor<Real>> Model<Real>::parameters() const {
  std::vector<Tensor<Real>> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

template <typename Real>
void Model<Real>::set_requires_grad(bool on) {
  for (auto& t : parameters()) t.set_requires_grad(on);
}

template <typename Real>
Model<Real> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  Model<Real> m;
  m.config = cfg;
  std::size_t in_channels = cfg.input_channels;
  for (const StageConfig& s : cfg.stages) {
    Stage<Real> stage;
    stage.embed_weight = normal_param<Real>({s.channels, in_channels, s.embed_kernel, s.embed_kernel}, rng);
    stage.embed_bias = Tensor<Real>::zeros({s.channels});
    const std::size_t hidden = cfg.ffn_hidden(s.channels);
    for (std::size_t d = 0; d < s.depth; ++d) {
      DualBlock<Real> b;
      b.norm1 = norm_params<Real>(s.channels);
      b.spatial = AttentionParams<Real>::init(s.channels, s.head_width, rng);
      b.norm2 = norm_params<Real>(s.channels);
      b.ffn1 = ffn_params<Real>(s.channels, hidden, rng);
      b.norm3 = norm_params<Real>(s.channels);
      b.channel = AttentionParams<Real>::init(s.channels, s.head_width, rng);
      b.norm4 = norm_params<Real>(s.channels);
      b.ffn2 = ffn_params<Real>(s.channels, hidden, rng);
      stage.blocks.push_back(std::move(b));
    }
    m.stages.push_back(std::move(stage));
    in_channels = s.channels;
  }
  m.head_norm = norm_params<Real>(in_channels);
  m.head_weight = normal_param<Real>({cfg.num_classes, in_channels}, rng);
  m.head_bias = Tensor<Real>::zeros({cfg.num_classes});
  m.set_requires_grad(true);
  return m;
}

template <typename Real>
Tensor<Real> patch_embed(const Tensor<Real>& x, const Stage<Real>& params, const StageConfig& s) {
  if (x.rank() != 4) throw ShapeError("patch_embed: expected N x C x H x W, got " + shape_str(x.shape()));
  if (x.dim(2) != x.dim(3)) throw ShapeError("patch_embed: expected a square map, got " + shape_str(x.shape()));
  return ops::conv2d(x, params.embed_weight, params.embed_bias, s.embed_stride, embed_padding(x.dim(2), s));
}

namespace {

template <typename Real>
Tensor<Real> feed_forward(const Tensor<Real>& x, const FeedForward<Real>& f) {
  return ops::linear(ops::gelu(ops::linear(x, f.fc1_weight, f.fc1_bias)), f.fc2_weight, f.fc2_bias);
}

}  // namespace

template <typename Real>
Tensor<Real> dual_attention_block(const Tensor<Real>& x, const DualBlock<Real>& b, const StageConfig& s,
                                  BlockOptions opts) {
  if (x.rank() != 4 || x.dim(3) != s.channels) {
    throw ShapeError("dual_attention_block: expected B x H x W x " + std::to_string(s.channels) + ", got " +
                     shape_str(x.shape()));
  }
  const double eps = opts.norm_eps;
  Tensor<Real> h = x;
  h = ops::add(h, spatial_window_attention(ops::layer_norm(h, b.norm1.weight, b.norm1.bias, eps), b.spatial,
                                           s.window_size));
  h = ops::add(h, feed_forward(ops::layer_norm(h, b.norm2.weight, b.norm2.bias, eps), b.ffn1));
  h = ops::add(h, channel_group_attention(ops::layer_norm(h, b.norm3.weight, b.norm3.bias, eps), b.channel,
                                          opts.channel_scale));
  h = ops::add(h, feed_forward(ops::layer_norm(h, b.norm4.weight, b.norm4.bias, eps), b.ffn2));
  return h;
}

template <typename Real>
Tensor<Real> forward(const Tensor<Real>& images, const Model<Real>& m, ForwardTrace* trace) {
  const ModelConfig& cfg = m.config;
  if (images.rank() != 4 || images.dim(1) != cfg.input_channels || images.dim(2) != cfg.input_size ||
      images.dim(3) != cfg.input_size) {
    throw ShapeError("forward: expected B x " + std::to_string(cfg.input_channels) + " x " +
                     std::to_string(cfg.input_size) + " x " + std::to_string(cfg.input_size) + " images, got " +
                     shape_str(images.shape()));
  }
  const BlockOptions opts{cfg.channel_scale, cfg.norm_eps};
  Tensor<Real> x = images;
  for (std::size_t si = 0; si < m.stages.size(); ++si) {
    if (si > 0) x = ops::permute(x, {0, 3, 1, 2});
    x = ops::permute(patch_embed(x, m.stages[si], cfg.stages[si]), {0, 2, 3, 1});
    for (const DualBlock<Real>& b : m.stages[si].blocks) x = dual_attention_block(x, b, cfg.stages[si], opts);
    if (trace) trace->stage_outputs.push_back(x.shape());
  }
  const std::size_t batch = x.dim(0), c = x.dim(3);
  x = ops::reshape(x, {batch, x.dim(1) * x.dim(2), c});
  x = ops::layer_norm(x, m.head_norm.weight, m.head_norm.bias, cfg.norm_eps);
  x = ops::mean_axis(x, 1);
  return ops::linear(x, m.head_weight, m.head_bias);
}

template <typename Real>
std::size_t count_params(const Model<Real>& m) {
  std::size_t n = 0;
  for (const auto& [name, t] : m.named_parameters()) n += t.numel();
  return n;
}

std::size_t count_params(const ModelConfig& cfg) {
  std::size_t total = 0;
  std::size_t in = cfg.input_channels;
  for (const StageConfig& s : cfg.stages) {
    const std::size_t c = s.channels, h = cfg.ffn_hidden(c);
    const std::size_t embed = c * in * s.embed_kernel * s.embed_kernel + c;
    const std::size_t attention = (3 * c * c + 3 * c) + (c * c + c);
    const std::size_t ffn = (h * c + h) + (c * h + c);
    const std::size_t norms = 4 * 2 * c;
    total += embed + s.depth * (2 * attention + 2 * ffn + norms);
    in = c;
  }
  total += 2 * in + cfg.num_classes * in + cfg.num_classes;
  return total;
}

#define DAVIT_INSTANTIATE(Real)                                                                               \
  template class Model<Real>;                                                                                 \
  template Model<Real> build_model<Real>(const ModelConfig&, std::uint64_t);                                  \
  template Tensor<Real> patch_embed(const Tensor<Real>&, const Stage<Real>&, const StageConfig&);             \
  template Tensor<Real> dual_attention_block(const Tensor<Real>&, const DualBlock<Real>&, const StageConfig&, \
                                             BlockOptions);                                                   \
  template Tensor<Real> forward(const Tensor<Real>&, const Model<Real>&, ForwardTrace*);                      \
  template std::size_t count_params(const Model<Real>&);

DAVIT_INSTANTIATE(float)
DAVIT_INSTANTIATE(double)

}  // namespace davit
