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
#include <string>
#include <utility>
#include <vector>

#include "davit/attention.hpp"
#include "davit/ops.hpp"
#include "davit/tensor.hpp"

namespace davit {

/// One pyramid stage: a strided patch-embedding convolution followed by
/// `depth` dual attention blocks. Stages after the first zero-pad the
/// bottom/right edge (`ceil_pad`) so the output extent is ceil(in / stride).
struct StageConfig {
  std::size_t embed_kernel = 7;
  std::size_t embed_stride = 4;
  std::size_t embed_pad = 3;
  bool ceil_pad = false;
  std::size_t channels = 96;
  std::size_t depth = 1;
  std::size_t window_size = 7;
  std::size_t head_width = 32;  // channels per spatial head and per channel group
};

struct ModelConfig {
  std::size_t input_size = 300;
  std::size_t input_channels = 3;
  std::size_t num_classes = 10;
  std::vector<StageConfig> stages;
  double ffn_expansion = 4.0;
  ChannelScale channel_scale = ChannelScale::GroupWidth;
  double norm_eps = 1e-5;

  // Four stages at 96/192/384/768 channels, one dual block each, 300 px input.
  static ModelConfig base();
  // Two stages at 16/32 channels for 32 px input; about 35k parameters.
  static ModelConfig toy();

  void validate() const;
  // Spatial extent after each stage's patch embedding.
  std::vector<std::size_t> stage_sizes() const;
  std::size_t ffn_hidden(std::size_t channels) const;
  std::string canonical() const;
  std::uint64_t hash() const;
};

std::size_t embed_output_size(std::size_t input, const StageConfig& s);
ops::Pad2d embed_padding(std::size_t input, const StageConfig& s);

template <typename Real>
struct NormParams {
  Tensor<Real> weight;
  Tensor<Real> bias;
};

template <typename Real>
struct FeedForward {
  Tensor<Real> fc1_weight, fc1_bias;  // [hidden, C], [hidden]
  Tensor<Real> fc2_weight, fc2_bias;  // [C, hidden], [C]
};

template <typename Real>
struct DualBlock {
  NormParams<Real> norm1;
  AttentionParams<Real> spatial;
  NormParams<Real> norm2;
  FeedForward<Real> ffn1;
  NormParams<Real> norm3;
  AttentionParams<Real> channel;
  NormParams<Real> norm4;
  FeedForward<Real> ffn2;
};

template <typename Real>
struct Stage {
  Tensor<Real> embed_weight;  // [C_out, C_in, k, k]
  Tensor<Real> embed_bias;
  std::vector<DualBlock<Real>> blocks;
};

template <typename Real>
class Model {
 public:
  ModelConfig config;
  std::vector<Stage<Real>> stages;
  NormParams<Real> head_norm;
  Tensor<Real> head_weight;  // [num_classes, C_last]
  Tensor<Real> head_bias;

  // Stable, checkpoint-facing names in construction order. Tensors share storage with the model.
  std::vector<std::pair<std::string, Tensor<Real>>> named_parameters() const;
  std::vector<Tensor<Real>> parameters() const;
  void set_requires_grad(bool on);
};

template <typename Real>
Model<Real> build_model(const ModelConfig& cfg, std::uint64_t seed);

struct BlockOptions {
  ChannelScale channel_scale = ChannelScale::GroupWidth;
  double norm_eps = 1e-5;
};

// NCHW in, NCHW out.
template <typename Real>
Tensor<Real> patch_embed(const Tensor<Real>& x, const Stage<Real>& params, const StageConfig& s);

// B x H x W x C in and out: spatial attention, FFN, channel attention, FFN,
// each pre-normalized and wrapped in a residual connection.
template <typename Real>
Tensor<Real> dual_attention_block(const Tensor<Real>& x, const DualBlock<Real>& block, const StageConfig& s,
                                  BlockOptions opts = {});

struct ForwardTrace {
  std::vector<Shape> stage_outputs;  // B x H x W x C after each stage
};

// images B x C_in x S x S -> logits B x num_classes
template <typename Real>
Tensor<Real> forward(const Tensor<Real>& images, const Model<Real>& m, ForwardTrace* trace = nullptr);

template <typename Real>
std::size_t count_params(const Model<Real>& m);

// Closed-form parameter count for a configuration.
std::size_t count_params(const ModelConfig& cfg);

}  // namespace davit
