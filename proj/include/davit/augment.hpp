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
#include <filesystem>
#include <string>
#include <vector>

#include "davit/dataset.hpp"

namespace davit {

enum class AugmentOp { ScaleCrop, HFlip, Hue, Saturation, Exposure, Brightness };

const char* augment_op_name(AugmentOp op);

// Magnitude meaning and accepted range per op:
//   scale_crop  zoom factor in [1, 4], random crop position, bilinear resize back
//   hflip       ignored, must lie in [0, 1]
//   hue         additive hue shift in degrees, [-180, 180]
//   saturation  multiplicative factor, [0, 4]
//   exposure    multiplicative gain, (0, 4]
//   brightness  additive offset, [-1, 1]
struct AugmentStep {
  AugmentOp op;
  double probability = 0.0;
  double magnitude = 0.0;
};

struct AugmentPolicy {
  std::vector<AugmentStep> steps;

  void validate() const;
  bool empty() const { return steps.empty(); }

  // One `op probability magnitude` triple per line; '#' starts a comment.
  static AugmentPolicy parse(const std::string& text);
  static AugmentPolicy load(const std::filesystem::path& path);
};

// Applies each step in order; each consumes the same number of draws whether
// or not it fires, so the stream position never depends on earlier outcomes.
Sample apply_policy(const Sample& s, const AugmentPolicy& policy, std::uint64_t seed);

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v);
void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

}  // namespace davit
