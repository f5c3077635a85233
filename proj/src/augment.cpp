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

#include "davit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "davit/error.hpp"

namespace davit {

namespace {

struct OpInfo {
  AugmentOp op;
  const char* name;
  double lo, hi;
  bool lo_open;
};

constexpr OpInfo kOps[] = {
    {AugmentOp::ScaleCrop, "scale_crop", 1.0, 4.0, false},  {AugmentOp::HFlip, "hflip", 0.0, 1.0, false},
    {AugmentOp::Hue, "hue", -180.0, 180.0, false},          {AugmentOp::Saturation, "saturation", 0.0, 4.0, false},
    {AugmentOp::Exposure, "exposure", 0.0, 4.0, true},      {AugmentOp::Brightness, "brightness", -1.0, 1.0, false},
};

const OpInfo& info(AugmentOp op) {
  for (const auto& i : kOps) {
    if (i.op == op) return i;
  }
  throw ConfigError("unknown augmentation op");
}

void scale_crop(Image& img, double zoom, double u, double v) {
  const Image src = img;
  const double n = double(img.width), side = n / zoom;
  const double ox = u * (n - side), oy = v * (n - side);
  const double step = side / n;
  for (std::size_t y = 0; y < img.height; ++y) {
    const double sy = std::clamp(oy + (double(y) + 0.5) * step - 0.5, 0.0, n - 1.0);
    const auto y0 = std::size_t(sy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double fy = sy - double(y0);
    for (std::size_t x = 0; x < img.width; ++x) {
      const double sx = std::clamp(ox + (double(x) + 0.5) * step - 0.5, 0.0, n - 1.0);
      const auto x0 = std::size_t(sx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double fx = sx - double(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = src.at(c, y0, x0) * (1 - fx) + src.at(c, y0, x1) * fx;
        const double bottom = src.at(c, y1, x0) * (1 - fx) + src.at(c, y1, x1) * fx;
        img.at(c, y, x) = static_cast<float>(top * (1 - fy) + bottom * fy);
      }
    }
  }
}

void hflip(Image& img) {
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width / 2; ++x) std::swap(img.at(c, y, x), img.at(c, y, img.width - 1 - x));
    }
  }
}

template <typename Fn>
void per_pixel_hsv(Image& img, Fn&& fn) {
  const std::size_t plane = img.width * img.height;
  float* r = img.pixels.data();
  float* g = r + plane;
  float* b = g + plane;
  for (std::size_t i = 0; i < plane; ++i) {
    float h, s, v;
    rgb_to_hsv(r[i], g[i], b[i], h, s, v);
    fn(h, s);
    hsv_to_rgb(h, s, v, r[i], g[i], b[i]);
  }
}

}  // namespace

const char* augment_op_name(AugmentOp op) { return info(op).name; }

void AugmentPolicy::validate() const {
  for (const auto& s : steps) {
    const OpInfo& i = info(s.op);
    if (!(s.probability >= 0.0 && s.probability <= 1.0)) {
      throw ConfigError(std::string("augment ") + i.name + ": probability must lie in [0, 1]");
    }
    const bool low_ok = i.lo_open ? s.magnitude > i.lo : s.magnitude >= i.lo;
    if (!low_ok || !(s.magnitude <= i.hi)) {
      std::ostringstream os;
      os << "augment " << i.name << ": magnitude " << s.magnitude << " outside " << (i.lo_open ? "(" : "[") << i.lo
         << ", " << i.hi << "]";
      throw ConfigError(os.str());
    }
  }
}

AugmentPolicy AugmentPolicy::parse(const std::string& text) {
  AugmentPolicy p;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string name;
    if (!(fields >> name)) continue;
    AugmentStep step{};
    std::string extra;
    if (!(fields >> step.probability >> step.magnitude) || (fields >> extra)) {
      throw ConfigError("policy line " + std::to_string(n) + ": expected `op probability magnitude`");
    }
    const OpInfo* found = nullptr;
    for (const auto& i : kOps) {
      if (name == i.name) found = &i;
    }
    if (!found) throw ConfigError("policy line " + std::to_string(n) + ": unknown op '" + name + "'");
    step.op = found->op;
    p.steps.push_back(step);
  }
  p.validate();
  return p;
}

AugmentPolicy AugmentPolicy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

Sample apply_policy(const Sample& s, const AugmentPolicy& policy, std::uint64_t seed) {
  policy.validate();
  Sample out = s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& step : policy.steps) {
    const double fire = u(rng), a = u(rng), b = u(rng);
    if (!(fire < step.probability)) continue;
    Image& img = out.image;
    switch (step.op) {
      case AugmentOp::ScaleCrop:
        scale_crop(img, step.magnitude, a, b);
        break;
      case AugmentOp::HFlip:
        hflip(img);
        break;
      case AugmentOp::Hue:
        per_pixel_hsv(img, [&](float& h, float&) {
          h = static_cast<float>(std::fmod(double(h) + step.magnitude + 360.0, 360.0));
        });
        break;
      case AugmentOp::Saturation:
        per_pixel_hsv(img, [&](float&, float& sat) { sat = static_cast<float>(std::min(1.0, sat * step.magnitude)); });
        break;
      case AugmentOp::Exposure:
        for (float& v : img.pixels) v = static_cast<float>(v * step.magnitude);
        break;
      case AugmentOp::Brightness:
        for (float& v : img.pixels) v = static_cast<float>(v + step.magnitude);
        break;
    }
    for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  v = mx;
  s = mx > 0.0f ? d / mx : 0.0f;
  if (d <= 0.0f) {
    h = 0.0f;
  } else if (mx == r) {
    h = 60.0f * std::fmod((g - b) / d + 6.0f, 6.0f);
  } else if (mx == g) {
    h = 60.0f * ((b - r) / d + 2.0f);
  } else {
    h = 60.0f * ((r - g) / d + 4.0f);
  }
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float c = v * s;
  const float hp = std::fmod(h, 360.0f) / 60.0f;
  const float x = c * (1.0f - std::abs(std::fmod(hp, 2.0f) - 1.0f));
  float r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp)) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const float m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace davit
