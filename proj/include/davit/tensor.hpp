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
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace davit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct ConstantFill {
  double value = 0.0;
};

// Normal draws rejected and redrawn until they fall inside mean +/- 2 * stddev.
struct TruncatedNormalFill {
  double mean = 0.0;
  double stddev = 0.02;
  std::uint64_t seed = 0;
};

struct ValuesFill {
  std::vector<double> values;
};

using FillSpec = std::variant<ConstantFill, TruncatedNormalFill, ValuesFill>;

// Draws from the truncated normal used for weight initialization.
template <typename Real>
void fill_truncated_normal(std::span<Real> out, double mean, double stddev, std::mt19937_64& rng);

template <typename Real>
class Tape;

namespace detail {

template <typename Real>
struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until the first accumulation
  bool requires_grad = false;
  const Tape<Real>* producer_tape = nullptr;
  std::size_t producer_node = 0;
};

}  // namespace detail

/// Dense row-major array with an optional gradient buffer.
///
/// Copies share storage, the way framework tensor handles do; use clone()
/// for an independent copy. Every extent is at least 1.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;
  explicit Tensor(Shape shape);

  static Tensor create(Shape shape, const FillSpec& fill);
  static Tensor zeros(Shape shape) { return create(std::move(shape), ConstantFill{0.0}); }
  static Tensor full(Shape shape, double value) { return create(std::move(shape), ConstantFill{value}); }
  static Tensor from_values(Shape shape, std::vector<Real> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  Real item() const;
  Real& operator[](std::size_t i) { return data()[i]; }
  Real operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const Real> grad() const;
  // Gradient buffer, allocated as zeros on first use. Const because the
  // handle does not own the storage, the same way shared_ptr works.
  std::span<Real> grad_mut() const;
  void zero_grad();

  Tensor clone() const;
  // Same values, no gradient tracking.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<detail::TensorImpl<Real>>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl<Real>> impl) : impl_(std::move(impl)) {}
  friend class Tape<Real>;

  std::shared_ptr<detail::TensorImpl<Real>> impl_;
};

/// Reverse-mode computation record.
///
/// Constructing a Tape makes it the active record for the calling thread;
/// operations whose inputs require gradients append a node to it. Nodes are
/// appended as results are produced, so the record is in topological order.
/// backward() replays it once in reverse; a second replay is rejected.
template <typename Real>
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const Real> grad_out)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // Returns the active tape if any of the inputs requires a gradient.
  static Tape* recording(std::initializer_list<const Tensor<Real>*> inputs);

  void record(std::string op, std::vector<Tensor<Real>> inputs, Tensor<Real>& output, BackwardFn fn);
  void backward(const Tensor<Real>& loss);

  std::size_t size() const { return nodes_.size(); }
  bool replayed() const { return replayed_; }
  std::vector<std::string> op_names() const;
  // True when every node's inputs were produced by earlier nodes or are leaves.
  bool is_topologically_ordered() const;

 private:
  struct Node {
    std::string op;
    std::vector<std::shared_ptr<detail::TensorImpl<Real>>> inputs;
    std::shared_ptr<detail::TensorImpl<Real>> output;
    BackwardFn fn;
  };

  std::vector<Node> nodes_;
  Tape* previous_ = nullptr;
  bool replayed_ = false;
};

// Throws NumericError naming `op` if any element is NaN or Inf.
template <typename Real>
void check_finite(const Tensor<Real>& t, const char* op);

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace davit
