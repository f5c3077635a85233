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

#include "davit/tensor.hpp"

#include <cmath>
#include <sstream>

#include "davit/error.hpp"

namespace davit {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_str(shape));
  }
}

}  // namespace

template <typename Real>
void fill_truncated_normal(std::span<Real> out, double mean, double stddev, std::mt19937_64& rng) {
  if (!(stddev > 0.0)) throw ConfigError("truncated normal needs stddev > 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Real& v : out) {
    double z;
    do {
      z = normal(rng);
    } while (z < -2.0 || z > 2.0);
    v = static_cast<Real>(mean + stddev * z);
  }
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape) {
  validate_shape(shape);
  impl_ = std::make_shared<detail::TensorImpl<Real>>();
  impl_->data.assign(shape_numel(shape), Real(0));
  impl_->shape = std::move(shape);
}

template <typename Real>
Tensor<Real> Tensor<Real>::create(Shape shape, const FillSpec& fill) {
  Tensor t(std::move(shape));
  auto out = t.data();
  if (const auto* c = std::get_if<ConstantFill>(&fill)) {
    std::fill(out.begin(), out.end(), static_cast<Real>(c->value));
  } else if (const auto* tn = std::get_if<TruncatedNormalFill>(&fill)) {
    std::mt19937_64 rng(tn->seed);
    fill_truncated_normal(out, tn->mean, tn->stddev, rng);
  } else {
    const auto& values = std::get<ValuesFill>(fill).values;
    if (values.size() != out.size()) {
      throw ShapeError("from-values length " + std::to_string(values.size()) + " does not match shape " +
                       shape_str(t.shape()));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<Real>(values[i]);
  }
  return t;
}

template <typename Real>
Tensor<Real> Tensor<Real>::from_values(Shape shape, std::vector<Real> values) {
  validate_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("from-values length " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl<Real>>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

template <typename Real>
const Shape& Tensor<Real>::shape() const {
  if (!impl_) throw ShapeError("use of an undefined tensor");
  return impl_->shape;
}

template <typename Real>
std::size_t Tensor<Real>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

template <typename Real>
std::size_t Tensor<Real>::numel() const {
  return shape_numel(shape());
}

template <typename Real>
std::span<Real> Tensor<Real>::data() {
  if (!impl_) throw ShapeError("use of an undefined tensor");
  return impl_->data;
}

template <typename Real>
std::span<const Real> Tensor<Real>::data() const {
  if (!impl_) throw ShapeError("use of an undefined tensor");
  return impl_->data;
}

template <typename Real>
Real Tensor<Real>::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape()));
  return impl_->data[0];
}

template <typename Real>
bool Tensor<Real>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename Real>
Tensor<Real>& Tensor<Real>::set_requires_grad(bool on) {
  if (!impl_) throw ShapeError("use of an undefined tensor");
  impl_->requires_grad = on;
  return *this;
}

template <typename Real>
bool Tensor<Real>::has_grad() const {
  return impl_ && !impl_->grad.empty();
}

template <typename Real>
std::span<const Real> Tensor<Real>::grad() const {
  if (!has_grad()) throw AutogradError("tensor has no gradient");
  return impl_->grad;
}

template <typename Real>
std::span<Real> Tensor<Real>::grad_mut() const {
  if (!impl_) throw ShapeError("use of an undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Real(0));
  return impl_->grad;
}

template <typename Real>
void Tensor<Real>::zero_grad() {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), Real(0));
}

template <typename Real>
Tensor<Real> Tensor<Real>::clone() const {
  auto impl = std::make_shared<detail::TensorImpl<Real>>();
  impl->shape = shape();
  impl->data = impl_->data;
  impl->grad = impl_->grad;
  impl->requires_grad = impl_->requires_grad;
  return Tensor(std::move(impl));
}

template <typename Real>
Tensor<Real> Tensor<Real>::detach() const {
  auto impl = std::make_shared<detail::TensorImpl<Real>>();
  impl->shape = shape();
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

namespace {

template <typename Real>
Tape<Real>*& active_tape() {
  thread_local Tape<Real>* tape = nullptr;
  return tape;
}

}  // namespace

template <typename Real>
Tape<Real>::Tape() : previous_(active_tape<Real>()) {
  active_tape<Real>() = this;
}

template <typename Real>
Tape<Real>::~Tape() {
  active_tape<Real>() = previous_;
}

template <typename Real>
Tape<Real>* Tape<Real>::active() {
  return active_tape<Real>();
}

template <typename Real>
Tape<Real>* Tape<Real>::recording(std::initializer_list<const Tensor<Real>*> inputs) {
  Tape* tape = active();
  if (!tape || tape->replayed_) return nullptr;
  for (const Tensor<Real>* t : inputs) {
    if (t && t->requires_grad()) return tape;
  }
  return nullptr;
}

template <typename Real>
void Tape<Real>::record(std::string op, std::vector<Tensor<Real>> inputs, Tensor<Real>& output, BackwardFn fn) {
  if (replayed_) throw AutogradError("cannot record '" + op + "' on a tape that was already replayed");
  Node node;
  node.op = std::move(op);
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.impl());
  node.output = output.impl();
  node.fn = std::move(fn);
  output.impl_->requires_grad = true;
  output.impl_->producer_tape = this;
  output.impl_->producer_node = nodes_.size();
  nodes_.push_back(std::move(node));
}

template <typename Real>
void Tape<Real>::backward(const Tensor<Real>& loss) {
  if (replayed_) throw AutogradError("backward replayed twice without a new forward pass");
  if (!loss.defined() || loss.numel() != 1) {
    throw AutogradError("backward needs a single-element loss, got " + shape_str(loss.shape()));
  }
  const auto& impl = loss.impl();
  if (impl->producer_tape != this || impl->producer_node >= nodes_.size() ||
      nodes_[impl->producer_node].output != impl) {
    throw AutogradError("backward on a tensor that was not recorded on this tape (detached graph)");
  }
  if (impl->grad.empty()) impl->grad.assign(1, Real(0));
  impl->grad[0] += Real(1);

  for (std::size_t i = impl->producer_node + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.output->grad.empty()) continue;
    node.fn(std::span<const Real>(node.output->grad));
  }
  replayed_ = true;
  // Saved forward values are released; op names stay for inspection.
  for (Node& node : nodes_) {
    node.fn = nullptr;
    node.inputs.clear();
    node.output.reset();
  }
}

template <typename Real>
std::vector<std::string> Tape<Real>::op_names() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (const Node& n : nodes_) names.push_back(n.op);
  return names;
}

template <typename Real>
bool Tape<Real>::is_topologically_ordered() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& in : nodes_[i].inputs) {
      if (in && in->producer_tape == this && in->producer_node >= i) return false;
    }
  }
  return true;
}

template <typename Real>
void check_finite(const Tensor<Real>& t, const char* op) {
  for (Real v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

#define DAVIT_INSTANTIATE(Real)                                                                           \
  template class Tensor<Real>;                                                                            \
  template class Tape<Real>;                                                                              \
  template void check_finite<Real>(const Tensor<Real>&, const char*);                                     \
  template void fill_truncated_normal<Real>(std::span<Real>, double, double, std::mt19937_64&);

DAVIT_INSTANTIATE(float)
DAVIT_INSTANTIATE(double)

#undef DAVIT_INSTANTIATE

}  // namespace davit
