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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "davit/error.hpp"
#include "davit/ops.hpp"
#include "davit/tensor.hpp"

using namespace davit;

TEST(Tensor, ZerosHaveRequestedShape) {
  Tensorf t({2, 3, 4});
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.numel(), 24u);
  for (float v : t.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, RejectsZeroExtentAndEmptyShape) {
  EXPECT_THROW(Tensorf({2, 0}), ShapeError);
  EXPECT_THROW(Tensorf(Shape{}), ShapeError);
}

TEST(Tensor, FromValuesLengthMustMatch) {
  EXPECT_THROW(Tensorf::from_values({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensorf::create({3}, ValuesFill{{1.0, 2.0}}), ShapeError);
  auto t = Tensord::create({3}, ValuesFill{{1.0, 2.0, 3.0}});
  EXPECT_EQ(t[2], 3.0);
}

TEST(Tensor, TruncatedNormalStaysWithinTwoSigmaAndIsSeeded) {
  auto a = Tensord::create({4096}, TruncatedNormalFill{0.0, 0.02, 7});
  auto b = Tensord::create({4096}, TruncatedNormalFill{0.0, 0.02, 7});
  double sum = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    EXPECT_LE(std::abs(a[i]), 0.04);
    EXPECT_EQ(a[i], b[i]);
    sum += a[i];
  }
  EXPECT_NEAR(sum / 4096.0, 0.0, 0.002);
}

TEST(Tensor, CloneIsDeepDetachDropsGrad) {
  auto a = Tensorf::full({3}, 1.5);
  a.set_requires_grad(true);
  auto c = a.clone();
  c[0] = 9.0f;
  EXPECT_EQ(a[0], 1.5f);
  EXPECT_TRUE(c.requires_grad());
  EXPECT_FALSE(a.detach().requires_grad());
  EXPECT_FALSE(a.detach().same_storage(a));
}

TEST(Tensor, ItemNeedsSingleElement) {
  EXPECT_THROW(Tensorf({2}).item(), ShapeError);
  EXPECT_EQ(Tensorf::full({1}, 4.0).item(), 4.0f);
}

TEST(Tape, NoRecordingWithoutActiveTape) {
  auto a = Tensord::full({2}, 1.0);
  a.set_requires_grad(true);
  auto y = ops::sum(a);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tape, NoRecordingWhenNoInputNeedsGrad) {
  Tape<double> tape;
  auto y = ops::sum(Tensord::full({2}, 1.0));
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tape, NodesAppendInTopologicalOrder) {
  Tape<double> tape;
  auto a = Tensord::full({3}, 2.0);
  a.set_requires_grad(true);
  auto b = ops::mul(a, a);
  auto c = ops::add(b, a);
  auto loss = ops::sum(c);
  EXPECT_EQ(tape.op_names(), (std::vector<std::string>{"mul", "add", "sum"}));
  EXPECT_TRUE(tape.is_topologically_ordered());
  tape.backward(loss);
  // d/da (a^2 + a) = 2a + 1
  for (double g : a.grad()) EXPECT_DOUBLE_EQ(g, 5.0);
}

TEST(Tape, SecondBackwardThrows) {
  Tape<double> tape;
  auto a = Tensord::full({2}, 1.0);
  a.set_requires_grad(true);
  auto loss = ops::sum(a);
  tape.backward(loss);
  EXPECT_TRUE(tape.replayed());
  EXPECT_THROW(tape.backward(loss), AutogradError);
}

TEST(Tape, DetachedLossThrows) {
  Tape<double> tape;
  auto a = Tensord::full({2}, 1.0);
  a.set_requires_grad(true);
  auto loss = ops::sum(a).detach();
  EXPECT_THROW(tape.backward(loss), AutogradError);
}

TEST(Tape, NonScalarLossThrows) {
  Tape<double> tape;
  auto a = Tensord::full({2}, 1.0);
  a.set_requires_grad(true);
  auto y = ops::scale(a, 2.0);
  EXPECT_THROW(tape.backward(y), AutogradError);
}

TEST(Tape, LossFromOtherTapeThrows) {
  auto a = Tensord::full({2}, 1.0);
  a.set_requires_grad(true);
  Tensord loss;
  {
    Tape<double> first;
    loss = ops::sum(a);
  }
  Tape<double> second;
  EXPECT_THROW(second.backward(loss), AutogradError);
}

TEST(Tape, GradientsAccumulateAcrossUses) {
  Tape<double> tape;
  auto a = Tensord::from_values({2}, {1.0, -2.0});
  a.set_requires_grad(true);
  auto loss = ops::sum(ops::add(ops::scale(a, 3.0), ops::scale(a, 4.0)));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(a.grad()[0], 7.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 7.0);
}

TEST(Tensor, NonFiniteForwardThrows) {
  auto a = Tensorf::from_values({2}, {1.0f, std::numeric_limits<float>::infinity()});
  EXPECT_THROW(ops::scale(a, 1.0), NumericError);
  auto big = Tensorf::full({1}, 3e38);
  EXPECT_THROW(ops::add(big, big), NumericError);
}
