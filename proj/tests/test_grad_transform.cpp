// Copyright 2026 The emocat authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "emocat/autodiff.hpp"
#include "emocat/grad_transform.hpp"
#include "emocat/layers.hpp"
#include "emocat/rng.hpp"

namespace emocat {
namespace {

GradTransformSpec spec_of(TransformKind kind, double lambda = 1.0, double floor = 1e-8,
                          double cap = 1e3) {
  return GradTransformSpec{kind, lambda, floor, cap};
}

TEST(TransformGradient, ReversalSwapsSign) {
  Tensor out = transform_gradient(spec_of(TransformKind::kReversal), Tensor::row({0.5, -0.25}));
  EXPECT_DOUBLE_EQ(out.data[0], -0.5);
  EXPECT_DOUBLE_EQ(out.data[1], 0.25);
}

TEST(TransformGradient, InvSquareNormDividesBySquaredNorm) {
  Tensor out =
      transform_gradient(spec_of(TransformKind::kInvSquareNorm), Tensor::row({2.0, 0.0}));
  EXPECT_NEAR(out.data[0], -0.5, 1e-12);
  EXPECT_NEAR(out.data[1], 0.0, 1e-12);
}

TEST(TransformGradient, InvExpSquareNorm) {
  Tensor out =
      transform_gradient(spec_of(TransformKind::kInvExpSquareNorm), Tensor::row({1.0}));
  EXPECT_NEAR(out.data[0], -1.0 / std::exp(1.0), 1e-12);
  EXPECT_NEAR(out.data[0], -0.36788, 1e-5);
}

TEST(TransformGradient, IdentityIsBitwise) {
  Rng rng(2);
  Tensor delta = rng.uniform_tensor({3, 5}, -2.0, 2.0);
  GradTransformSpec id = spec_of(TransformKind::kIdentity, 123.0, 17.0, 0.5);
  EXPECT_TRUE(transform_gradient(id, delta) == delta);
}

TEST(TransformGradient, OutputShapeEqualsInputShape) {
  Rng rng(4);
  for (TransformKind k : {TransformKind::kReversal, TransformKind::kInvSquareNorm,
                          TransformKind::kInvExpSquareNorm}) {
    Tensor delta = rng.uniform_tensor({2, 3, 2}, -1.0, 1.0);
    EXPECT_EQ(transform_gradient(spec_of(k), delta).shape, delta.shape);
  }
}

TEST(TransformGradient, NonFiniteDeltaNamesNode) {
  Tensor bad = Tensor::row({1.0, std::nan("")});
  try {
    transform_gradient(spec_of(TransformKind::kReversal), bad, "bottleneck-gate");
    FAIL() << "expected error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("bottleneck-gate"), std::string::npos);
  }
}

TEST(TransformGradient, InvSquareNormCapLimitsOutputNorm) {
  GradTransformSpec s = spec_of(TransformKind::kInvSquareNorm, 1.0, 0.0, 10.0);
  Tensor tiny = Tensor::row({1e-6});
  Tensor out = transform_gradient(s, tiny);
  EXPECT_NEAR(out.norm(), 10.0, 1e-9);
}

TEST(TransformGradient, SpecValidation) {
  EXPECT_THROW(spec_of(TransformKind::kReversal, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(spec_of(TransformKind::kReversal, 1.0, -1.0).validate(), std::invalid_argument);
  EXPECT_THROW(spec_of(TransformKind::kReversal, 1.0, 0.0, 0.0).validate(),
               std::invalid_argument);
  EXPECT_NO_THROW(spec_of(TransformKind::kReversal).validate());
}

TEST(NormProfile, PointValues) {
  EXPECT_DOUBLE_EQ(output_norm_profile(spec_of(TransformKind::kInvSquareNorm), 2.0), 0.5);
  EXPECT_DOUBLE_EQ(output_norm_profile(spec_of(TransformKind::kReversal, 2.0), 3.0), 6.0);
  double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(output_norm_profile(spec_of(TransformKind::kInvExpSquareNorm), r),
              r * std::exp(-0.5), 1e-12);
  EXPECT_NEAR(output_norm_profile(spec_of(TransformKind::kInvExpSquareNorm), r), 0.42888, 1e-5);
}

TEST(NormProfile, InvExpPeaksAtInverseSqrtTwo) {
  GradTransformSpec s = spec_of(TransformKind::kInvExpSquareNorm);
  double best_r = 0.0, best_v = -1.0;
  for (double r = 0.0; r <= 3.0; r += 1e-4) {
    double v = output_norm_profile(s, r);
    if (v > best_v) {
      best_v = v;
      best_r = r;
    }
  }
  EXPECT_NEAR(best_r, 1.0 / std::sqrt(2.0), 1e-3);
}

TEST(NormProfile, InvExpMonotoneTail) {
  GradTransformSpec s = spec_of(TransformKind::kInvExpSquareNorm);
  double prev = output_norm_profile(s, 1.0 / std::sqrt(2.0) + 1e-6);
  for (double r = 1.0 / std::sqrt(2.0) + 1e-3; r <= 6.0; r += 1e-3) {
    double v = output_norm_profile(s, r);
    EXPECT_LT(v, prev) << "not strictly decreasing at r=" << r;
    prev = v;
  }
}

TEST(NormProfile, InvSquareNormInversionProperty) {
  GradTransformSpec s = spec_of(TransformKind::kInvSquareNorm, 1.7, 0.0, 1e300);
  for (double r : {1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3}) {
    EXPECT_NEAR(output_norm_profile(s, r) * r, s.lambda, 1e-12 * s.lambda);
  }
}

TEST(NormProfile, MatchesTransformNorm) {
  Rng rng(9);
  for (TransformKind k : {TransformKind::kReversal, TransformKind::kInvSquareNorm,
                          TransformKind::kInvExpSquareNorm}) {
    GradTransformSpec s = spec_of(k, 0.8);
    for (int i = 0; i < 50; ++i) {
      Tensor delta = rng.uniform_tensor({4}, -2.0, 2.0);
      EXPECT_NEAR(transform_gradient(s, delta).norm(),
                  output_norm_profile(s, delta.norm()), 1e-10);
    }
  }
}

TEST(TransformGradient, LambdaLinearity) {
  Rng rng(31);
  const double c = 3.25;
  for (TransformKind k : {TransformKind::kReversal, TransformKind::kInvSquareNorm,
                          TransformKind::kInvExpSquareNorm}) {
    for (int i = 0; i < 20; ++i) {
      Tensor delta = rng.uniform_tensor({6}, -1.5, 1.5);
      Tensor unit = transform_gradient(spec_of(k, 1.0, 0.0, 1e300), delta);
      Tensor scaled = transform_gradient(spec_of(k, c, 0.0, 1e300), delta);
      for (std::size_t j = 0; j < delta.numel(); ++j)
        EXPECT_NEAR(scaled.data[j], c * unit.data[j], 1e-12);
    }
  }
}

// The paper's two scenarios: a confident classifier (low CE loss) produces a
// small raw gradient, an uncertain one a large gradient. The inverter turns
// small into large and vice versa; plain reversal keeps the ordering.
TEST(Scenario, ConfidentVersusUncertainClassifier) {
  auto ce_grad_norm = [](double true_class_prob) {
    const std::size_t C = 7;
    double rest = (1.0 - true_class_prob) / static_cast<double>(C - 1);
    Tensor logits({1, C});
    for (std::size_t c = 0; c < C; ++c)
      logits.data[c] = std::log(c == 0 ? true_class_prob : rest);
    Var x = Var::leaf(logits);
    backward(cross_entropy(x, 0));
    return x.grad().norm();
  };
  double r_confident = ce_grad_norm(0.99);
  double r_uncertain = ce_grad_norm(0.40);
  EXPECT_LT(r_confident, r_uncertain);

  GradTransformSpec rev = spec_of(TransformKind::kReversal);
  GradTransformSpec inv = spec_of(TransformKind::kInvSquareNorm);
  // reversal: small stays small; inverter: small becomes large
  EXPECT_LT(output_norm_profile(rev, r_confident), output_norm_profile(rev, r_uncertain));
  EXPECT_GT(output_norm_profile(inv, r_confident), output_norm_profile(inv, r_uncertain));
}

// ---- attachment semantics ----

TEST(Attach, IdentitySpecLeavesGraphUnchanged) {
  Rng rng(12);
  Tensor xv = rng.uniform_tensor({3, 4}, -1.0, 1.0);
  Tensor wv = rng.uniform_tensor({4, 2}, -1.0, 1.0);

  Var x0 = Var::leaf(xv);
  Var y0 = tanh(matmul(x0, Var::leaf(wv)));
  Var loss0 = mean_all(mul(y0, y0));
  backward(loss0);

  Var x1 = Var::leaf(xv);
  Var gate = identity(tanh(matmul(x1, Var::leaf(wv))));
  attach(gate, spec_of(TransformKind::kIdentity));
  Var loss1 = mean_all(mul(gate, gate));
  backward(loss1);

  EXPECT_TRUE(loss0.value() == loss1.value());
  EXPECT_TRUE(x0.grad() == x1.grad());
}

TEST(Attach, ForwardTransparencyForAllKinds) {
  Rng rng(13);
  Tensor xv = rng.uniform_tensor({2, 3}, -1.0, 1.0);
  Var plain = identity(Var::leaf(xv));
  for (TransformKind k : {TransformKind::kReversal, TransformKind::kInvSquareNorm,
                          TransformKind::kInvExpSquareNorm}) {
    Var gated = identity(Var::leaf(xv));
    attach(gated, spec_of(k, 2.0));
    EXPECT_TRUE(gated.value() == plain.value());
  }
}

TEST(Attach, ReversalOnIdentityFunction) {
  Var x = Var::leaf(Tensor::scalar(4.0));
  Var f = identity(x);
  attach(f, spec_of(TransformKind::kReversal, 1.0));
  backward(f);
  EXPECT_DOUBLE_EQ(x.grad().item(), -1.0);
}

TEST(Attach, ReversalHalfLambdaOnTripleScale) {
  Var x = Var::leaf(Tensor::scalar(2.0));
  Var f = scale(x, 3.0);
  attach(f, spec_of(TransformKind::kReversal, 0.5));
  backward(f);
  EXPECT_DOUBLE_EQ(x.grad().item(), -1.5);
}

TEST(Attach, DoubleAttachmentRejected) {
  Var x = identity(Var::leaf(Tensor::scalar(1.0)));
  attach(x, spec_of(TransformKind::kReversal));
  EXPECT_THROW(attach(x, spec_of(TransformKind::kIdentity)), std::runtime_error);
}

TEST(Attach, TransformSkippedDuringGradCheckMode) {
  Var x = Var::leaf(Tensor::scalar(5.0));
  Var f = identity(x);
  attach(f, spec_of(TransformKind::kReversal, 2.0));
  backward(f, /*apply_transforms=*/false);
  EXPECT_DOUBLE_EQ(x.grad().item(), 1.0);
  backward(f, /*apply_transforms=*/true);
  EXPECT_DOUBLE_EQ(x.grad().item(), -2.0);
}

TEST(Attach, NodeOwnGradUntouchedByTransform) {
  // the transform applies to what flows PAST the node, not to its stored grad
  Var x = Var::leaf(Tensor::scalar(3.0));
  Var f = identity(x);
  attach(f, spec_of(TransformKind::kReversal, 1.0));
  Var loss = scale(f, 2.0);
  backward(loss);
  EXPECT_DOUBLE_EQ(f.grad().item(), 2.0);   // raw d loss / d f
  EXPECT_DOUBLE_EQ(x.grad().item(), -2.0);  // transformed on the way down
}

}  // namespace
}  // namespace emocat
