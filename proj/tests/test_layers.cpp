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

#include "emocat/layers.hpp"
#include "emocat/rng.hpp"

namespace emocat {
namespace {

TEST(Dense, IdentityWeightsPassThrough) {
  Rng rng(1);
  Dense d("d", 3, 3, rng);
  std::fill(d.weight.value.data.begin(), d.weight.value.data.end(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) d.weight.value.at(i, i) = 1.0;
  Tensor x = rng.uniform_tensor({4, 3}, -1.0, 1.0);
  Binder bind;
  EXPECT_TRUE(d.apply(bind, Var::leaf(x)).value() == x);
}

TEST(Conv1d, KernelWidthOnePointwiseScale) {
  Rng rng(2);
  Conv1d c("c", 1, 1, 1, rng);
  c.weight.value.data = {2.0};
  c.bias.value.data = {0.0};
  Binder bind;
  Var out = c.apply(bind, Var::leaf(Tensor({3, 1}, {1.0, 2.0, 3.0})));
  EXPECT_EQ(out.value().data, (std::vector<double>{2.0, 4.0, 6.0}));
}

TEST(Conv1d, EvenKernelRejected) {
  Rng rng(3);
  EXPECT_THROW(Conv1d("c", 4, 2, 2, rng), std::invalid_argument);
}

TEST(Lstm, ZeroParametersGiveZeroHidden) {
  Rng rng(4);
  LstmCell cell("lstm", 3, 5, rng);
  std::fill(cell.weight.value.data.begin(), cell.weight.value.data.end(), 0.0);
  Tensor x = rng.uniform_tensor({1, 3}, -2.0, 2.0);
  Binder bind;
  auto s = cell.step(bind, Var::leaf(x), cell.zero_state());
  for (double v : s.h.value().data) EXPECT_DOUBLE_EQ(v, 0.0);
  for (double v : s.c.value().data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Gru, HiddenStateShapeThreaded) {
  Rng rng(5);
  GruCell cell("gru", 3, 4, rng);
  Tensor x = rng.uniform_tensor({6, 3}, -1.0, 1.0);
  Binder bind;
  Var h = cell.run_final(bind, Var::leaf(x));
  EXPECT_EQ(h.value().shape, (std::vector<std::size_t>{1, 4}));
}

TEST(L1Loss, ZeroWhenEqual) {
  Rng rng(6);
  Tensor x = rng.uniform_tensor({5, 4}, -1.0, 1.0);
  EXPECT_DOUBLE_EQ(l1_loss(Var::leaf(x), Var::leaf(x)).value().item(), 0.0);
}

TEST(L1Loss, MeanAbsoluteDifference) {
  Var pred = Var::leaf(Tensor::row({1.0, 1.0}));
  Var target = Var::leaf(Tensor::row({0.0, 2.0}));
  EXPECT_DOUBLE_EQ(l1_loss(pred, target).value().item(), 1.0);
}

TEST(L1Loss, MatchesElementwiseOracle) {
  Rng rng(7);
  Tensor a = rng.uniform_tensor({7, 9}, -3.0, 3.0);
  Tensor b = rng.uniform_tensor({7, 9}, -3.0, 3.0);
  double oracle = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) oracle += std::fabs(a.data[i] - b.data[i]);
  oracle /= static_cast<double>(a.numel());
  EXPECT_NEAR(l1_loss(Var::leaf(a), Var::leaf(b)).value().item(), oracle, 1e-12);
}

TEST(L1Loss, ShapeMismatchRejected) {
  EXPECT_THROW(l1_loss(Var::leaf(Tensor({2, 2})), Var::leaf(Tensor({2, 3}))),
               std::invalid_argument);
}

TEST(Kl, ZeroWhenLatentMatchesPrior) {
  Var mu = Var::leaf(Tensor({3, 4}));
  Var lv = Var::leaf(Tensor({3, 4}));
  EXPECT_DOUBLE_EQ(kl_standard_normal(mu, lv).value().item(), 0.0);
}

TEST(Kl, UnitMeanScalarDim) {
  Var mu = Var::leaf(Tensor({1, 1}, {1.0}));
  Var lv = Var::leaf(Tensor({1, 1}, {0.0}));
  EXPECT_NEAR(kl_standard_normal(mu, lv).value().item(), 0.5, 1e-12);
}

TEST(Kl, LogVarLnFour) {
  Var mu = Var::leaf(Tensor({1, 1}, {0.0}));
  Var lv = Var::leaf(Tensor({1, 1}, {std::log(4.0)}));
  double expected = 0.5 * (4.0 - 1.0 - std::log(4.0));
  EXPECT_NEAR(kl_standard_normal(mu, lv).value().item(), expected, 1e-12);
  EXPECT_NEAR(expected, 0.80685, 1e-5);
}

TEST(Kl, NonNegativeOnGridAndZeroOnlyAtPrior) {
  for (double mu = -2.0; mu <= 2.0; mu += 0.5) {
    for (double lv = -2.0; lv <= 2.0; lv += 0.5) {
      double kl = kl_standard_normal(Var::leaf(Tensor({1, 1}, {mu})),
                                     Var::leaf(Tensor({1, 1}, {lv})))
                      .value()
                      .item();
      EXPECT_GE(kl, 0.0);
      if (mu != 0.0 || lv != 0.0) EXPECT_GT(kl, 0.0) << "mu=" << mu << " lv=" << lv;
    }
  }
}

TEST(ClassWeights, NinetyTen) {
  auto w = class_weights({90, 10});
  EXPECT_NEAR(w[0], 0.2, 1e-12);
  EXPECT_NEAR(w[1], 1.8, 1e-12);
}

TEST(ClassWeights, UniformCountsGiveOnes) {
  for (double v : class_weights({25, 25, 25, 25})) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(ClassWeights, MatchesArithmeticOracle) {
  std::vector<std::size_t> counts{70, 10, 10, 5, 5};
  auto w = class_weights(counts);
  // independent arithmetic: w_c = (1/n_c) * C / sum(1/n_k)
  double inv_sum = 0.0;
  for (std::size_t n : counts) inv_sum += 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    double expect = (1.0 / static_cast<double>(counts[c])) *
                    static_cast<double>(counts.size()) / inv_sum;
    EXPECT_NEAR(w[c], expect, 1e-12);
    total += w[c];
  }
  EXPECT_NEAR(total, 5.0, 1e-12);
}

TEST(ClassWeights, ZeroCountRejected) {
  EXPECT_THROW(class_weights({5, 0, 3}), std::invalid_argument);
}

TEST(CrossEntropy, ConfidentCorrectNearZero) {
  Tensor logits({1, 7});
  logits.data[2] = 30.0;
  EXPECT_LT(weighted_cross_entropy(Var::leaf(logits), 2, 1.0).value().item(), 1e-9);
}

TEST(CrossEntropy, UniformLogitsSevenClasses) {
  Tensor logits({1, 7});
  double loss = weighted_cross_entropy(Var::leaf(logits), 3, 1.0).value().item();
  EXPECT_NEAR(loss, std::log(7.0), 1e-12);
  EXPECT_NEAR(loss, 1.94591, 1e-5);
}

TEST(CrossEntropy, LinearInWeight) {
  Rng rng(8);
  Tensor logits = rng.uniform_tensor({1, 5}, -1.0, 1.0);
  double w1 = weighted_cross_entropy(Var::leaf(logits), 1, 0.7).value().item();
  double w2 = weighted_cross_entropy(Var::leaf(logits), 1, 1.4).value().item();
  EXPECT_NEAR(w2, 2.0 * w1, 1e-12);
}

TEST(CrossEntropy, UniformWeightsEqualUnweighted) {
  Rng rng(9);
  Tensor logits = rng.uniform_tensor({1, 4}, -2.0, 2.0);
  auto weights = class_weights({10, 10, 10, 10});
  double weighted =
      weighted_cross_entropy(Var::leaf(logits), 2, weights).value().item();
  double plain = cross_entropy(Var::leaf(logits), 2).value().item();
  EXPECT_NEAR(weighted, plain, 1e-12);
}

TEST(CrossEntropy, LabelOutOfRangeRejected) {
  EXPECT_THROW(weighted_cross_entropy(Var::leaf(Tensor({1, 3})), 3, 1.0),
               std::invalid_argument);
  EXPECT_THROW(weighted_cross_entropy(Var::leaf(Tensor({1, 3})), 0, {1.0, 1.0}),
               std::invalid_argument);
}

TEST(VaeHead, NoiseOffIsBitwiseRepeatable) {
  Rng rng(10);
  VaeHead head("vae", 5, 3, rng);
  Tensor x = rng.uniform_tensor({4, 5}, -1.0, 1.0);
  Binder b1, b2;
  VaeLatent l1 = head.apply(b1, Var::leaf(x), nullptr);
  VaeLatent l2 = head.apply(b2, Var::leaf(x), nullptr);
  EXPECT_TRUE(l1.sample.value() == l2.sample.value());
  EXPECT_TRUE(l1.sample.value() == l1.mu.value());
}

TEST(VaeHead, FixedSeedNoiseIsReproducible) {
  Rng rng(11);
  VaeHead head("vae", 5, 3, rng);
  Tensor x = rng.uniform_tensor({4, 5}, -1.0, 1.0);
  Rng n1(77), n2(77);
  Binder b1, b2;
  VaeLatent l1 = head.apply(b1, Var::leaf(x), &n1);
  VaeLatent l2 = head.apply(b2, Var::leaf(x), &n2);
  EXPECT_TRUE(l1.sample.value() == l2.sample.value());
  EXPECT_FALSE(l1.sample.value() == l1.mu.value());
}

TEST(VaeHead, SampleObeysReparameterization) {
  Rng rng(12);
  VaeHead head("vae", 4, 2, rng);
  Tensor x = rng.uniform_tensor({3, 4}, -1.0, 1.0);
  Rng noise(5);
  Rng noise_copy(5);
  Binder bind;
  VaeLatent lat = head.apply(bind, Var::leaf(x), &noise);
  Tensor eps = noise_copy.normal_tensor(lat.mu.value().shape);
  for (std::size_t i = 0; i < eps.numel(); ++i) {
    double expect = lat.mu.value().data[i] +
                    std::exp(0.5 * lat.log_var.value().data[i]) * eps.data[i];
    EXPECT_NEAR(lat.sample.value().data[i], expect, 1e-12);
  }
}

}  // namespace
}  // namespace emocat
