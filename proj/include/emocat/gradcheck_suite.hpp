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

// Finite-difference verification of every differentiable primitive and every
// composite layer, over randomized shapes and seeds.

#ifndef EMOCAT_GRADCHECK_SUITE_HPP_
#define EMOCAT_GRADCHECK_SUITE_HPP_

#include <string>
#include <vector>

#include "emocat/grad_check.hpp"
#include "emocat/layers.hpp"
#include "emocat/net.hpp"
#include "emocat/rng.hpp"

namespace emocat {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
};

namespace detail {

/// Squared-mean readout so every op gets a non-constant upstream gradient.
inline Var readout(const Var& y) { return mean_all(mul(y, y)); }

}  // namespace detail

/// Runs the whole suite; each case aggregates `rounds` random shapes/seeds.
inline std::vector<GradCheckCase> run_gradcheck_suite(std::size_t rounds = 10,
                                                      double h = 1e-5) {
  std::vector<GradCheckCase> cases;
  Rng shapes(0x5EED5);

  auto record = [&](const std::string& name, const GraphBuilder& build,
                    const std::function<std::vector<Tensor>(Rng&)>& make_inputs) {
    GradCheckCase c{name, 0.0};
    for (std::size_t r = 0; r < rounds; ++r) {
      Rng rng(Rng::mix(0xC0FFEE, r * 131 + cases.size()));
      c.max_rel_err = std::max(c.max_rel_err, grad_check(build, make_inputs(rng), h));
    }
    cases.push_back(c);
  };

  auto rand_rows = [&](Rng& rng) { return 2 + rng.below(5); };
  auto rand_cols = [&](Rng& rng) { return 2 + rng.below(5); };
  auto rand_mat = [&](Rng& rng, std::size_t r, std::size_t c) {
    return rng.uniform_tensor({r, c}, -1.0, 1.0);
  };

  // ---- primitives ----
  record("add", [](const std::vector<Var>& v) { return detail::readout(add(v[0], v[1])); },
         [&](Rng& rng) {
           std::size_t r = rand_rows(rng), c = rand_cols(rng);
           return std::vector<Tensor>{rand_mat(rng, r, c), rand_mat(rng, r, c)};
         });
  record("sub", [](const std::vector<Var>& v) { return detail::readout(sub(v[0], v[1])); },
         [&](Rng& rng) {
           std::size_t r = rand_rows(rng), c = rand_cols(rng);
           return std::vector<Tensor>{rand_mat(rng, r, c), rand_mat(rng, r, c)};
         });
  record("multiply", [](const std::vector<Var>& v) { return detail::readout(mul(v[0], v[1])); },
         [&](Rng& rng) {
           std::size_t r = rand_rows(rng), c = rand_cols(rng);
           return std::vector<Tensor>{rand_mat(rng, r, c), rand_mat(rng, r, c)};
         });
  record("scale", [](const std::vector<Var>& v) { return detail::readout(scale(v[0], -1.7)); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 3)}; });
  record("matmul",
         [](const std::vector<Var>& v) { return detail::readout(matmul(v[0], v[1])); },
         [&](Rng& rng) {
           std::size_t m = rand_rows(rng), k = rand_cols(rng), n = rand_cols(rng);
           return std::vector<Tensor>{rand_mat(rng, m, k), rand_mat(rng, k, n)};
         });
  record("add_rowvec",
         [](const std::vector<Var>& v) { return detail::readout(add_rowvec(v[0], v[1])); },
         [&](Rng& rng) {
           std::size_t r = rand_rows(rng), c = rand_cols(rng);
           return std::vector<Tensor>{rand_mat(rng, r, c), rng.uniform_tensor({c}, -1.0, 1.0)};
         });
  record("conv1d",
         [](const std::vector<Var>& v) { return detail::readout(conv1d(v[0], v[1], v[2])); },
         [&](Rng& rng) {
           std::size_t t = 3 + rng.below(6), ci = 1 + rng.below(4), co = 1 + rng.below(4);
           std::size_t k = 1 + 2 * rng.below(3);  // 1, 3, or 5
           return std::vector<Tensor>{rng.uniform_tensor({t, ci}, -1.0, 1.0),
                                      rng.uniform_tensor({k, ci, co}, -1.0, 1.0),
                                      rng.uniform_tensor({co}, -1.0, 1.0)};
         });
  record("tanh", [](const std::vector<Var>& v) { return detail::readout(tanh(v[0])); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 4)}; });
  record("sigmoid", [](const std::vector<Var>& v) { return detail::readout(sigmoid(v[0])); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 4)}; });
  record("exp", [](const std::vector<Var>& v) { return detail::readout(exp(v[0])); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 4)}; });
  record("sin", [](const std::vector<Var>& v) { return detail::readout(sin(v[0])); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 4)}; });
  record("log", [](const std::vector<Var>& v) { return detail::readout(log(v[0])); },
         [&](Rng& rng) {
           return std::vector<Tensor>{rng.uniform_tensor({rand_rows(rng), 4}, 0.5, 2.0)};
         });
  record("abs", [](const std::vector<Var>& v) { return detail::readout(abs(v[0])); },
         [&](Rng& rng) {
           Tensor t = rng.uniform_tensor({rand_rows(rng), 4}, 0.2, 1.0);
           for (std::size_t i = 0; i < t.data.size(); ++i)
             if (rng.uniform() < 0.5) t.data[i] = -t.data[i];
           return std::vector<Tensor>{t};
         });
  record("softmax", [](const std::vector<Var>& v) { return detail::readout(softmax(v[0])); },
         [&](Rng& rng) {
           return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 2 + rng.below(5))};
         });
  record("log_softmax",
         [](const std::vector<Var>& v) { return detail::readout(log_softmax(v[0])); },
         [&](Rng& rng) {
           return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 2 + rng.below(5))};
         });
  record("slice_rows",
         [](const std::vector<Var>& v) {
           std::size_t rows = v[0].value().rows();
           return detail::readout(slice(v[0], rows / 3, rows));
         },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, 3 + rng.below(5), 4)}; });
  record("slice_cols",
         [](const std::vector<Var>& v) {
           std::size_t cols = v[0].value().cols();
           return detail::readout(slice_cols(v[0], 1, cols));
         },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, 3, 3 + rng.below(5))}; });
  record("concat_rows",
         [](const std::vector<Var>& v) { return detail::readout(concat_rows(v[0], v[1])); },
         [&](Rng& rng) {
           std::size_t c = rand_cols(rng);
           return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), c),
                                      rand_mat(rng, rand_rows(rng), c)};
         });
  record("concat_cols",
         [](const std::vector<Var>& v) { return detail::readout(concat_cols(v[0], v[1])); },
         [&](Rng& rng) {
           std::size_t r = rand_rows(rng);
           return std::vector<Tensor>{rand_mat(rng, r, rand_cols(rng)),
                                      rand_mat(rng, r, rand_cols(rng))};
         });
  record("mean_all", [](const std::vector<Var>& v) { return mean_all(mul(v[0], v[0])); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 4)}; });
  record("mean_rows",
         [](const std::vector<Var>& v) { return detail::readout(mean_rows(v[0])); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, rand_rows(rng), 4)}; });
  record("repeat_row",
         [](const std::vector<Var>& v) { return detail::readout(repeat_row(v[0], 5)); },
         [&](Rng& rng) { return std::vector<Tensor>{rng.uniform_tensor({4}, -1.0, 1.0)}; });
  record("reshape",
         [](const std::vector<Var>& v) {
           return detail::readout(reshape(v[0], {v[0].value().numel()}));
         },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, 3, 4)}; });
  record("gather_rows",
         [](const std::vector<Var>& v) {
           return detail::readout(gather_rows(v[0], {0, 2, 1, 2, 0}));
         },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, 3, 4)}; });
  record("bottleneck_select",
         [](const std::vector<Var>& v) { return detail::readout(bottleneck_select(v[0], 3)); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, 4 + rng.below(6), 4)}; });
  record("identity_attached",
         [](const std::vector<Var>& v) {
           Var g = identity(v[0]);
           attach(g, GradTransformSpec{TransformKind::kReversal, 2.0, 1e-8, 1e3});
           return detail::readout(g);  // forced to identity inside grad_check
         },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, 3, 4)}; });

  // ---- composite layers (leaf-space: params passed as inputs) ----
  record("dense_layer",
         [](const std::vector<Var>& v) {
           return detail::readout(add_rowvec(matmul(v[0], v[1]), v[2]));
         },
         [&](Rng& rng) {
           std::size_t t = 4, in = 3, out = 3;
           return std::vector<Tensor>{rng.uniform_tensor({t, in}, -1.0, 1.0),
                                      rng.uniform_tensor({in, out}, -1.0, 1.0),
                                      rng.uniform_tensor({out}, -1.0, 1.0)};
         });
  record("l1_loss",
         [](const std::vector<Var>& v) { return l1_loss(v[0], v[1]); },
         [&](Rng& rng) {
           std::size_t r = rand_rows(rng), c = rand_cols(rng);
           Tensor a = rand_mat(rng, r, c), b = rand_mat(rng, r, c);
           // keep entries away from the |.| kink
           for (std::size_t i = 0; i < a.data.size(); ++i)
             if (std::fabs(a.data[i] - b.data[i]) < 1e-2) a.data[i] += 5e-2;
           return std::vector<Tensor>{a, b};
         });
  record("kl_standard_normal",
         [](const std::vector<Var>& v) { return kl_standard_normal(v[0], v[1]); },
         [&](Rng& rng) {
           std::size_t r = rand_rows(rng), c = rand_cols(rng);
           return std::vector<Tensor>{rand_mat(rng, r, c), rand_mat(rng, r, c)};
         });
  record("weighted_cross_entropy",
         [](const std::vector<Var>& v) { return weighted_cross_entropy(v[0], 1, 1.7); },
         [&](Rng& rng) { return std::vector<Tensor>{rand_mat(rng, 1, 5)}; });
  record("vae_sample_head",
         [](const std::vector<Var>& v) {
           // mu + exp(0.5 log_var) * eps with a fixed eps; KL added so log_var
           // is exercised on two paths
           Var sample = add(v[0], mul(exp(scale(v[1], 0.5)), v[2]));
           return add(detail::readout(sample), kl_standard_normal(v[0], v[1]));
         },
         [&](Rng& rng) {
           std::size_t t = 3, d = 3;
           return std::vector<Tensor>{rand_mat(rng, t, d), rand_mat(rng, t, d),
                                      rng.normal_tensor({t, d})};
         });

  // ---- composite layers (parameter-space, through the real layer structs) ----
  auto record_params = [&](const std::string& name,
                           const std::function<double(Rng&)>& run_once) {
    GradCheckCase c{name, 0.0};
    for (std::size_t r = 0; r < rounds; ++r) {
      Rng rng(Rng::mix(0xFEED, r * 257 + cases.size()));
      c.max_rel_err = std::max(c.max_rel_err, run_once(rng));
    }
    cases.push_back(c);
  };

  record_params("lstm_cell", [&](Rng& rng) {
    LstmCell cell("lstm", 3, 4, rng);
    Tensor x = rng.uniform_tensor({5, 3}, -1.0, 1.0);
    std::vector<Param*> params;
    cell.collect(params);
    return grad_check_params(
        [&](Binder& bind) { return detail::readout(cell.run(bind, Var::leaf(x))); }, params, h);
  });
  record_params("gru_cell", [&](Rng& rng) {
    GruCell cell("gru", 3, 4, rng);
    Tensor x = rng.uniform_tensor({5, 3}, -1.0, 1.0);
    std::vector<Param*> params;
    cell.collect(params);
    return grad_check_params(
        [&](Binder& bind) { return detail::readout(cell.run_final(bind, Var::leaf(x))); },
        params, h);
  });
  record_params("conv1d_layer", [&](Rng& rng) {
    Conv1d layer("conv", 3, 3, 4, rng);
    Tensor x = rng.uniform_tensor({6, 3}, -1.0, 1.0);
    std::vector<Param*> params;
    layer.collect(params);
    return grad_check_params(
        [&](Binder& bind) { return detail::readout(tanh(layer.apply(bind, Var::leaf(x)))); },
        params, h);
  });
  record_params("embedding", [&](Rng& rng) {
    Embedding emb("emb", 5, 3, rng);
    std::vector<std::size_t> ids{0, 3, 1, 3, 4};
    std::vector<Param*> params;
    emb.collect(params);
    return grad_check_params(
        [&](Binder& bind) { return detail::readout(emb.apply(bind, ids)); }, params, h);
  });

  // ---- full network, identity transform, gradients w.r.t. the inputs ----
  record_params("emocat_forward", [&](Rng& rng) {
    EmoCatConfig cfg;
    cfg.feature_dim = 6;
    cfg.bottleneck_rate = 2;
    cfg.bottleneck_dim = 3;
    cfg.encoder_channels = 4;
    cfg.encoder_kernel = 3;
    cfg.phoneme_vocab = 6;
    cfg.phoneme_embedding_dim = 4;
    cfg.phoneme_channels = 3;
    cfg.decoder_channels = 4;
    cfg.decoder_kernel = 3;
    cfg.decoder_lstm_hidden = 4;
    cfg.classifier_hidden = 4;
    cfg.classifier_kind = rng.uniform() < 0.5 ? ClassifierKind::kFeedForward
                                              : ClassifierKind::kGru;
    cfg.grad_transform.kind = TransformKind::kIdentity;
    EmoCat model(cfg, rng.next_u64());
    std::vector<std::size_t> ids{1, 1, 4, 4, 2};
    Tensor feats = rng.uniform_tensor({5, cfg.feature_dim}, 0.0, 1.0);
    Tensor emb = emotion_anchor(EmotionClass::kExcited, Intensity::kMedium);
    return grad_check(
        [&](const std::vector<Var>& v) {
          Binder bind;
          return model
              .forward_train(bind, v[0], v[1], ids, /*label=*/2, /*noise_rng=*/nullptr,
                             GradTransformSpec{}, {})
              .total;
        },
        {feats, emb}, h);
  });

  return cases;
}

}  // namespace emocat

#endif  // EMOCAT_GRADCHECK_SUITE_HPP_
