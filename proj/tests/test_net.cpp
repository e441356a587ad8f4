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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "emocat/checkpoint.hpp"
#include "emocat/config.hpp"
#include "emocat/net.hpp"
#include "emocat/train.hpp"

namespace emocat {
namespace {

namespace fs = std::filesystem;

EmoCatConfig tiny_config() {
  EmoCatConfig cfg;
  cfg.feature_dim = 8;
  cfg.bottleneck_rate = 3;
  cfg.bottleneck_dim = 4;
  cfg.encoder_channels = 6;
  cfg.encoder_kernel = 3;
  cfg.phoneme_vocab = 10;
  cfg.phoneme_embedding_dim = 4;
  cfg.phoneme_channels = 4;
  cfg.decoder_channels = 6;
  cfg.decoder_kernel = 3;
  cfg.decoder_lstm_hidden = 6;
  cfg.classifier_hidden = 6;
  return cfg;
}

UtteranceRecord tiny_record(std::uint64_t seed, std::size_t T = 7) {
  Rng rng(seed);
  UtteranceRecord rec;
  rec.id = "tiny-" + std::to_string(seed);
  rec.emotion_class = EmotionClass::kExcited;
  rec.intensity = Intensity::kLow;
  rec.features = rng.uniform_tensor({T, 8}, 0.0, 1.0);
  rec.phoneme_ids.assign(T, 3);
  rec.oracle_embedding = oracle_embedding(rec.emotion_class, rec.intensity, seed, 0.1);
  return rec;
}

TEST(Bottleneck, EveryThirdFrameCopiedThreeTimes) {
  Tensor z({7, 2});
  for (std::size_t t = 0; t < 7; ++t) {
    z.at(t, 0) = static_cast<double>(t);
    z.at(t, 1) = 10.0 + static_cast<double>(t);
  }
  Tensor out = apply_bottleneck(z, 3);
  std::vector<double> first_col;
  for (std::size_t t = 0; t < 7; ++t) first_col.push_back(out.at(t, 0));
  EXPECT_EQ(first_col, (std::vector<double>{0, 0, 0, 3, 3, 3, 6}));
}

TEST(Bottleneck, RateOneIsIdentity) {
  Rng rng(2);
  Tensor z = rng.uniform_tensor({5, 3}, -1.0, 1.0);
  EXPECT_TRUE(apply_bottleneck(z, 1) == z);
}

TEST(Bottleneck, RateTwoOnFourFrames) {
  Tensor z({4, 1}, {0.0, 1.0, 2.0, 3.0});
  EXPECT_EQ(apply_bottleneck(z, 2).data, (std::vector<double>{0, 0, 2, 2}));
}

TEST(Bottleneck, Idempotent) {
  Rng rng(3);
  for (std::size_t N : {1u, 2u, 3u, 4u, 7u}) {
    Tensor z = rng.uniform_tensor({11, 3}, -1.0, 1.0);
    Tensor once = apply_bottleneck(z, N);
    EXPECT_TRUE(apply_bottleneck(once, N) == once) << "N=" << N;
  }
}

TEST(Bottleneck, GraphAndTensorVariantsAgree) {
  Rng rng(4);
  Tensor z = rng.uniform_tensor({9, 4}, -1.0, 1.0);
  EXPECT_TRUE(apply_bottleneck(Var::leaf(z), 4).value() == apply_bottleneck(z, 4));
}

TEST(Bottleneck, CarriesAtMostCeilToverNDistinctFrames) {
  Rng rng(5);
  for (std::size_t T : {6u, 7u, 12u}) {
    const std::size_t N = 4;
    Tensor z = rng.uniform_tensor({T, 3}, -1.0, 1.0);
    Tensor out = apply_bottleneck(z, N);
    std::set<std::vector<double>> rows;
    for (std::size_t t = 0; t < T; ++t)
      rows.insert(std::vector<double>(out.data.begin() + t * 3, out.data.begin() + (t + 1) * 3));
    EXPECT_LE(rows.size(), (T + N - 1) / N);
  }
}

TEST(Encoder, SingleFrameShapeContract) {
  EmoCat model(tiny_config(), 11);
  UtteranceRecord rec = tiny_record(1, /*T=*/1);
  Binder bind;
  VaeLatent lat = model.encode_reference(bind, rec.features, rec.oracle_embedding, nullptr);
  EXPECT_EQ(lat.sample.value().shape, (std::vector<std::size_t>{1, 4}));
}

TEST(Encoder, DeterministicWithNoiseOff) {
  EmoCat model(tiny_config(), 12);
  UtteranceRecord rec = tiny_record(2);
  Binder b1, b2;
  Tensor s1 = model.encode_reference(b1, rec.features, rec.oracle_embedding, nullptr)
                  .sample.value();
  Tensor s2 = model.encode_reference(b2, rec.features, rec.oracle_embedding, nullptr)
                  .sample.value();
  EXPECT_TRUE(s1 == s2);
}

TEST(Encoder, ZeroEverythingGivesZeroLatentAndKl) {
  EmoCat model(tiny_config(), 13);
  for (Param* p : model.params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
  Binder bind;
  VaeLatent lat = model.encode_reference(bind, Tensor({5, 8}), Tensor({64}), nullptr);
  for (double v : lat.mu.value().data) EXPECT_DOUBLE_EQ(v, 0.0);
  for (double v : lat.log_var.value().data) EXPECT_DOUBLE_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(kl_standard_normal(lat).value().item(), 0.0);
}

TEST(Encoder, WrongEmbeddingDimRejected) {
  EmoCat model(tiny_config(), 14);
  Binder bind;
  EXPECT_THROW(model.encode_reference(bind, Tensor({5, 8}), Tensor({32}), nullptr),
               std::invalid_argument);
}

TEST(PhonemeEncoder, LookupRowsEqualForSameId) {
  EmoCatConfig cfg = tiny_config();
  EmoCat model(cfg, 15);
  Binder bind;
  Var out = model.encode_phonemes(bind, {4, 4, 4, 4, 4});
  EXPECT_EQ(out.value().shape, (std::vector<std::size_t>{5, cfg.phoneme_channels}));
  // middle rows see identical conv windows; border rows differ by padding
  for (std::size_t c = 0; c < cfg.phoneme_channels; ++c) {
    EXPECT_DOUBLE_EQ(out.value().at(1, c), out.value().at(2, c));
    EXPECT_DOUBLE_EQ(out.value().at(2, c), out.value().at(3, c));
  }
}

TEST(PhonemeEncoder, OutOfRangeIdRejected) {
  EmoCat model(tiny_config(), 16);
  Binder bind;
  EXPECT_THROW(model.encode_phonemes(bind, {0, 99}), std::invalid_argument);
}

TEST(Decoder, ShapeAndDeterminism) {
  EmoCat model(tiny_config(), 17);
  UtteranceRecord rec = tiny_record(3, /*T=*/1);
  Tensor out1 = model.reconstruct(rec);
  Tensor out2 = model.reconstruct(rec);
  EXPECT_EQ(out1.shape, rec.features.shape);
  EXPECT_TRUE(out1 == out2);
}

TEST(Decoder, LengthMismatchRejected) {
  EmoCat model(tiny_config(), 18);
  Binder bind;
  Var bn = Var::leaf(Tensor({4, 4}));
  Var phon = Var::leaf(Tensor({5, 4}));
  EXPECT_THROW(model.decode(bind, bn, phon, Tensor({64})), std::invalid_argument);
}

TEST(Classifier, LogitsLengthMatchesClassCount) {
  for (ClassifierKind kind : {ClassifierKind::kFeedForward, ClassifierKind::kGru}) {
    EmoCatConfig cfg = tiny_config();
    cfg.classifier_kind = kind;
    EmoCat model(cfg, 19);
    Binder bind;
    Var logits = model.classify_adversarial(bind, Var::leaf(Tensor({9, 4})));
    EXPECT_EQ(logits.value().shape, (std::vector<std::size_t>{1, kNumFineLabels}));
  }
}

TEST(Classifier, CoarseToggleGivesThreeWay) {
  EmoCatConfig cfg = tiny_config();
  cfg.coarse_labels = true;
  EmoCat model(cfg, 20);
  Binder bind;
  Var logits = model.classify_adversarial(bind, Var::leaf(Tensor({9, 4})));
  EXPECT_EQ(logits.value().cols(), kNumCoarseLabels);
}

// With reversal the encoder-side gradient of the classifier loss is the exact
// negation of the identity-transform gradient, while the classifier's own
// parameters see identical gradients.
TEST(Adversarial, ReversalNegatesEncoderGradOnly) {
  EmoCatConfig cfg = tiny_config();
  EmoCat model(cfg, 21);
  UtteranceRecord rec = tiny_record(5);

  auto classifier_loss_grads = [&](TransformKind kind) {
    Binder bind;
    VaeLatent lat = model.encode_reference(bind, rec.features, rec.oracle_embedding, nullptr);
    Var bn = apply_bottleneck(lat.sample, cfg.bottleneck_rate);
    Var gate = identity(bn);
    attach(gate, GradTransformSpec{kind, 1.0, 1e-8, 1e3});
    Var ce = cross_entropy(model.classify_adversarial(bind, gate), 1);
    backward(ce);
    std::vector<Tensor> grads;
    for (Param* p : model.params()) grads.push_back(bind.grad_of(*p));
    return grads;
  };

  auto id_grads = classifier_loss_grads(TransformKind::kIdentity);
  auto rev_grads = classifier_loss_grads(TransformKind::kReversal);
  const auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    bool is_classifier = params[i]->name.rfind("classifier.", 0) == 0;
    bool is_encoder = params[i]->name.rfind("encoder.", 0) == 0;
    for (std::size_t j = 0; j < id_grads[i].numel(); ++j) {
      if (is_classifier) {
        EXPECT_EQ(rev_grads[i].data[j], id_grads[i].data[j]) << params[i]->name;
      } else if (is_encoder) {
        EXPECT_EQ(rev_grads[i].data[j], -id_grads[i].data[j]) << params[i]->name;
      }
    }
  }
}

TEST(Adversarial, ClassifierStepIdenticalUnderReversalOnFrozenEncoder) {
  EmoCatConfig cfg = tiny_config();
  UtteranceRecord rec = tiny_record(6);

  auto one_step = [&](TransformKind kind) {
    EmoCat model(cfg, 22);  // same seed, same init
    Binder bind;
    GradTransformSpec spec{kind, 1.0, 1e-8, 1e3};
    TrainLosses losses = model.forward_train(bind, rec, nullptr, spec, {});
    backward(losses.total);
    auto clf = model.classifier_params();
    std::vector<Tensor> grads;
    for (Param* p : clf) grads.push_back(bind.grad_of(*p));
    Adam adam(clf, 1e-3);
    adam.step(clf, grads);
    std::vector<Tensor> values;
    for (Param* p : clf) values.push_back(p->value);
    return values;
  };

  auto with_identity = one_step(TransformKind::kIdentity);
  auto with_reversal = one_step(TransformKind::kReversal);
  ASSERT_EQ(with_identity.size(), with_reversal.size());
  for (std::size_t i = 0; i < with_identity.size(); ++i)
    EXPECT_TRUE(with_identity[i] == with_reversal[i]);
}

TEST(ForwardTrain, LossesFiniteAndPositiveUntrained) {
  EmoCat model(tiny_config(), 23);
  UtteranceRecord rec = tiny_record(7);
  Binder bind;
  Rng noise(1);
  TrainLosses losses = model.forward_train(bind, rec, &noise);
  EXPECT_TRUE(std::isfinite(losses.total.value().item()));
  EXPECT_GT(losses.total.value().item(), 0.0);
  EXPECT_GT(losses.l1.value().item(), 0.0);
}

TEST(ForwardTrain, MissingEmbeddingRejected) {
  EmoCat model(tiny_config(), 24);
  UtteranceRecord rec = tiny_record(8);
  rec.oracle_embedding = Tensor();
  Binder bind;
  EXPECT_THROW(model.forward_train(bind, rec, nullptr), std::invalid_argument);
}

TEST(Centroids, MeanOfIdenticalVectorsIsThatVector) {
  std::vector<UtteranceRecord> records;
  for (auto& [cls, inten] : all_fine_labels()) {
    UtteranceRecord r;
    r.emotion_class = cls;
    r.intensity = inten;
    r.oracle_embedding = emotion_anchor(cls, inten);
    records.push_back(r);
    records.push_back(r);
    records.push_back(r);
  }
  CentroidMap centroids = compute_centroids(records);
  for (auto& [cls, inten] : all_fine_labels()) {
    Tensor anchor = emotion_anchor(cls, inten);
    EXPECT_NEAR(max_abs_diff(centroids.at(label_key(cls, inten)), anchor), 0.0, 1e-15);
  }
}

TEST(Centroids, TwoVectorMean) {
  std::vector<UtteranceRecord> records;
  for (auto& [cls, inten] : all_fine_labels()) {
    for (int k = 0; k < 2; ++k) {
      UtteranceRecord r;
      r.emotion_class = cls;
      r.intensity = inten;
      r.oracle_embedding = Tensor({kEmotionEmbeddingDim});
      r.oracle_embedding.data[k] = 1.0;  // [1,0,...] and [0,1,...]
      records.push_back(r);
    }
  }
  CentroidMap centroids = compute_centroids(records);
  const Tensor& c = centroids.at("neutral");
  EXPECT_DOUBLE_EQ(c.data[0], 0.5);
  EXPECT_DOUBLE_EQ(c.data[1], 0.5);
  EXPECT_DOUBLE_EQ(c.data[2], 0.0);
}

TEST(Centroids, MatchesStreamingMeanOracle) {
  CorpusSpec spec;
  spec.seed = 33;
  spec.neutral_a = 12;
  spec.emotional_a = 18;
  spec.neutral_b = 12;
  spec.emotional_b = 12;
  spec.t_min = 10;
  spec.t_max = 14;
  auto corpus = generate_corpus(spec);
  CentroidMap centroids = compute_centroids(corpus);
  // independent second pass: streaming mean per class
  std::map<std::string, std::pair<Tensor, std::size_t>> acc;
  for (const auto& r : corpus) {
    auto [it, fresh] = acc.try_emplace(r.label(), Tensor({kEmotionEmbeddingDim}), 0u);
    ++it->second.second;
    double inv_n = 1.0 / static_cast<double>(it->second.second);
    for (std::size_t j = 0; j < kEmotionEmbeddingDim; ++j)
      it->second.first.data[j] += (r.oracle_embedding.data[j] - it->second.first.data[j]) * inv_n;
  }
  for (auto& [key, mean_count] : acc)
    EXPECT_NEAR(max_abs_diff(centroids.at(key), mean_count.first), 0.0, 1e-12) << key;
}

TEST(Centroids, EmptyClassErrorListsIt) {
  std::vector<UtteranceRecord> records;
  UtteranceRecord r;
  r.emotion_class = EmotionClass::kNeutral;
  r.intensity = Intensity::kNone;
  r.oracle_embedding = Tensor({kEmotionEmbeddingDim});
  records.push_back(r);
  try {
    compute_centroids(records);
    FAIL() << "expected missing-class error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("excited:low"), std::string::npos);
  }
}

TEST(Convert, LengthPreservingAndDeterministic) {
  EmoCat model(tiny_config(), 25);
  UtteranceRecord rec = tiny_record(9, /*T=*/13);
  std::vector<UtteranceRecord> pseudo;
  for (auto& [cls, inten] : all_fine_labels()) {
    UtteranceRecord r;
    r.emotion_class = cls;
    r.intensity = inten;
    r.oracle_embedding = emotion_anchor(cls, inten);
    pseudo.push_back(r);
  }
  CentroidMap centroids = compute_centroids(pseudo);
  Tensor out1 = convert(model, centroids, rec, EmotionClass::kDisappointed, Intensity::kHigh);
  Tensor out2 = convert(model, centroids, rec, EmotionClass::kDisappointed, Intensity::kHigh);
  EXPECT_EQ(out1.shape, rec.features.shape);
  EXPECT_TRUE(out1 == out2);
}

TEST(Convert, UnknownTargetRejected) {
  EmoCat model(tiny_config(), 26);
  UtteranceRecord rec = tiny_record(10);
  CentroidMap empty;
  EXPECT_THROW(convert(model, empty, rec, EmotionClass::kExcited, Intensity::kLow),
               std::runtime_error);
}

TEST(Checkpoint, RoundTripAndByteIdenticalResave) {
  fs::path dir = fs::temp_directory_path() / "emocat-ckpt-test";
  fs::create_directories(dir);
  RunConfig config;
  config.set("corpus.feature_dim", "8");
  config.set("model.bottleneck_dim", "4");
  config.set("model.encoder_channels", "6");
  config.set("model.phoneme_embedding_dim", "4");
  config.set("model.phoneme_channels", "4");
  config.set("model.decoder_channels", "6");
  config.set("model.decoder_lstm_hidden", "6");
  config.set("model.classifier_hidden", "6");
  config.set("corpus.phoneme_vocab", "5");

  ModelState state;
  state.model = std::make_unique<EmoCat>(config.emocat_config(), 31);
  state.step = 123;
  for (auto& [cls, inten] : all_fine_labels())
    state.centroids[label_key(cls, inten)] = emotion_anchor(cls, inten);

  fs::path p1 = dir / "a.bin";
  save_checkpoint(p1.string(), state, config);
  LoadedCheckpoint loaded = load_checkpoint(p1.string());
  EXPECT_EQ(loaded.state.step, 123u);
  ASSERT_EQ(loaded.state.model->params().size(), state.model->params().size());
  for (std::size_t i = 0; i < state.model->params().size(); ++i)
    EXPECT_TRUE(loaded.state.model->params()[i]->value == state.model->params()[i]->value)
        << state.model->params()[i]->name;
  EXPECT_EQ(loaded.state.centroids.size(), state.centroids.size());
  for (auto& [key, vec] : state.centroids)
    EXPECT_TRUE(loaded.state.centroids.at(key) == vec);

  fs::path p2 = dir / "b.bin";
  save_checkpoint(p2.string(), loaded.state, loaded.config);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  EXPECT_EQ(s1.str(), s2.str());
  fs::remove_all(dir);
}

TEST(Checkpoint, TruncatedFileRejected) {
  fs::path dir = fs::temp_directory_path() / "emocat-ckpt-trunc";
  fs::create_directories(dir);
  RunConfig config;
  ModelState state;
  state.model = std::make_unique<EmoCat>(config.emocat_config(), 1);
  fs::path p = dir / "c.bin";
  save_checkpoint(p.string(), state, config);
  fs::resize_file(p, fs::file_size(p) / 2);
  EXPECT_THROW(load_checkpoint(p.string()), std::runtime_error);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace emocat
