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

// The emotion-conversion network: a VAE reference encoder over the features
// plus the utterance-level emotion embedding (phonemes are not an encoder
// input), a temporal bottleneck that keeps every N-th latent frame, a phoneme
// encoder, a parallel decoder (three convolutions followed by a
// uni-directional LSTM) conditioned on the emotion embedding, and an
// adversarial emotion classifier fed through a gradient transform.

#ifndef EMOCAT_NET_HPP_
#define EMOCAT_NET_HPP_

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "emocat/autodiff.hpp"
#include "emocat/corpus.hpp"
#include "emocat/grad_transform.hpp"
#include "emocat/layers.hpp"
#include "emocat/rng.hpp"
#include "emocat/tensor.hpp"

namespace emocat {

enum class ClassifierKind { kFeedForward, kGru };

inline const char* to_string(ClassifierKind k) {
  return k == ClassifierKind::kFeedForward ? "ff" : "gru";
}

inline ClassifierKind classifier_kind_from_string(const std::string& s) {
  if (s == "ff") return ClassifierKind::kFeedForward;
  if (s == "gru") return ClassifierKind::kGru;
  throw std::invalid_argument("unknown classifier kind '" + s + "' (expected ff|gru)");
}

struct EmoCatConfig {
  std::size_t feature_dim = 80;
  std::size_t emotion_embedding_dim = kEmotionEmbeddingDim;  // fixed at 64
  std::size_t bottleneck_rate = 4;   // keep every N-th latent frame
  std::size_t bottleneck_dim = 16;   // per-frame latent width
  std::size_t encoder_channels = 32;
  std::size_t encoder_kernel = 3;
  std::size_t phoneme_vocab = 48;    // total across both languages
  std::size_t phoneme_embedding_dim = 16;
  std::size_t phoneme_channels = 16;
  std::size_t decoder_channels = 32;
  std::size_t decoder_kernel = 5;
  std::size_t decoder_lstm_hidden = 32;
  ClassifierKind classifier_kind = ClassifierKind::kFeedForward;
  std::size_t classifier_hidden = 32;
  bool coarse_labels = false;        // 3-way instead of the default 7-way
  bool weighted_adv_ce = false;      // weighted CE for the adversarial classifier
  double kl_beta = 1e-3;
  std::size_t lambda_warmup_steps = 0;  // 0 = constant lambda
  GradTransformSpec grad_transform;

  std::size_t num_classes() const { return coarse_labels ? kNumCoarseLabels : kNumFineLabels; }

  void validate() const {
    if (emotion_embedding_dim != kEmotionEmbeddingDim)
      throw std::invalid_argument("EmoCatConfig: emotion_embedding_dim must be 64");
    if (bottleneck_rate < 1)
      throw std::invalid_argument("EmoCatConfig: bottleneck_rate must be >= 1");
    if (feature_dim == 0 || bottleneck_dim == 0 || encoder_channels == 0 ||
        phoneme_vocab == 0 || phoneme_embedding_dim == 0 || phoneme_channels == 0 ||
        decoder_channels == 0 || decoder_lstm_hidden == 0 || classifier_hidden == 0)
      throw std::invalid_argument("EmoCatConfig: all layer sizes must be positive");
    if (kl_beta < 0.0) throw std::invalid_argument("EmoCatConfig: kl_beta must be >= 0");
    grad_transform.validate();
  }
};

/// Temporal bottleneck on a plain tensor (graph-free variant used for probe
/// extraction and tests); output row t equals input row N*floor(t/N).
inline Tensor apply_bottleneck(const Tensor& z, std::size_t N) {
  if (z.rank() != 2)
    throw std::invalid_argument("apply_bottleneck: expected rank 2, got " + z.shape_str());
  if (N < 1) throw std::invalid_argument("apply_bottleneck: rate must be >= 1");
  const std::size_t T = z.shape[0], C = z.shape[1];
  Tensor out({T, C});
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t src = (t / N) * N;
    std::copy(&z.data[src * C], &z.data[(src + 1) * C], &out.data[t * C]);
  }
  return out;
}

/// Graph variant.
inline Var apply_bottleneck(const Var& z, std::size_t N) { return bottleneck_select(z, N); }

struct TrainLosses {
  Var l1, kl, adv_ce, total;
};

class EmoCat {
 public:
  EmoCat(const EmoCatConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(Rng::mix(init_seed, 0x1217));
    const std::size_t enc_in = cfg_.feature_dim + cfg_.emotion_embedding_dim;
    enc_conv1_ = Conv1d("encoder.conv1", cfg_.encoder_kernel, enc_in, cfg_.encoder_channels, rng);
    enc_conv2_ = Conv1d("encoder.conv2", cfg_.encoder_kernel, cfg_.encoder_channels,
                        cfg_.encoder_channels, rng);
    vae_ = VaeHead("encoder.vae", cfg_.encoder_channels, cfg_.bottleneck_dim, rng);
    phon_embed_ = Embedding("phoneme.embed", cfg_.phoneme_vocab, cfg_.phoneme_embedding_dim, rng);
    phon_conv_ = Conv1d("phoneme.conv", cfg_.encoder_kernel, cfg_.phoneme_embedding_dim,
                        cfg_.phoneme_channels, rng);
    const std::size_t dec_in =
        cfg_.bottleneck_dim + cfg_.phoneme_channels + cfg_.emotion_embedding_dim;
    dec_conv1_ = Conv1d("decoder.conv1", cfg_.decoder_kernel, dec_in, cfg_.decoder_channels, rng);
    dec_conv2_ = Conv1d("decoder.conv2", cfg_.decoder_kernel, cfg_.decoder_channels,
                        cfg_.decoder_channels, rng);
    dec_conv3_ = Conv1d("decoder.conv3", cfg_.decoder_kernel, cfg_.decoder_channels,
                        cfg_.decoder_channels, rng);
    dec_lstm_ = LstmCell("decoder.lstm", cfg_.decoder_channels, cfg_.decoder_lstm_hidden, rng);
    dec_out_ = Dense("decoder.out", cfg_.decoder_lstm_hidden, cfg_.feature_dim, rng);
    if (cfg_.classifier_kind == ClassifierKind::kFeedForward) {
      clf_hidden_ = Dense("classifier.hidden", cfg_.bottleneck_dim, cfg_.classifier_hidden, rng);
    } else {
      clf_gru_ = GruCell("classifier.gru", cfg_.bottleneck_dim, cfg_.classifier_hidden, rng);
    }
    clf_out_ = Dense("classifier.out", cfg_.classifier_hidden, cfg_.num_classes(), rng);

    enc_conv1_.collect(params_);
    enc_conv2_.collect(params_);
    vae_.collect(params_);
    phon_embed_.collect(params_);
    phon_conv_.collect(params_);
    dec_conv1_.collect(params_);
    dec_conv2_.collect(params_);
    dec_conv3_.collect(params_);
    dec_lstm_.collect(params_);
    dec_out_.collect(params_);
    if (cfg_.classifier_kind == ClassifierKind::kFeedForward)
      clf_hidden_.collect(params_);
    else
      clf_gru_.collect(params_);
    clf_out_.collect(params_);
  }

  EmoCat(const EmoCat&) = delete;
  EmoCat& operator=(const EmoCat&) = delete;

  const EmoCatConfig& config() const { return cfg_; }
  const std::vector<Param*>& params() const { return params_; }

  std::vector<Param*> classifier_params() const {
    std::vector<Param*> out;
    for (Param* p : params_)
      if (p->name.rfind("classifier.", 0) == 0) out.push_back(p);
    return out;
  }

  std::vector<Tensor> param_values() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const Param* p : params_) out.push_back(p->value);
    return out;
  }

  void set_param_values(const std::vector<Tensor>& values) {
    if (values.size() != params_.size())
      throw std::invalid_argument("set_param_values: got " + std::to_string(values.size()) +
                                  " tensors for " + std::to_string(params_.size()) + " params");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!values[i].same_shape(params_[i]->value))
        throw std::invalid_argument("set_param_values: shape mismatch at " + params_[i]->name);
      params_[i]->value = values[i];
    }
  }

  /// Per-frame VAE latent over the features with the utterance embedding
  /// broadcast-concatenated to every frame. Phoneme content is not an input.
  /// Pass noise_rng = nullptr at inference (sample == mu).
  VaeLatent encode_reference(Binder& bind, const Var& features, const Var& utt_embedding,
                             Rng* noise_rng) {
    const Tensor& fv = features.value();
    const Tensor& ev = utt_embedding.value();
    if (fv.rank() != 2 || fv.shape[1] != cfg_.feature_dim)
      throw std::invalid_argument("encode_reference: expected [T," +
                                  std::to_string(cfg_.feature_dim) + "] features, got " +
                                  fv.shape_str());
    if (fv.shape[0] < 1)
      throw std::invalid_argument("encode_reference: need at least one frame");
    if (ev.rank() != 1 || ev.shape[0] != cfg_.emotion_embedding_dim)
      throw std::invalid_argument("encode_reference: embedding must be [" +
                                  std::to_string(cfg_.emotion_embedding_dim) + "], got " +
                                  ev.shape_str());
    const std::size_t T = fv.shape[0];
    Var x = concat_cols(features, repeat_row(utt_embedding, T));
    Var h = tanh(enc_conv1_.apply(bind, x));
    h = tanh(enc_conv2_.apply(bind, h));
    return vae_.apply(bind, h, noise_rng);
  }

  VaeLatent encode_reference(Binder& bind, const Tensor& features, const Tensor& utt_embedding,
                             Rng* noise_rng) {
    return encode_reference(bind, Var::leaf(features), Var::leaf(utt_embedding), noise_rng);
  }

  /// Per-frame phoneme embeddings: lookup plus one convolution, length kept.
  Var encode_phonemes(Binder& bind, const std::vector<std::size_t>& phoneme_ids) {
    if (phoneme_ids.empty()) throw std::invalid_argument("encode_phonemes: empty id sequence");
    for (std::size_t id : phoneme_ids)
      if (id >= cfg_.phoneme_vocab)
        throw std::invalid_argument("encode_phonemes: phoneme id " + std::to_string(id) +
                                    " out of range (vocab " +
                                    std::to_string(cfg_.phoneme_vocab) + ")");
    return tanh(phon_conv_.apply(bind, phon_embed_.apply(bind, phoneme_ids)));
  }

  /// Frame-aligned decoding: bottleneck and phoneme sequences stacked with the
  /// broadcast emotion embedding, three convolutions, LSTM, linear output.
  Var decode(Binder& bind, const Var& bottleneck, const Var& phonemes,
             const Var& emotion_embedding) {
    const std::size_t T = bottleneck.value().rows();
    if (phonemes.value().rows() != T)
      throw std::invalid_argument("decode: bottleneck has " + std::to_string(T) +
                                  " frames but phonemes have " +
                                  std::to_string(phonemes.value().rows()));
    const Tensor& ev = emotion_embedding.value();
    if (ev.rank() != 1 || ev.shape[0] != cfg_.emotion_embedding_dim)
      throw std::invalid_argument("decode: embedding must be [" +
                                  std::to_string(cfg_.emotion_embedding_dim) + "], got " +
                                  ev.shape_str());
    Var x = concat_cols({bottleneck, phonemes, repeat_row(emotion_embedding, T)});
    Var h = tanh(dec_conv1_.apply(bind, x));
    h = tanh(dec_conv2_.apply(bind, h));
    h = tanh(dec_conv3_.apply(bind, h));
    h = dec_lstm_.run(bind, h);
    return dec_out_.apply(bind, h);
  }

  Var decode(Binder& bind, const Var& bottleneck, const Var& phonemes,
             const Tensor& emotion_embedding) {
    return decode(bind, bottleneck, phonemes, Var::leaf(emotion_embedding));
  }

  /// Class logits from the bottleneck sequence: the feed-forward variant mean
  /// pools over frames, the GRU variant classifies from its final state.
  Var classify_adversarial(Binder& bind, const Var& bottleneck) {
    Var h;
    if (cfg_.classifier_kind == ClassifierKind::kFeedForward) {
      h = tanh(clf_hidden_.apply(bind, mean_rows(bottleneck)));
    } else {
      h = clf_gru_.run_final(bind, bottleneck);
    }
    return clf_out_.apply(bind, h);
  }

  /// Auto-encoding training pass over graph variables: the features double as
  /// the reconstruction target and the embedding conditions both the encoder
  /// and the decoder. The adversarial CE enters the total as-is; the attached
  /// transform shapes only its effect on the encoder side.
  TrainLosses forward_train(Binder& bind, const Var& features, const Var& utt_embedding,
                            const std::vector<std::size_t>& phoneme_ids, std::size_t label,
                            Rng* noise_rng, const GradTransformSpec& transform,
                            const std::vector<double>& adv_class_weights) {
    VaeLatent lat = encode_reference(bind, features, utt_embedding, noise_rng);
    Var bn = apply_bottleneck(lat.sample, cfg_.bottleneck_rate);

    // classifier branch behind the gradient transform
    Var gate = identity(bn);
    attach(gate, transform);
    Var logits = classify_adversarial(bind, gate);
    Var ce = cfg_.weighted_adv_ce
                 ? weighted_cross_entropy(logits, label, adv_class_weights)
                 : cross_entropy(logits, label);

    Var phon = encode_phonemes(bind, phoneme_ids);
    Var recon = decode(bind, bn, phon, utt_embedding);

    TrainLosses losses;
    losses.l1 = l1_loss(recon, features);
    losses.kl = kl_standard_normal(lat);
    losses.adv_ce = ce;
    losses.total = add(add(losses.l1, scale(losses.kl, cfg_.kl_beta)), losses.adv_ce);
    return losses;
  }

  TrainLosses forward_train(Binder& bind, const UtteranceRecord& record, Rng* noise_rng,
                            const GradTransformSpec& transform,
                            const std::vector<double>& adv_class_weights) {
    if (record.oracle_embedding.numel() != cfg_.emotion_embedding_dim)
      throw std::invalid_argument("forward_train: utterance " + record.id +
                                  " is missing its oracle embedding");
    const std::size_t label = label_index(record.emotion_class, record.intensity,
                                          cfg_.coarse_labels);
    return forward_train(bind, Var::leaf(record.features), Var::leaf(record.oracle_embedding),
                         record.phoneme_ids, label, noise_rng, transform, adv_class_weights);
  }

  TrainLosses forward_train(Binder& bind, const UtteranceRecord& record, Rng* noise_rng) {
    return forward_train(bind, record, noise_rng, cfg_.grad_transform, {});
  }

  /// Deterministic reconstruction (noise off, own embedding).
  Tensor reconstruct(const UtteranceRecord& record) {
    Binder bind;
    VaeLatent lat = encode_reference(bind, record.features, record.oracle_embedding, nullptr);
    Var bn = apply_bottleneck(lat.sample, cfg_.bottleneck_rate);
    Var phon = encode_phonemes(bind, record.phoneme_ids);
    return decode(bind, bn, phon, record.oracle_embedding).value();
  }

  /// Bottleneck embedding sequence for a frozen-model probe (noise off).
  Tensor extract_bottleneck(const UtteranceRecord& record) {
    Binder bind;
    VaeLatent lat = encode_reference(bind, record.features, record.oracle_embedding, nullptr);
    return apply_bottleneck(lat.sample.value(), cfg_.bottleneck_rate);
  }

 private:
  EmoCatConfig cfg_;
  Conv1d enc_conv1_, enc_conv2_;
  VaeHead vae_;
  Embedding phon_embed_;
  Conv1d phon_conv_;
  Conv1d dec_conv1_, dec_conv2_, dec_conv3_;
  LstmCell dec_lstm_;
  Dense dec_out_;
  Dense clf_hidden_;
  GruCell clf_gru_;
  Dense clf_out_;
  std::vector<Param*> params_;
};

// ---- centroids and conversion --------------------------------------------------

using CentroidMap = std::map<std::string, Tensor>;

/// Arithmetic mean of the oracle embeddings per fine label over the given
/// records (the training set).
inline CentroidMap compute_centroids(const std::vector<UtteranceRecord>& records) {
  CentroidMap sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    std::string key = r.label();
    auto [it, fresh] = sums.try_emplace(key, Tensor({kEmotionEmbeddingDim}));
    for (std::size_t j = 0; j < kEmotionEmbeddingDim; ++j)
      it->second.data[j] += r.oracle_embedding.data[j];
    ++counts[key];
  }
  std::vector<std::string> missing;
  for (auto& [cls, inten] : all_fine_labels()) {
    std::string key = label_key(cls, inten);
    if (!counts.count(key)) missing.push_back(key);
  }
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
    throw std::runtime_error("compute_centroids: no utterances for class(es): " + joined);
  }
  for (auto& [key, sum] : sums) {
    double n = static_cast<double>(counts[key]);
    for (double& v : sum.data) v /= n;
  }
  return sums;
}

/// A trained model plus everything inference needs.
struct ModelState {
  std::unique_ptr<EmoCat> model;
  CentroidMap centroids;
  std::uint64_t step = 0;
};

/// Converts one utterance to the target class: the encoder still uses the
/// source utterance's own embedding, the decoder gets the target-class
/// centroid. Deterministic (latent = mu), length-preserving.
inline Tensor convert(EmoCat& model, const CentroidMap& centroids,
                      const UtteranceRecord& record, EmotionClass target_class,
                      Intensity target_intensity) {
  const std::string key = label_key(target_class, target_intensity);
  auto it = centroids.find(key);
  if (it == centroids.end())
    throw std::runtime_error("convert: no centroid for target class '" + key +
                             "' (centroids must be computed before conversion)");
  Binder bind;
  VaeLatent lat = model.encode_reference(bind, record.features, record.oracle_embedding, nullptr);
  Var bn = apply_bottleneck(lat.sample, model.config().bottleneck_rate);
  Var phon = model.encode_phonemes(bind, record.phoneme_ids);
  return model.decode(bind, bn, phon, it->second).value();
}

inline Tensor convert(ModelState& state, const UtteranceRecord& record, EmotionClass target_class,
                      Intensity target_intensity) {
  return convert(*state.model, state.centroids, record, target_class, target_intensity);
}

}  // namespace emocat

#endif  // EMOCAT_NET_HPP_
