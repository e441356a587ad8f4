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

// Deterministic bilingual synthetic corpus. Each utterance is a [T, F]
// pseudo-spectrogram in [0, 1]: a constant floor, phoneme-dependent smooth
// bumps in the middle bands, an additive emotion signature in the designated
// outer bands (sinusoidal temporal envelope, amplitude scaled by intensity),
// and bounded i.i.d. noise. Emotion content is therefore analytically known.

#ifndef EMOCAT_CORPUS_HPP_
#define EMOCAT_CORPUS_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emocat/rng.hpp"
#include "emocat/tensor.hpp"

namespace emocat {

enum class Language { kA, kB };
enum class EmotionClass { kNeutral, kExcited, kDisappointed };
enum class Intensity { kNone, kLow, kMedium, kHigh };

inline const char* to_string(Language l) { return l == Language::kA ? "A" : "B"; }

inline const char* to_string(EmotionClass c) {
  switch (c) {
    case EmotionClass::kNeutral: return "neutral";
    case EmotionClass::kExcited: return "excited";
    case EmotionClass::kDisappointed: return "disappointed";
  }
  return "?";
}

inline const char* to_string(Intensity i) {
  switch (i) {
    case Intensity::kNone: return "none";
    case Intensity::kLow: return "low";
    case Intensity::kMedium: return "medium";
    case Intensity::kHigh: return "high";
  }
  return "?";
}

inline EmotionClass emotion_class_from_string(const std::string& s) {
  if (s == "neutral") return EmotionClass::kNeutral;
  if (s == "excited") return EmotionClass::kExcited;
  if (s == "disappointed") return EmotionClass::kDisappointed;
  throw std::invalid_argument("unknown emotion class '" + s + "'");
}

inline Intensity intensity_from_string(const std::string& s) {
  if (s == "none") return Intensity::kNone;
  if (s == "low") return Intensity::kLow;
  if (s == "medium") return Intensity::kMedium;
  if (s == "high") return Intensity::kHigh;
  throw std::invalid_argument("unknown intensity '" + s + "'");
}

inline Language language_from_string(const std::string& s) {
  if (s == "A") return Language::kA;
  if (s == "B") return Language::kB;
  throw std::invalid_argument("unknown language '" + s + "'");
}

/// "neutral" or "emotion:intensity", e.g. "excited:high".
inline std::string label_key(EmotionClass c, Intensity i) {
  if (c == EmotionClass::kNeutral) return "neutral";
  return std::string(to_string(c)) + ":" + to_string(i);
}

inline std::pair<EmotionClass, Intensity> parse_label_key(const std::string& key) {
  auto colon = key.find(':');
  if (colon == std::string::npos) {
    EmotionClass c = emotion_class_from_string(key);
    if (c != EmotionClass::kNeutral)
      throw std::invalid_argument("target '" + key + "' needs an intensity, e.g. '" + key +
                                  ":medium'");
    return {c, Intensity::kNone};
  }
  EmotionClass c = emotion_class_from_string(key.substr(0, colon));
  Intensity i = intensity_from_string(key.substr(colon + 1));
  if (c == EmotionClass::kNeutral || i == Intensity::kNone)
    throw std::invalid_argument("invalid target '" + key + "': neutral has no intensity");
  return {c, i};
}

/// Fine 7-way label space: neutral + 2 emotions x 3 intensities.
inline constexpr std::size_t kNumFineLabels = 7;
inline constexpr std::size_t kNumCoarseLabels = 3;

inline std::size_t fine_label_index(EmotionClass c, Intensity i) {
  if (c == EmotionClass::kNeutral) {
    if (i != Intensity::kNone)
      throw std::invalid_argument("neutral must carry intensity 'none'");
    return 0;
  }
  if (i == Intensity::kNone)
    throw std::invalid_argument("emotional class must carry an intensity");
  std::size_t base = c == EmotionClass::kExcited ? 1 : 4;
  return base + (static_cast<std::size_t>(i) - 1);
}

inline std::size_t coarse_label_index(EmotionClass c) { return static_cast<std::size_t>(c); }

inline std::vector<std::pair<EmotionClass, Intensity>> all_fine_labels() {
  return {{EmotionClass::kNeutral, Intensity::kNone},
          {EmotionClass::kExcited, Intensity::kLow},
          {EmotionClass::kExcited, Intensity::kMedium},
          {EmotionClass::kExcited, Intensity::kHigh},
          {EmotionClass::kDisappointed, Intensity::kLow},
          {EmotionClass::kDisappointed, Intensity::kMedium},
          {EmotionClass::kDisappointed, Intensity::kHigh}};
}

/// The six conversion targets.
inline std::vector<std::pair<EmotionClass, Intensity>> conversion_targets() {
  return {{EmotionClass::kExcited, Intensity::kLow},
          {EmotionClass::kExcited, Intensity::kMedium},
          {EmotionClass::kExcited, Intensity::kHigh},
          {EmotionClass::kDisappointed, Intensity::kLow},
          {EmotionClass::kDisappointed, Intensity::kMedium},
          {EmotionClass::kDisappointed, Intensity::kHigh}};
}

inline double intensity_level(Intensity i) {
  switch (i) {
    case Intensity::kNone: return 0.0;
    case Intensity::kLow: return 1.0;
    case Intensity::kMedium: return 2.0;
    case Intensity::kHigh: return 3.0;
  }
  return 0.0;
}

// ---- corpus spec --------------------------------------------------------------

struct CorpusSpec {
  std::uint64_t seed = 7;
  // language A: supporting language, emotional-rich (~2:1 neutral:emotional)
  std::size_t neutral_a = 400;
  std::size_t emotional_a = 200;
  // language B: target language, scarce emotional data (~20:1)
  std::size_t neutral_b = 570;
  std::size_t emotional_b = 30;
  std::size_t t_min = 40;
  std::size_t t_max = 120;
  std::size_t feature_dim = 80;
  std::size_t phoneme_vocab = 24;  // per language; global id ranges are disjoint
  double signature_gain = 0.1;     // additive amplitude for low intensity
  double noise_level = 0.02;       // uniform noise half-width
  double base_floor = 0.05;
  double embedding_jitter = 0.1;   // max oracle-embedding jitter norm

  void validate() const {
    if (t_min < 10 || t_max < t_min)
      throw std::invalid_argument("CorpusSpec: need 10 <= t_min <= t_max");
    if (feature_dim < 8 || feature_dim % 4 != 0)
      throw std::invalid_argument("CorpusSpec: feature_dim must be a multiple of 4, >= 8");
    if (phoneme_vocab == 0) throw std::invalid_argument("CorpusSpec: phoneme_vocab must be > 0");
    if (signature_gain <= 0.0)
      throw std::invalid_argument("CorpusSpec: signature_gain must be > 0");
    if (noise_level < 0.0 || base_floor < noise_level)
      throw std::invalid_argument("CorpusSpec: need 0 <= noise_level <= base_floor");
  }

  std::size_t total_phoneme_vocab() const { return 2 * phoneme_vocab; }
  std::size_t phoneme_offset(Language l) const {
    return l == Language::kA ? 0 : phoneme_vocab;
  }

  /// Designated feature bands: disappointed in the bottom quarter, excited in
  /// the top quarter, phoneme content in the middle half.
  std::pair<std::size_t, std::size_t> emotion_bands(EmotionClass c) const {
    if (c == EmotionClass::kDisappointed) return {0, feature_dim / 4};
    if (c == EmotionClass::kExcited) return {3 * feature_dim / 4, feature_dim};
    throw std::invalid_argument("emotion_bands: neutral has no signature bands");
  }
  std::pair<std::size_t, std::size_t> content_bands() const {
    return {feature_dim / 4, 3 * feature_dim / 4};
  }
};

/// Temporal period of the signature envelope, in frames.
inline constexpr double kSignaturePeriod = 24.0;

/// One synthetic utterance.
struct UtteranceRecord {
  std::string id;
  Language language = Language::kA;
  EmotionClass emotion_class = EmotionClass::kNeutral;
  Intensity intensity = Intensity::kNone;
  Tensor features;                        // [T, F], values in [0, 1]
  std::vector<std::size_t> phoneme_ids;   // length T, global ids
  Tensor oracle_embedding;                // [64]

  std::size_t frames() const { return features.shape.at(0); }
  std::string label() const { return label_key(emotion_class, intensity); }
};

// ---- oracle embeddings ---------------------------------------------------------

inline constexpr std::size_t kEmotionEmbeddingDim = 64;

/// Deterministic unit anchor for a (class, intensity) pair. The emotion
/// identity occupies disjoint blocks in the first half, the intensity level
/// disjoint blocks in the second half, so anchors of different labels have
/// pairwise cosine similarity of at most 0.5 and the embedding carries no
/// language information at all.
inline Tensor emotion_anchor(EmotionClass c, Intensity i) {
  if ((c == EmotionClass::kNeutral) != (i == Intensity::kNone))
    throw std::invalid_argument("emotion_anchor: neutral <=> intensity none");
  Tensor a({kEmotionEmbeddingDim});
  const std::size_t kBlock = 8;
  const double v = 1.0 / std::sqrt(2.0 * kBlock);
  std::size_t emo_block = static_cast<std::size_t>(c);          // 0..2 within first half
  std::size_t int_block = static_cast<std::size_t>(i);          // 0..3 within second half
  for (std::size_t j = 0; j < kBlock; ++j) {
    a.data[emo_block * kBlock + j] = v;
    a.data[kEmotionEmbeddingDim / 2 + int_block * kBlock + j] = v;
  }
  return a;
}

/// Anchor plus a small seeded jitter (norm <= jitter_scale). Independent of
/// language by construction.
inline Tensor oracle_embedding(EmotionClass c, Intensity i, std::uint64_t seed,
                               double jitter_scale) {
  Tensor e = emotion_anchor(c, i);
  if (jitter_scale <= 0.0) return e;
  Rng rng(seed);
  Tensor dir = rng.normal_tensor({kEmotionEmbeddingDim});
  double n = dir.norm();
  if (n == 0.0) return e;
  double mag = jitter_scale * rng.uniform();
  for (std::size_t j = 0; j < kEmotionEmbeddingDim; ++j)
    e.data[j] += dir.data[j] / n * mag;
  return e;
}

// ---- generation -----------------------------------------------------------------

namespace detail {

/// Deterministic per-phoneme bump parameters inside the content bands.
struct PhonemeBump {
  double center, sigma, amp;
};

inline PhonemeBump phoneme_bump(const CorpusSpec& spec, std::size_t global_id) {
  auto [b0, b1] = spec.content_bands();
  double w = static_cast<double>(b1 - b0);
  double h1 = static_cast<double>(Rng::mix(0x9e3779b9u, global_id * 3 + 1) >> 11) * 0x1.0p-53;
  double h2 = static_cast<double>(Rng::mix(0x9e3779b9u, global_id * 3 + 2) >> 11) * 0x1.0p-53;
  double h3 = static_cast<double>(Rng::mix(0x9e3779b9u, global_id * 3 + 3) >> 11) * 0x1.0p-53;
  PhonemeBump p;
  p.center = static_cast<double>(b0) + w * (0.15 + 0.7 * h1);
  p.sigma = w * (0.05 + 0.10 * h2);
  p.amp = 0.25 + 0.30 * h3;
  return p;
}

inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace detail

/// Generates a single utterance. Content, noise, envelope phase and embedding
/// jitter draw from substreams keyed only by (spec.seed, index), so two calls
/// that differ only in (class, intensity) are identical twins except for the
/// additive emotion signature.
inline UtteranceRecord generate_utterance(const CorpusSpec& spec, std::uint64_t index,
                                          Language lang, EmotionClass cls, Intensity inten) {
  if ((cls == EmotionClass::kNeutral) != (inten == Intensity::kNone))
    throw std::invalid_argument("generate_utterance: neutral <=> intensity none");
  const std::uint64_t utt_seed = Rng::mix(spec.seed, index + 1);
  Rng content(Rng::mix(utt_seed, 1));
  Rng noise(Rng::mix(utt_seed, 2));
  Rng phase_rng(Rng::mix(utt_seed, 3));

  UtteranceRecord rec;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%05llu", lang == Language::kA ? "a" : "b",
                  static_cast<unsigned long long>(index));
    rec.id = buf;
  }
  rec.language = lang;
  rec.emotion_class = cls;
  rec.intensity = inten;

  const std::size_t T = spec.t_min + content.below(spec.t_max - spec.t_min + 1);
  const std::size_t F = spec.feature_dim;

  // phoneme segments: each phoneme held 3..8 frames
  rec.phoneme_ids.reserve(T);
  const std::size_t offset = spec.phoneme_offset(lang);
  while (rec.phoneme_ids.size() < T) {
    std::size_t hold = 3 + content.below(6);
    std::size_t id = offset + content.below(spec.phoneme_vocab);
    for (std::size_t j = 0; j < hold && rec.phoneme_ids.size() < T; ++j)
      rec.phoneme_ids.push_back(id);
  }

  rec.features = Tensor({T, F});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < F; ++b) rec.features.data[t * F + b] = spec.base_floor;

  // phoneme bumps in the content bands
  auto [c0, c1] = spec.content_bands();
  for (std::size_t t = 0; t < T; ++t) {
    detail::PhonemeBump p = detail::phoneme_bump(spec, rec.phoneme_ids[t]);
    for (std::size_t b = c0; b < c1; ++b) {
      double d = (static_cast<double>(b) - p.center) / p.sigma;
      rec.features.at(t, b) += p.amp * std::exp(-0.5 * d * d);
    }
  }

  // additive emotion signature in the designated bands
  const double envelope_phase = phase_rng.uniform(0.0, 2.0 * M_PI);
  if (cls != EmotionClass::kNeutral) {
    auto [e0, e1] = spec.emotion_bands(cls);
    const double gain = spec.signature_gain * intensity_level(inten);
    const double width = static_cast<double>(e1 - e0);
    for (std::size_t t = 0; t < T; ++t) {
      double env =
          0.5 * (1.0 + std::sin(2.0 * M_PI * static_cast<double>(t) / kSignaturePeriod +
                                envelope_phase));
      for (std::size_t b = e0; b < e1; ++b) {
        double u = (static_cast<double>(b - e0) + 0.5) / width;
        double profile = 0.5 * (1.0 - std::cos(2.0 * M_PI * u));  // raised cosine, mean 0.5
        rec.features.at(t, b) += gain * env * profile;
      }
    }
  }

  // bounded i.i.d. noise, drawn for every cell regardless of class
  for (double& v : rec.features.data)
    v = detail::to_f32(v + noise.uniform(-spec.noise_level, spec.noise_level));

  rec.oracle_embedding = oracle_embedding(cls, inten, Rng::mix(utt_seed, 4),
                                          spec.embedding_jitter);
  return rec;
}

/// 25% low / 50% medium / 25% high split of n emotional utterances.
inline std::array<std::size_t, 3> intensity_split(std::size_t n) {
  std::size_t low = (n + 2) / 4;   // round(n/4)
  std::size_t high = (n + 2) / 4;
  if (low + high > n) high = n - low;
  return {low, n - low - high, high};
}

inline std::vector<UtteranceRecord> generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<UtteranceRecord> corpus;
  std::uint64_t index = 0;
  auto emit = [&](Language lang, EmotionClass cls, Intensity inten, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k)
      corpus.push_back(generate_utterance(spec, index++, lang, cls, inten));
  };
  for (Language lang : {Language::kA, Language::kB}) {
    const std::size_t n_neutral = lang == Language::kA ? spec.neutral_a : spec.neutral_b;
    const std::size_t n_emotional = lang == Language::kA ? spec.emotional_a : spec.emotional_b;
    emit(lang, EmotionClass::kNeutral, Intensity::kNone, n_neutral);
    const std::size_t per_emotion = n_emotional / 2;
    for (EmotionClass cls : {EmotionClass::kExcited, EmotionClass::kDisappointed}) {
      std::size_t n = cls == EmotionClass::kExcited ? per_emotion : n_emotional - per_emotion;
      auto split = intensity_split(n);
      emit(lang, cls, Intensity::kLow, split[0]);
      emit(lang, cls, Intensity::kMedium, split[1]);
      emit(lang, cls, Intensity::kHigh, split[2]);
    }
  }
  return corpus;
}

/// Per-fine-label utterance counts.
inline std::vector<std::size_t> fine_label_counts(const std::vector<UtteranceRecord>& corpus) {
  std::vector<std::size_t> counts(kNumFineLabels, 0);
  for (const auto& r : corpus) ++counts[fine_label_index(r.emotion_class, r.intensity)];
  return counts;
}

inline std::size_t label_index(EmotionClass c, Intensity i, bool coarse) {
  return coarse ? coarse_label_index(c) : fine_label_index(c, i);
}

inline std::string label_name(std::size_t index, bool coarse) {
  if (coarse) {
    const char* names[] = {"neutral", "excited", "disappointed"};
    if (index >= kNumCoarseLabels) throw std::invalid_argument("bad coarse label index");
    return names[index];
  }
  auto labels = all_fine_labels();
  if (index >= labels.size()) throw std::invalid_argument("bad fine label index");
  return label_key(labels[index].first, labels[index].second);
}

inline std::vector<std::size_t> label_counts(const std::vector<UtteranceRecord>& corpus,
                                             bool coarse) {
  std::vector<std::size_t> counts(coarse ? kNumCoarseLabels : kNumFineLabels, 0);
  for (const auto& r : corpus) ++counts[label_index(r.emotion_class, r.intensity, coarse)];
  return counts;
}

/// Splits off n_holdout language-B neutral utterances (corpus order) as the
/// held-out test set; returns (train indices, holdout indices).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_holdout(
    const std::vector<UtteranceRecord>& corpus, std::size_t n_holdout) {
  std::vector<std::size_t> train, holdout;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& r = corpus[i];
    if (holdout.size() < n_holdout && r.language == Language::kB &&
        r.emotion_class == EmotionClass::kNeutral) {
      holdout.push_back(i);
    } else {
      train.push_back(i);
    }
  }
  if (holdout.size() < n_holdout)
    throw std::runtime_error("split_holdout: corpus has only " +
                             std::to_string(holdout.size()) + " language-B neutral utterances, " +
                             std::to_string(n_holdout) + " requested");
  return {train, holdout};
}

// ---- feature file I/O -----------------------------------------------------------

// Format: magic "EMF1", u32-LE T, u32-LE F, then T*F float32-LE row-major.

inline void write_features(const std::string& path, const Tensor& features) {
  if (features.rank() != 2)
    throw std::invalid_argument("write_features: expected [T,F], got " + features.shape_str());
  const std::size_t T = features.shape[0], F = features.shape[1];
  if (T == 0 || F == 0)
    throw std::invalid_argument("write_features: empty tensor " + features.shape_str() +
                                " rejected (need T >= 1, F >= 1)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_features: cannot open '" + path + "'");
  out.write("EMF1", 4);
  std::uint32_t dims[2] = {static_cast<std::uint32_t>(T), static_cast<std::uint32_t>(F)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<float> row(F);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < F; ++b) row[b] = static_cast<float>(features.data[t * F + b]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(F * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write_features: write failed for '" + path + "'");
}

inline Tensor read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_features: cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != "EMF1")
    throw std::runtime_error("read_features: '" + path + "' has bad magic (expected EMF1)");
  std::uint32_t dims[2];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (in.gcount() != sizeof(dims))
    throw std::runtime_error("read_features: '" + path + "' truncated header");
  const std::size_t T = dims[0], F = dims[1];
  if (T == 0 || F == 0)
    throw std::runtime_error("read_features: '" + path + "' declares empty shape [" +
                             std::to_string(T) + "," + std::to_string(F) + "]");
  std::vector<float> buf(T * F);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  const std::size_t got = static_cast<std::size_t>(in.gcount());
  if (got != buf.size() * 4)
    throw std::runtime_error("read_features: '" + path + "' truncated: expected " +
                             std::to_string(buf.size() * 4) + " bytes of feature data, got " +
                             std::to_string(got));
  Tensor t({T, F});
  for (std::size_t i = 0; i < buf.size(); ++i) t.data[i] = static_cast<double>(buf[i]);
  return t;
}

// ---- corpus directory I/O ---------------------------------------------------------

/// Writes features/<id>.emf per record, manifest.jsonl (one JSON object per
/// record) and summary.json (class-count bookkeeping plus warnings).
inline void save_corpus(const std::vector<UtteranceRecord>& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "features");
  std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("save_corpus: cannot open manifest in '" + dir + "'");
  for (const auto& r : corpus) {
    std::string rel = "features/" + r.id + ".emf";
    write_features((fs::path(dir) / rel).string(), r.features);
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["language"] = to_string(r.language);
    j["emotion_class"] = to_string(r.emotion_class);
    j["intensity"] = to_string(r.intensity);
    j["features"] = rel;
    j["phoneme_ids"] = r.phoneme_ids;
    j["embedding"] = r.oracle_embedding.data;
    manifest << j.dump() << "\n";
  }
  nlohmann::ordered_json summary;
  summary["utterances"] = corpus.size();
  nlohmann::ordered_json counts;
  auto fine = fine_label_counts(corpus);
  auto labels = all_fine_labels();
  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    std::string key = label_key(labels[k].first, labels[k].second);
    counts[key] = fine[k];
    if (fine[k] == 0) warnings.push_back("class " + key + " has zero utterances");
  }
  summary["class_counts"] = counts;
  summary["warnings"] = warnings;
  std::ofstream sf(fs::path(dir) / "summary.json");
  sf << summary.dump(2) << "\n";
}

inline std::vector<UtteranceRecord> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest)
    throw std::runtime_error("load_corpus: cannot open '" +
                             (fs::path(dir) / "manifest.jsonl").string() + "'");
  std::vector<UtteranceRecord> corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("load_corpus: manifest line " + std::to_string(lineno) + ": " +
                               e.what());
    }
    UtteranceRecord r;
    r.id = j.at("id").get<std::string>();
    r.language = language_from_string(j.at("language").get<std::string>());
    r.emotion_class = emotion_class_from_string(j.at("emotion_class").get<std::string>());
    r.intensity = intensity_from_string(j.at("intensity").get<std::string>());
    r.features = read_features((fs::path(dir) / j.at("features").get<std::string>()).string());
    r.phoneme_ids = j.at("phoneme_ids").get<std::vector<std::size_t>>();
    std::vector<double> emb = j.at("embedding").get<std::vector<double>>();
    if (emb.size() != kEmotionEmbeddingDim)
      throw std::runtime_error("load_corpus: utterance " + r.id + " has embedding of length " +
                               std::to_string(emb.size()));
    r.oracle_embedding = Tensor({kEmotionEmbeddingDim}, std::move(emb));
    corpus.push_back(std::move(r));
  }
  return corpus;
}

/// Manifest entry lookup by feature file name, for `convert` on a bare .emf.
/// Scans manifest.jsonl next to the file and one directory up.
inline UtteranceRecord find_record_for_feature_file(const std::string& feature_path) {
  namespace fs = std::filesystem;
  fs::path p = fs::absolute(feature_path);
  for (fs::path dir : {p.parent_path(), p.parent_path().parent_path()}) {
    if (dir.empty() || !fs::exists(dir / "manifest.jsonl")) continue;
    std::ifstream manifest(dir / "manifest.jsonl");
    std::string line;
    while (std::getline(manifest, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      if (fs::path(j.at("features").get<std::string>()).filename() != p.filename()) continue;
      UtteranceRecord r;
      r.id = j.at("id").get<std::string>();
      r.language = language_from_string(j.at("language").get<std::string>());
      r.emotion_class = emotion_class_from_string(j.at("emotion_class").get<std::string>());
      r.intensity = intensity_from_string(j.at("intensity").get<std::string>());
      r.features = read_features(p.string());
      r.phoneme_ids = j.at("phoneme_ids").get<std::vector<std::size_t>>();
      std::vector<double> emb = j.at("embedding").get<std::vector<double>>();
      r.oracle_embedding = Tensor({kEmotionEmbeddingDim}, std::move(emb));
      return r;
    }
  }
  throw std::runtime_error("no manifest entry found for '" + feature_path +
                           "' (searched manifest.jsonl next to the file and one level up)");
}

}  // namespace emocat

#endif  // EMOCAT_CORPUS_HPP_
