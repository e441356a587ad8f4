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

#ifndef EMOCAT_DETECTOR_HPP_
#define EMOCAT_DETECTOR_HPP_

#include <string>

#include "emocat/corpus.hpp"
#include "emocat/tensor.hpp"

namespace emocat {

/// Objective stand-in for human intensity judgments: projects band energy
/// onto the known emotion signatures. The signature adds
/// gain * envelope(t) * profile(b) over the designated bands, with the
/// envelope and the raised-cosine profile each averaging 1/2, so the expected
/// mean excess energy per unit gain is 1/4.
struct DetectorReport {
  EmotionClass emotion = EmotionClass::kNeutral;
  double excited_score = 0.0;       // mean excess energy in the excited bands
  double disappointed_score = 0.0;  // mean excess energy in the disappointed bands
  double intensity = 0.0;           // estimated level: ~1 low, ~2 medium, ~3 high
};

namespace detail {

inline double band_mean(const Tensor& feats, std::size_t b0, std::size_t b1) {
  const std::size_t T = feats.shape[0], F = feats.shape[1];
  double s = 0.0;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = b0; b < b1; ++b) s += feats.data[t * F + b];
  return s / (static_cast<double>(T) * static_cast<double>(b1 - b0));
}

}  // namespace detail

inline DetectorReport detect_emotion(const Tensor& features, const CorpusSpec& spec) {
  if (features.rank() != 2 || features.shape[1] != spec.feature_dim)
    throw std::invalid_argument("detect_emotion: expected [T," +
                                std::to_string(spec.feature_dim) + "], got " +
                                features.shape_str());
  DetectorReport rep;
  auto exc = spec.emotion_bands(EmotionClass::kExcited);
  auto dis = spec.emotion_bands(EmotionClass::kDisappointed);
  rep.excited_score = detail::band_mean(features, exc.first, exc.second) - spec.base_floor;
  rep.disappointed_score = detail::band_mean(features, dis.first, dis.second) - spec.base_floor;

  const double per_unit_gain = 0.25;  // envelope mean * profile mean
  const double expected_low = spec.signature_gain * per_unit_gain;
  double best = std::max(rep.excited_score, rep.disappointed_score);
  if (best < 0.5 * expected_low) {
    rep.emotion = EmotionClass::kNeutral;
    rep.intensity = 0.0;
  } else {
    rep.emotion = rep.excited_score >= rep.disappointed_score ? EmotionClass::kExcited
                                                              : EmotionClass::kDisappointed;
    rep.intensity = best / expected_low;
  }
  return rep;
}

}  // namespace emocat

#endif  // EMOCAT_DETECTOR_HPP_
