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

#ifndef EMOCAT_EVAL_HPP_
#define EMOCAT_EVAL_HPP_

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "emocat/corpus.hpp"
#include "emocat/detector.hpp"
#include "emocat/net.hpp"
#include "emocat/probe.hpp"
#include "emocat/train.hpp"

namespace emocat {

struct TargetEval {
  std::string target;
  EmotionClass emotion = EmotionClass::kNeutral;
  Intensity intensity = Intensity::kNone;
  double detector_accuracy = 0.0;  // fraction classified as the target emotion
  double mean_intensity = 0.0;     // target-band score in units of the low gain
  double mean_l1_to_source = 0.0;
};

struct ConversionReport {
  std::vector<TargetEval> targets;       // neutral first, then the 6 emotional targets
  double medium_high_accuracy = 0.0;     // pooled over medium+high targets
  bool intensity_ordering_ok = false;    // low < medium < high per emotion

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& t : targets) {
      nlohmann::ordered_json row;
      row["target"] = t.target;
      row["detector_accuracy"] = t.detector_accuracy;
      row["mean_intensity"] = t.mean_intensity;
      row["mean_l1_to_source"] = t.mean_l1_to_source;
      rows.push_back(row);
    }
    j["targets"] = rows;
    j["medium_high_accuracy"] = medium_high_accuracy;
    j["intensity_ordering_ok"] = intensity_ordering_ok;
    return j;
  }
};

/// Converts every held-out neutral utterance to each of the six emotional
/// targets (and back to neutral) and scores the outputs with the analytic
/// detector.
inline ConversionReport eval_conversion(ModelState& state,
                                        const std::vector<UtteranceRecord>& corpus,
                                        const std::vector<std::size_t>& holdout_idx,
                                        const CorpusSpec& spec) {
  if (holdout_idx.empty()) throw std::invalid_argument("eval_conversion: empty holdout set");
  ConversionReport rep;
  const double expected_low = spec.signature_gain * 0.25;

  std::vector<std::pair<EmotionClass, Intensity>> targets = {
      {EmotionClass::kNeutral, Intensity::kNone}};
  for (auto& t : conversion_targets()) targets.push_back(t);

  for (auto& [cls, inten] : targets) {
    TargetEval te;
    te.target = label_key(cls, inten);
    te.emotion = cls;
    te.intensity = inten;
    double hits = 0.0, int_sum = 0.0, l1_sum = 0.0;
    for (std::size_t i : holdout_idx) {
      const UtteranceRecord& rec = corpus[i];
      Tensor out = convert(state, rec, cls, inten);
      DetectorReport det = detect_emotion(out, spec);
      if (det.emotion == cls) hits += 1.0;
      if (cls != EmotionClass::kNeutral) {
        auto bands = spec.emotion_bands(cls);
        double score = detail::band_mean(out, bands.first, bands.second) - spec.base_floor;
        int_sum += score / expected_low;
      }
      double l1 = 0.0;
      for (std::size_t k = 0; k < out.data.size(); ++k)
        l1 += std::fabs(out.data[k] - rec.features.data[k]);
      l1_sum += l1 / static_cast<double>(out.data.size());
    }
    const double n = static_cast<double>(holdout_idx.size());
    te.detector_accuracy = hits / n;
    te.mean_intensity = cls == EmotionClass::kNeutral ? 0.0 : int_sum / n;
    te.mean_l1_to_source = l1_sum / n;
    rep.targets.push_back(te);
  }

  double mh_hits = 0.0, mh_total = 0.0;
  for (const auto& t : rep.targets) {
    if (t.intensity == Intensity::kMedium || t.intensity == Intensity::kHigh) {
      mh_hits += t.detector_accuracy;
      mh_total += 1.0;
    }
  }
  rep.medium_high_accuracy = mh_total > 0.0 ? mh_hits / mh_total : 0.0;

  auto mean_of = [&](EmotionClass c, Intensity i) {
    for (const auto& t : rep.targets)
      if (t.emotion == c && t.intensity == i) return t.mean_intensity;
    return 0.0;
  };
  rep.intensity_ordering_ok = true;
  for (EmotionClass c : {EmotionClass::kExcited, EmotionClass::kDisappointed}) {
    double lo = mean_of(c, Intensity::kLow);
    double mid = mean_of(c, Intensity::kMedium);
    double hi = mean_of(c, Intensity::kHigh);
    if (!(lo < mid && mid < hi)) rep.intensity_ordering_ok = false;
  }
  return rep;
}

// ---- ablation harness ----------------------------------------------------------

struct SystemResult {
  std::string name;
  ModelState state;
  std::vector<StepMetrics> metrics;
  ProbeReport probe;
  ConversionReport conversion;
  double holdout_l1 = 0.0;
  bool diverged = false;
};

namespace detail {

inline SystemResult evaluate_system(std::string name, TrainOutcome outcome,
                                    const std::vector<UtteranceRecord>& corpus,
                                    const std::vector<std::size_t>& holdout_idx,
                                    const CorpusSpec& spec, const ProbePlan& probe_plan) {
  SystemResult res;
  res.name = std::move(name);
  res.metrics = std::move(outcome.metrics);
  res.state = std::move(outcome.state);
  res.diverged = outcome.diverged;
  res.probe = probe_leakage(*res.state.model, corpus, ClassifierKind::kGru, probe_plan);
  res.conversion = eval_conversion(res.state, corpus, holdout_idx, spec);
  res.holdout_l1 = auto_encode_l1(*res.state.model, corpus, holdout_idx);
  return res;
}

}  // namespace detail

/// Runs the three ablation systems: vanilla gradient reversal with weighted
/// cross entropy, the gradient inverter, and the inverter fine-tuned on the
/// target language's emotional subset. The inverter kind comes from the base
/// config (falling back to inv-sq if the base transform is not an inverter).
/// The reversal system runs on its own thread.
inline std::vector<SystemResult> run_ablation(const EmoCatConfig& base_cfg, const TrainPlan& plan,
                                              const std::vector<UtteranceRecord>& corpus,
                                              const CorpusSpec& spec,
                                              const ProbePlan& probe_plan) {
  auto [train_idx, holdout_idx] = split_holdout(corpus, plan.holdout_neutral);
  (void)train_idx;

  EmoCatConfig reversal_cfg = base_cfg;
  reversal_cfg.grad_transform.kind = TransformKind::kReversal;
  reversal_cfg.weighted_adv_ce = true;

  EmoCatConfig inverter_cfg = base_cfg;
  if (inverter_cfg.grad_transform.kind != TransformKind::kInvSquareNorm &&
      inverter_cfg.grad_transform.kind != TransformKind::kInvExpSquareNorm)
    inverter_cfg.grad_transform.kind = TransformKind::kInvSquareNorm;
  inverter_cfg.weighted_adv_ce = false;

  std::vector<SystemResult> results(3);
  std::exception_ptr thread_error;

  std::thread reversal_thread([&]() {
    try {
      results[0] = detail::evaluate_system("reversal", train(reversal_cfg, plan, corpus), corpus,
                                           holdout_idx, spec, probe_plan);
    } catch (...) {
      thread_error = std::current_exception();
    }
  });

  TrainOutcome inverter_out = train(inverter_cfg, plan, corpus);

  // fine-tuned variant continues from a copy of the inverter parameters
  ModelState ft_state;
  ft_state.model = std::make_unique<EmoCat>(inverter_cfg, plan.seed);
  ft_state.model->set_param_values(inverter_out.state.model->param_values());
  ft_state.centroids = inverter_out.state.centroids;
  ft_state.step = inverter_out.state.step;

  results[1] = detail::evaluate_system("inverter", std::move(inverter_out), corpus, holdout_idx,
                                       spec, probe_plan);
  results[2] = detail::evaluate_system("inverter-fine-tuned",
                                       fine_tune(std::move(ft_state), plan, corpus), corpus,
                                       holdout_idx, spec, probe_plan);
  reversal_thread.join();
  if (thread_error) std::rethrow_exception(thread_error);
  return results;
}

inline std::string ablation_table(const std::vector<SystemResult>& results) {
  std::ostringstream os;
  os << "| system | probe acc | majority baseline | majority pred rate | held-out L1 | "
        "med/high conv acc | intensity ordering |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : results) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "| %s | %.3f | %.3f | %.3f | %.4f | %.3f | %s |\n",
                  r.name.c_str(), r.probe.accuracy, r.probe.majority_class_baseline,
                  r.probe.majority_prediction_rate, r.holdout_l1,
                  r.conversion.medium_high_accuracy,
                  r.conversion.intensity_ordering_ok ? "ok" : "violated");
    os << buf;
  }
  return os.str();
}

inline nlohmann::ordered_json ablation_json(const std::vector<SystemResult>& results) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json row;
    row["system"] = r.name;
    row["diverged"] = r.diverged;
    row["steps"] = r.state.step;
    row["probe"] = r.probe.to_json();
    row["conversion"] = r.conversion.to_json();
    row["holdout_l1"] = r.holdout_l1;
    j.push_back(row);
  }
  return j;
}

}  // namespace emocat

#endif  // EMOCAT_EVAL_HPP_
