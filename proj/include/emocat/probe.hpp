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

// Leakage probe: a fresh classifier trained from scratch on representations
// extracted from a frozen model, quantifying how much emotion information
// survives. Training uses the corpus's natural class imbalance; evaluation
// uses a class-balanced held-out split so the majority-class baseline stays
// near 1/num_classes and accuracy deltas are comparable across checkpoints.

#ifndef EMOCAT_PROBE_HPP_
#define EMOCAT_PROBE_HPP_

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emocat/corpus.hpp"
#include "emocat/layers.hpp"
#include "emocat/net.hpp"
#include "emocat/train.hpp"

namespace emocat {

struct ProbePlan {
  std::size_t steps = 2000;  // fixed budget so reports are comparable
  std::size_t batch_size = 8;
  double learning_rate = 3e-3;
  std::size_t hidden = 32;
  std::size_t eval_per_class = 8;
  std::uint64_t seed = 7;
  ClassifierKind kind = ClassifierKind::kGru;
};

struct ProbeReport {
  std::string probe_kind;
  std::size_t num_classes = 0;
  bool coarse_labels = false;
  std::size_t train_examples = 0;
  std::size_t eval_examples = 0;
  double accuracy = 0.0;
  double majority_class_baseline = 0.0;   // largest class prior of the eval set
  double majority_prediction_rate = 0.0;  // share of the most-predicted class
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["probe_kind"] = probe_kind;
    j["num_classes"] = num_classes;
    j["coarse_labels"] = coarse_labels;
    j["train_examples"] = train_examples;
    j["eval_examples"] = eval_examples;
    j["accuracy"] = accuracy;
    j["majority_class_baseline"] = majority_class_baseline;
    j["majority_prediction_rate"] = majority_prediction_rate;
    nlohmann::ordered_json conf = nlohmann::ordered_json::array();
    for (const auto& row : confusion) conf.push_back(row);
    j["confusion"] = conf;
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < num_classes; ++c) names.push_back(label_name(c, coarse_labels));
    j["class_names"] = names;
    return j;
  }
};

struct ProbeExample {
  Tensor sequence;  // [T, dim]
  std::size_t label = 0;
};

namespace detail {

class ProbeNet {
 public:
  ProbeNet(ClassifierKind kind, std::size_t input_dim, std::size_t hidden,
           std::size_t num_classes, Rng& rng)
      : kind_(kind) {
    if (kind_ == ClassifierKind::kFeedForward)
      hidden_layer_ = Dense("probe.hidden", input_dim, hidden, rng);
    else
      gru_ = GruCell("probe.gru", input_dim, hidden, rng);
    out_ = Dense("probe.out", hidden, num_classes, rng);
    if (kind_ == ClassifierKind::kFeedForward)
      hidden_layer_.collect(params_);
    else
      gru_.collect(params_);
    out_.collect(params_);
  }

  Var logits(Binder& bind, const Var& seq) {
    Var h = kind_ == ClassifierKind::kFeedForward
                ? tanh(hidden_layer_.apply(bind, mean_rows(seq)))
                : gru_.run_final(bind, seq);
    return out_.apply(bind, h);
  }

  std::size_t predict(const Tensor& seq) {
    Binder bind;
    const Tensor& l = logits(bind, Var::leaf(seq)).value();
    std::size_t best = 0;
    for (std::size_t c = 1; c < l.numel(); ++c)
      if (l.data[c] > l.data[best]) best = c;
    return best;
  }

  const std::vector<Param*>& params() const { return params_; }

 private:
  ClassifierKind kind_;
  Dense hidden_layer_;
  GruCell gru_;
  Dense out_;
  std::vector<Param*> params_;
};

}  // namespace detail

/// Trains a fresh probe on the examples and reports balanced held-out
/// accuracy, confusion, and prediction collapse.
inline ProbeReport run_probe(const std::vector<ProbeExample>& examples, std::size_t num_classes,
                             bool coarse_labels, const ProbePlan& plan) {
  if (examples.empty()) throw std::invalid_argument("run_probe: no examples");
  const std::size_t dim = examples[0].sequence.cols();
  Rng rng(Rng::mix(plan.seed, 0x9013E));

  // balanced eval split: per class, shuffle and reserve up to eval_per_class,
  // always leaving at least one training example
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].label >= num_classes)
      throw std::invalid_argument("run_probe: label out of range");
    by_class[examples[i].label].push_back(i);
  }
  std::vector<std::size_t> train_set, eval_set;
  for (auto& ids : by_class) {
    for (std::size_t k = 0; k + 1 < ids.size(); ++k) {
      std::size_t j = k + rng.below(ids.size() - k);
      std::swap(ids[k], ids[j]);
    }
    std::size_t n_eval = ids.size() > 1 ? std::min(plan.eval_per_class, ids.size() - 1) : 0;
    for (std::size_t k = 0; k < ids.size(); ++k)
      (k < n_eval ? eval_set : train_set).push_back(ids[k]);
  }
  if (train_set.empty() || eval_set.empty())
    throw std::invalid_argument("run_probe: split left an empty train or eval set");

  detail::ProbeNet net(plan.kind, dim, plan.hidden, num_classes, rng);
  Adam adam(net.params(), plan.learning_rate);
  for (std::size_t s = 0; s < plan.steps; ++s) {
    Binder bind;
    Var loss;
    for (std::size_t b = 0; b < plan.batch_size; ++b) {
      const ProbeExample& ex = examples[train_set[rng.below(train_set.size())]];
      Var ce = cross_entropy(net.logits(bind, Var::leaf(ex.sequence)), ex.label);
      loss = b == 0 ? ce : add(loss, ce);
    }
    loss = scale(loss, 1.0 / static_cast<double>(plan.batch_size));
    if (!std::isfinite(loss.value().item()))
      throw std::runtime_error("run_probe: probe training diverged at step " +
                               std::to_string(s + 1));
    backward(loss);
    std::vector<Tensor> grads;
    for (Param* p : net.params()) grads.push_back(bind.grad_of(*p));
    adam.step(net.params(), grads);
  }

  ProbeReport rep;
  rep.probe_kind = to_string(plan.kind);
  rep.num_classes = num_classes;
  rep.coarse_labels = coarse_labels;
  rep.train_examples = train_set.size();
  rep.eval_examples = eval_set.size();
  rep.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::vector<std::size_t> true_counts(num_classes, 0), pred_counts(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i : eval_set) {
    const ProbeExample& ex = examples[i];
    std::size_t pred = net.predict(ex.sequence);
    ++rep.confusion[ex.label][pred];
    ++true_counts[ex.label];
    ++pred_counts[pred];
    if (pred == ex.label) ++correct;
  }
  const double n_eval = static_cast<double>(eval_set.size());
  rep.accuracy = static_cast<double>(correct) / n_eval;
  rep.majority_class_baseline =
      static_cast<double>(*std::max_element(true_counts.begin(), true_counts.end())) / n_eval;
  rep.majority_prediction_rate =
      static_cast<double>(*std::max_element(pred_counts.begin(), pred_counts.end())) / n_eval;
  return rep;
}

/// Probe on the frozen model's bottleneck embeddings. Does not mutate the
/// model; only forward passes run.
inline ProbeReport probe_leakage(EmoCat& model, const std::vector<UtteranceRecord>& corpus,
                                 ClassifierKind kind, ProbePlan plan) {
  plan.kind = kind;
  const bool coarse = model.config().coarse_labels;
  std::vector<ProbeExample> examples;
  examples.reserve(corpus.size());
  for (const auto& r : corpus) {
    ProbeExample ex;
    ex.sequence = model.extract_bottleneck(r);
    ex.label = label_index(r.emotion_class, r.intensity, coarse);
    examples.push_back(std::move(ex));
  }
  return run_probe(examples, model.config().num_classes(), coarse, plan);
}

/// Upper-bound probe on the raw features (encoder bypassed).
inline ProbeReport probe_raw_features(const std::vector<UtteranceRecord>& corpus,
                                      bool coarse_labels, ClassifierKind kind, ProbePlan plan) {
  plan.kind = kind;
  std::vector<ProbeExample> examples;
  examples.reserve(corpus.size());
  for (const auto& r : corpus) {
    ProbeExample ex;
    ex.sequence = r.features;
    ex.label = label_index(r.emotion_class, r.intensity, coarse_labels);
    examples.push_back(std::move(ex));
  }
  return run_probe(examples, coarse_labels ? kNumCoarseLabels : kNumFineLabels, coarse_labels,
                   plan);
}

}  // namespace emocat

#endif  // EMOCAT_PROBE_HPP_
