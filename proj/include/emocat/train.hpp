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

#ifndef EMOCAT_TRAIN_HPP_
#define EMOCAT_TRAIN_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emocat/corpus.hpp"
#include "emocat/layers.hpp"
#include "emocat/net.hpp"
#include "emocat/rng.hpp"

namespace emocat {

struct TrainPlan {
  std::size_t main_steps = 5000;
  std::size_t fine_tune_steps = 100;  // 2% of the main stage
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  std::size_t holdout_neutral = 20;   // language-B neutral test utterances
  Language fine_tune_language = Language::kB;
  std::uint64_t seed = 7;

  void validate() const {
    if (batch_size == 0) throw std::invalid_argument("TrainPlan: batch_size must be > 0");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("TrainPlan: learning_rate must be > 0");
    if (optimizer != "adam")
      throw std::invalid_argument("TrainPlan: unknown optimizer '" + optimizer + "'");
  }
};

/// Adaptive moment estimation over a fixed parameter list.
class Adam {
 public:
  Adam(const std::vector<Param*>& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Param* p : params) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  void step(const std::vector<Param*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("Adam::step: parameter list changed size");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& value = params[i]->value;
      const Tensor& g = grads[i];
      if (!g.same_shape(value))
        throw std::invalid_argument("Adam::step: gradient shape mismatch at " + params[i]->name);
      for (std::size_t j = 0; j < value.data.size(); ++j) {
        double gj = g.data[j];
        m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * gj;
        v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * gj * gj;
        double mhat = m_[i].data[j] / bc1;
        double vhat = v_[i].data[j] / bc2;
        value.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  std::uint64_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct StepMetrics {
  std::size_t step = 0;
  double l1 = 0.0, kl = 0.0, adv_ce = 0.0, total = 0.0;
};

inline const char* kMetricsCsvHeader = "step,l1,kl,adv_ce,total";

inline void write_metrics_row(std::ostream& os, const StepMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g", m.step, m.l1, m.kl, m.adv_ce,
                m.total);
  os << buf << "\n";
}

struct TrainOutcome {
  ModelState state;
  std::vector<StepMetrics> metrics;
  bool diverged = false;
  std::size_t diverged_at_step = 0;
};

using StepCallback = std::function<void(const StepMetrics&)>;

/// Mean auto-encoding L1 over a record set (noise off).
inline double auto_encode_l1(EmoCat& model, const std::vector<UtteranceRecord>& corpus,
                             const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("auto_encode_l1: empty index set");
  double sum = 0.0;
  for (std::size_t i : indices) {
    const UtteranceRecord& r = corpus[i];
    Tensor recon = model.reconstruct(r);
    double s = 0.0;
    for (std::size_t j = 0; j < recon.data.size(); ++j)
      s += std::fabs(recon.data[j] - r.features.data[j]);
    sum += s / static_cast<double>(recon.data.size());
  }
  return sum / static_cast<double>(indices.size());
}

namespace detail {

/// Runs `steps` optimization steps over batches drawn by `next_index`.
/// Appends one metrics row per step. Returns false (and restores the last
/// good parameters) on divergence.
inline bool run_steps(EmoCat& model, Adam& adam, const std::vector<UtteranceRecord>& corpus,
                      const std::function<std::size_t()>& next_index, std::size_t steps,
                      std::size_t batch_size, std::size_t step_offset, std::size_t beta_warmup,
                      const std::vector<double>& adv_weights, Rng& noise_rng,
                      std::vector<StepMetrics>& metrics, std::size_t* diverged_at,
                      const std::function<void(const StepMetrics&)>& on_step) {
  const EmoCatConfig& cfg = model.config();
  std::vector<Tensor> last_good = model.param_values();
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t global_step = step_offset + s;
    // lambda ramp (optional) and KL warmup are functions of the global step
    GradTransformSpec transform = cfg.grad_transform;
    if (cfg.lambda_warmup_steps > 0) {
      double ramp = std::min(1.0, static_cast<double>(global_step + 1) /
                                      static_cast<double>(cfg.lambda_warmup_steps));
      transform.lambda *= ramp;
      if (transform.lambda <= 0.0) transform.kind = TransformKind::kIdentity;
    }
    double beta_scale =
        beta_warmup > 0 ? std::min(1.0, static_cast<double>(global_step + 1) /
                                            static_cast<double>(beta_warmup))
                        : 1.0;

    Binder bind;
    Var l1_sum, kl_sum, ce_sum;
    for (std::size_t b = 0; b < batch_size; ++b) {
      const UtteranceRecord& rec = corpus[next_index()];
      TrainLosses losses = model.forward_train(bind, rec, &noise_rng, transform, adv_weights);
      l1_sum = b == 0 ? losses.l1 : add(l1_sum, losses.l1);
      kl_sum = b == 0 ? losses.kl : add(kl_sum, losses.kl);
      ce_sum = b == 0 ? losses.adv_ce : add(ce_sum, losses.adv_ce);
    }
    const double inv_b = 1.0 / static_cast<double>(batch_size);
    Var l1 = scale(l1_sum, inv_b);
    Var kl = scale(kl_sum, inv_b);
    Var ce = scale(ce_sum, inv_b);
    Var total = add(add(l1, scale(kl, cfg.kl_beta * beta_scale)), ce);

    StepMetrics m;
    m.step = global_step + 1;
    m.l1 = l1.value().item();
    m.kl = kl.value().item();
    m.adv_ce = ce.value().item();
    m.total = total.value().item();

    if (!std::isfinite(m.total)) {
      model.set_param_values(last_good);
      if (diverged_at) *diverged_at = m.step;
      return false;
    }

    backward(total);
    last_good = model.param_values();

    std::vector<Tensor> grads;
    grads.reserve(model.params().size());
    for (Param* p : model.params()) grads.push_back(bind.grad_of(*p));
    adam.step(model.params(), grads);
    metrics.push_back(m);
    if (on_step) on_step(m);
  }
  return true;
}

}  // namespace detail

/// Main training stage: auto-encoding over the train split (the language-B
/// neutral holdout is excluded), centroids computed over the train split.
inline TrainOutcome train(const EmoCatConfig& cfg, const TrainPlan& plan,
                          const std::vector<UtteranceRecord>& corpus,
                          const StepCallback& on_step = {}) {
  cfg.validate();
  plan.validate();
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  auto [train_idx, holdout_idx] = split_holdout(corpus, plan.holdout_neutral);
  (void)holdout_idx;

  TrainOutcome out;
  out.state.model = std::make_unique<EmoCat>(cfg, plan.seed);
  Adam adam(out.state.model->params(), plan.learning_rate);
  Rng sample_rng(Rng::mix(plan.seed, 0xA11CE));
  Rng noise_rng(Rng::mix(plan.seed, 0xB0B));

  std::vector<UtteranceRecord> train_records;
  train_records.reserve(train_idx.size());
  for (std::size_t i : train_idx) train_records.push_back(corpus[i]);
  std::vector<double> adv_weights;
  if (cfg.weighted_adv_ce)
    adv_weights = class_weights(label_counts(train_records, cfg.coarse_labels));

  auto next_index = [&]() { return train_idx[sample_rng.below(train_idx.size())]; };
  const std::size_t beta_warmup = std::max<std::size_t>(1, plan.main_steps / 10);
  std::size_t diverged_at = 0;
  bool ok = detail::run_steps(*out.state.model, adam, corpus, next_index, plan.main_steps,
                              plan.batch_size, 0, beta_warmup, adv_weights, noise_rng,
                              out.metrics, &diverged_at, on_step);
  out.state.centroids = compute_centroids(train_records);
  out.state.step = ok ? plan.main_steps : diverged_at;
  out.diverged = !ok;
  out.diverged_at_step = diverged_at;
  return out;
}

/// Fine-tuning subset for one epoch: all emotional utterances of the target
/// language plus an equally sized sample of that language's neutral
/// utterances, the neutral part resampled each epoch.
inline std::vector<std::size_t> fine_tune_pool(const std::vector<UtteranceRecord>& corpus,
                                               const std::vector<std::size_t>& train_idx,
                                               Language target, Rng& rng) {
  std::vector<std::size_t> emotional, neutral;
  for (std::size_t i : train_idx) {
    const auto& r = corpus[i];
    if (r.language != target) continue;
    (r.emotion_class == EmotionClass::kNeutral ? neutral : emotional).push_back(i);
  }
  if (emotional.empty())
    throw std::runtime_error("fine_tune: no emotional utterances in the target language");
  if (neutral.size() < emotional.size())
    throw std::runtime_error("fine_tune: fewer neutral than emotional utterances available");
  // sample an equal count of neutral without replacement
  std::vector<std::size_t> pool = emotional;
  std::vector<std::size_t> bag = neutral;
  for (std::size_t k = 0; k < emotional.size(); ++k) {
    std::size_t j = k + rng.below(bag.size() - k);
    std::swap(bag[k], bag[j]);
    pool.push_back(bag[k]);
  }
  // shuffle the combined pool
  for (std::size_t k = 0; k + 1 < pool.size(); ++k) {
    std::size_t j = k + rng.below(pool.size() - k);
    std::swap(pool[k], pool[j]);
  }
  return pool;
}

/// Continues training on the fine-tune subset with unchanged hyper-parameters,
/// then recomputes centroids. fine_tune_steps == 0 leaves the parameters
/// untouched (only the step counter advances by zero).
inline TrainOutcome fine_tune(ModelState state, const TrainPlan& plan,
                              const std::vector<UtteranceRecord>& corpus,
                              const StepCallback& on_step = {}) {
  plan.validate();
  if (!state.model) throw std::invalid_argument("fine_tune: empty model state");
  auto [train_idx, holdout_idx] = split_holdout(corpus, plan.holdout_neutral);
  (void)holdout_idx;

  TrainOutcome out;
  out.state = std::move(state);
  if (plan.fine_tune_steps == 0) return out;

  Adam adam(out.state.model->params(), plan.learning_rate);
  Rng sample_rng(Rng::mix(plan.seed, 0xF17E));
  Rng noise_rng(Rng::mix(plan.seed, 0xF0B));

  std::vector<std::size_t> pool;
  std::size_t cursor = 0;
  auto next_index = [&]() {
    if (cursor >= pool.size()) {
      pool = fine_tune_pool(corpus, train_idx, plan.fine_tune_language, sample_rng);
      cursor = 0;
    }
    return pool[cursor++];
  };

  std::vector<UtteranceRecord> train_records;
  train_records.reserve(train_idx.size());
  for (std::size_t i : train_idx) train_records.push_back(corpus[i]);
  const EmoCatConfig& cfg = out.state.model->config();
  std::vector<double> adv_weights;
  if (cfg.weighted_adv_ce)
    adv_weights = class_weights(label_counts(train_records, cfg.coarse_labels));

  std::size_t diverged_at = 0;
  bool ok = detail::run_steps(*out.state.model, adam, corpus, next_index, plan.fine_tune_steps,
                              plan.batch_size, out.state.step, /*beta_warmup=*/0, adv_weights,
                              noise_rng, out.metrics, &diverged_at, on_step);
  out.state.centroids = compute_centroids(train_records);
  out.state.step = ok ? out.state.step + plan.fine_tune_steps : diverged_at;
  out.diverged = !ok;
  out.diverged_at_step = diverged_at;
  return out;
}

}  // namespace emocat

#endif  // EMOCAT_TRAIN_HPP_
