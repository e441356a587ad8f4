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

#ifndef EMOCAT_LAYERS_HPP_
#define EMOCAT_LAYERS_HPP_

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emocat/autodiff.hpp"
#include "emocat/rng.hpp"
#include "emocat/tensor.hpp"

namespace emocat {

/// A named trainable tensor. Layers own their Params; the model keeps an
/// ordered registry of pointers for the optimizer and the checkpoint.
struct Param {
  std::string name;
  Tensor value;
};

/// Per-graph cache mapping a Param to its leaf Var, so that one training step
/// binds each parameter exactly once no matter how many ops consume it.
class Binder {
 public:
  Var operator()(Param& p) {
    auto it = cache_.find(&p);
    if (it != cache_.end()) return it->second;
    Var v = Var::leaf(p.value);
    cache_.emplace(&p, v);
    bound_.emplace_back(&p, v);
    return v;
  }

  /// Gradient of a parameter after backward; zeros if the parameter did not
  /// participate in the graph.
  Tensor grad_of(Param& p) const {
    auto it = cache_.find(&p);
    if (it == cache_.end() || !it->second.has_grad()) return Tensor(p.value.shape);
    return it->second.grad();
  }

  const std::vector<std::pair<Param*, Var>>& bound() const { return bound_; }

 private:
  std::unordered_map<Param*, Var> cache_;
  std::vector<std::pair<Param*, Var>> bound_;
};

namespace init {

/// Uniform in +-sqrt(1/fan_in); biases stay zero.
inline void uniform_fan_in(Tensor& w, std::size_t fan_in, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
}

}  // namespace init

// ---- layers -----------------------------------------------------------------

/// Affine map on rows: [T, in] -> [T, out].
struct Dense {
  Param weight;  // [in, out]
  Param bias;    // [out]

  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    weight.name = name + ".weight";
    weight.value = Tensor({in, out});
    init::uniform_fan_in(weight.value, in, rng);
    bias.name = name + ".bias";
    bias.value = Tensor({out});
  }

  Var apply(Binder& bind, const Var& x) {
    return add_rowvec(matmul(x, bind(weight)), bind(bias));
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

/// Same-padded 1-D convolution along the frame axis: [T, in] -> [T, out].
struct Conv1d {
  Param weight;  // [k, in, out]
  Param bias;    // [out]

  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t k, std::size_t in, std::size_t out, Rng& rng) {
    if (k % 2 == 0) throw std::invalid_argument(name + ": conv kernel width must be odd");
    weight.name = name + ".weight";
    weight.value = Tensor({k, in, out});
    init::uniform_fan_in(weight.value, k * in, rng);
    bias.name = name + ".bias";
    bias.value = Tensor({out});
  }

  Var apply(Binder& bind, const Var& x) { return conv1d(x, bind(weight), bind(bias)); }

  void collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

/// One LSTM step. State tensors are [1, hidden].
struct LstmCell {
  std::size_t input = 0, hidden = 0;
  Param weight;  // [in + hidden, 4 * hidden], gate order i, f, u, o
  Param bias;    // [4 * hidden]

  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t in, std::size_t h, Rng& rng)
      : input(in), hidden(h) {
    weight.name = name + ".weight";
    weight.value = Tensor({in + h, 4 * h});
    init::uniform_fan_in(weight.value, in + h, rng);
    bias.name = name + ".bias";
    bias.value = Tensor({4 * h});
  }

  struct State {
    Var h, c;
  };

  State zero_state() const {
    return {Var::leaf(Tensor({1, hidden})), Var::leaf(Tensor({1, hidden}))};
  }

  State step(Binder& bind, const Var& x, const State& s) {
    Var z = concat_cols(x, s.h);
    Var gates = add_rowvec(matmul(z, bind(weight)), bind(bias));
    Var i = sigmoid(slice_cols(gates, 0, hidden));
    Var f = sigmoid(slice_cols(gates, hidden, 2 * hidden));
    Var u = tanh(slice_cols(gates, 2 * hidden, 3 * hidden));
    Var o = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
    Var c = add(mul(f, s.c), mul(i, u));
    Var h = mul(o, tanh(c));
    return {h, c};
  }

  /// Runs the cell over all rows of x and stacks the hidden states: [T, hidden].
  Var run(Binder& bind, const Var& x) {
    const std::size_t T = x.value().rows();
    State s = zero_state();
    std::vector<Var> outs;
    outs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      s = step(bind, slice(x, t, t + 1), s);
      outs.push_back(s.h);
    }
    return concat_rows(outs);
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

/// One GRU step. State tensor is [1, hidden].
struct GruCell {
  std::size_t input = 0, hidden = 0;
  Param weight_zr;  // [in + hidden, 2 * hidden], gate order z, r
  Param bias_zr;    // [2 * hidden]
  Param weight_n;   // [in + hidden, hidden]
  Param bias_n;     // [hidden]

  GruCell() = default;
  GruCell(const std::string& name, std::size_t in, std::size_t h, Rng& rng)
      : input(in), hidden(h) {
    weight_zr.name = name + ".weight_zr";
    weight_zr.value = Tensor({in + h, 2 * h});
    init::uniform_fan_in(weight_zr.value, in + h, rng);
    bias_zr.name = name + ".bias_zr";
    bias_zr.value = Tensor({2 * h});
    weight_n.name = name + ".weight_n";
    weight_n.value = Tensor({in + h, h});
    init::uniform_fan_in(weight_n.value, in + h, rng);
    bias_n.name = name + ".bias_n";
    bias_n.value = Tensor({h});
  }

  Var zero_state() const { return Var::leaf(Tensor({1, hidden})); }

  Var step(Binder& bind, const Var& x, const Var& h) {
    Var zr = sigmoid(add_rowvec(matmul(concat_cols(x, h), bind(weight_zr)), bind(bias_zr)));
    Var z = slice_cols(zr, 0, hidden);
    Var r = slice_cols(zr, hidden, 2 * hidden);
    Var n = tanh(add_rowvec(matmul(concat_cols(x, mul(r, h)), bind(weight_n)), bind(bias_n)));
    // h' = (1 - z) * h + z * n
    Var one = Var::leaf(Tensor::full({1, hidden}, 1.0));
    return add(mul(sub(one, z), h), mul(z, n));
  }

  /// Final hidden state after consuming all rows of x: [1, hidden].
  Var run_final(Binder& bind, const Var& x) {
    const std::size_t T = x.value().rows();
    Var h = zero_state();
    for (std::size_t t = 0; t < T; ++t) h = step(bind, slice(x, t, t + 1), h);
    return h;
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&weight_zr);
    out.push_back(&bias_zr);
    out.push_back(&weight_n);
    out.push_back(&bias_n);
  }
};

/// Embedding table: ids -> [T, dim].
struct Embedding {
  Param table;  // [vocab, dim]

  Embedding() = default;
  Embedding(const std::string& name, std::size_t vocab, std::size_t dim, Rng& rng) {
    table.name = name + ".table";
    table.value = Tensor({vocab, dim});
    init::uniform_fan_in(table.value, dim, rng);
  }

  Var apply(Binder& bind, const std::vector<std::size_t>& ids) {
    return gather_rows(bind(table), ids);
  }

  void collect(std::vector<Param*>& out) { out.push_back(&table); }
};

// ---- VAE head ---------------------------------------------------------------

/// Per-frame diagonal-Gaussian latent with reparameterized sampling.
struct VaeLatent {
  Var mu;       // [T, d_z]
  Var log_var;  // [T, d_z]
  Var sample;   // [T, d_z]
};

struct VaeHead {
  Dense mu_layer, log_var_layer;

  VaeHead() = default;
  VaeHead(const std::string& name, std::size_t in, std::size_t d_z, Rng& rng)
      : mu_layer(name + ".mu", in, d_z, rng), log_var_layer(name + ".log_var", in, d_z, rng) {}

  /// With noise: sample = mu + exp(0.5 * log_var) * eps. Without (inference):
  /// sample = mu, so two passes are bitwise identical.
  VaeLatent apply(Binder& bind, const Var& x, Rng* noise_rng) {
    VaeLatent lat;
    lat.mu = mu_layer.apply(bind, x);
    lat.log_var = log_var_layer.apply(bind, x);
    if (noise_rng != nullptr) {
      Var eps = Var::leaf(noise_rng->normal_tensor(lat.mu.value().shape));
      lat.sample = add(lat.mu, mul(exp(scale(lat.log_var, 0.5)), eps));
    } else {
      lat.sample = lat.mu;
    }
    return lat;
  }

  void collect(std::vector<Param*>& out) {
    mu_layer.collect(out);
    log_var_layer.collect(out);
  }
};

// ---- losses -----------------------------------------------------------------

/// Mean absolute error over all entries.
inline Var l1_loss(const Var& pred, const Var& target) {
  detail::check_same_shape("l1_loss", pred.value(), target.value());
  return mean_all(abs(sub(pred, target)));
}

/// Closed-form KL(q || N(0, I)) for a diagonal Gaussian, averaged over rows:
/// mean_t 0.5 * sum_d (exp(log_var) + mu^2 - 1 - log_var).
inline Var kl_standard_normal(const Var& mu, const Var& log_var) {
  detail::check_same_shape("kl_standard_normal", mu.value(), log_var.value());
  if (!mu.value().all_finite() || !log_var.value().all_finite())
    throw std::invalid_argument("kl_standard_normal: non-finite latent parameters");
  const std::size_t d = mu.value().rank() == 2 ? mu.value().cols() : mu.value().numel();
  Var one = Var::leaf(Tensor::full(mu.value().shape, 1.0));
  Var inner = sub(sub(add(exp(log_var), mul(mu, mu)), one), log_var);
  return scale(mean_all(inner), 0.5 * static_cast<double>(d));
}

inline Var kl_standard_normal(const VaeLatent& lat) {
  return kl_standard_normal(lat.mu, lat.log_var);
}

/// Per-class weights proportional to 1/count, normalized to sum to the number
/// of classes (so uniform counts give all-ones).
inline std::vector<double> class_weights(const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw std::invalid_argument("class_weights: no classes");
  std::vector<double> w(counts.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0)
      throw std::invalid_argument("class_weights: class " + std::to_string(c) +
                                  " has zero samples (absent from corpus)");
    w[c] = 1.0 / static_cast<double>(counts[c]);
    sum += w[c];
  }
  double norm = static_cast<double>(counts.size()) / sum;
  for (double& v : w) v *= norm;
  return w;
}

/// w[label] * (-log softmax(logits)[label]). Logits are [1, C]; result is a
/// scalar. Pass weight 1.0 for the unweighted loss.
inline Var weighted_cross_entropy(const Var& logits, std::size_t label, double weight) {
  const Tensor& lv = logits.value();
  std::size_t rows, cols;
  detail::rows_cols_of(lv, "weighted_cross_entropy", &rows, &cols);
  if (rows != 1)
    throw std::invalid_argument("weighted_cross_entropy: expected a single logit row, got " +
                                lv.shape_str());
  if (label >= cols)
    throw std::invalid_argument("weighted_cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(cols) + " classes");
  Var lsm = log_softmax(logits);
  Var picked = lv.rank() == 2 ? slice_cols(lsm, label, label + 1) : slice(lsm, label, label + 1);
  return scale(mean_all(picked), -weight);
}

inline Var weighted_cross_entropy(const Var& logits, std::size_t label,
                                  const std::vector<double>& weights) {
  std::size_t rows, cols;
  detail::rows_cols_of(logits.value(), "weighted_cross_entropy", &rows, &cols);
  if (weights.size() != cols)
    throw std::invalid_argument("weighted_cross_entropy: " + std::to_string(weights.size()) +
                                " weights for " + std::to_string(cols) + " classes");
  if (label >= cols)
    throw std::invalid_argument("weighted_cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(cols) + " classes");
  return weighted_cross_entropy(logits, label, weights[label]);
}

inline Var cross_entropy(const Var& logits, std::size_t label) {
  return weighted_cross_entropy(logits, label, 1.0);
}

}  // namespace emocat

#endif  // EMOCAT_LAYERS_HPP_
