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

#ifndef EMOCAT_GRAD_TRANSFORM_HPP_
#define EMOCAT_GRAD_TRANSFORM_HPP_

#include <cmath>
#include <stdexcept>
#include <string>

#include "emocat/tensor.hpp"

namespace emocat {

enum class TransformKind { kIdentity, kReversal, kInvSquareNorm, kInvExpSquareNorm };

inline const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kReversal: return "reversal";
    case TransformKind::kInvSquareNorm: return "inv-sq";
    case TransformKind::kInvExpSquareNorm: return "inv-exp";
  }
  return "?";
}

inline TransformKind transform_kind_from_string(const std::string& s) {
  if (s == "identity") return TransformKind::kIdentity;
  if (s == "reversal") return TransformKind::kReversal;
  if (s == "inv-sq") return TransformKind::kInvSquareNorm;
  if (s == "inv-exp") return TransformKind::kInvExpSquareNorm;
  throw std::invalid_argument("unknown gradient transform kind '" + s +
                              "' (expected identity|reversal|inv-sq|inv-exp)");
}

/// Which gradient transform sits between the bottleneck and the adversarial
/// classifier, plus its weight and stabilizers. The norm is always taken over
/// the entire per-utterance gradient tensor.
struct GradTransformSpec {
  TransformKind kind = TransformKind::kIdentity;
  double lambda = 1.0;
  double norm_floor = 1e-8;   // denominator floor for inv-sq
  double out_norm_cap = 1e3;  // output norm cap for inv-sq

  void validate() const {
    if (!(lambda > 0.0))
      throw std::invalid_argument("GradTransformSpec: lambda must be > 0");
    if (!(norm_floor >= 0.0))
      throw std::invalid_argument("GradTransformSpec: norm_floor must be >= 0");
    if (!(out_norm_cap > 0.0))
      throw std::invalid_argument("GradTransformSpec: out_norm_cap must be > 0");
  }

  GradTransformSpec with_lambda(double l) const {
    GradTransformSpec s = *this;
    s.lambda = l;
    return s;
  }
};

/// Applies the transform to a backpropagated gradient. `context` names the
/// graph node for error messages.
inline Tensor transform_gradient(const GradTransformSpec& spec, const Tensor& delta,
                                 const std::string& context = "") {
  if (spec.kind == TransformKind::kIdentity) return delta;
  if (!delta.all_finite())
    throw std::runtime_error("transform_gradient" +
                             (context.empty() ? std::string() : " at node '" + context + "'") +
                             ": non-finite gradient entries");
  Tensor out = delta;
  switch (spec.kind) {
    case TransformKind::kIdentity:
      break;
    case TransformKind::kReversal:
      for (double& v : out.data) v *= -spec.lambda;
      break;
    case TransformKind::kInvSquareNorm: {
      double n = delta.norm();
      double denom = std::max(n * n, spec.norm_floor);
      double s = -spec.lambda / denom;
      for (double& v : out.data) v *= s;
      double on = out.norm();
      if (on > spec.out_norm_cap) {
        double r = spec.out_norm_cap / on;
        for (double& v : out.data) v *= r;
      }
      break;
    }
    case TransformKind::kInvExpSquareNorm: {
      double n = delta.norm();
      double s = -spec.lambda / std::exp(n * n);
      for (double& v : out.data) v *= s;
      break;
    }
  }
  return out;
}

/// Norm of the transformed gradient as a function of the input norm r.
inline double output_norm_profile(const GradTransformSpec& spec, double r) {
  switch (spec.kind) {
    case TransformKind::kIdentity:
      return r;
    case TransformKind::kReversal:
      return spec.lambda * r;
    case TransformKind::kInvSquareNorm: {
      double out = spec.lambda * r / std::max(r * r, spec.norm_floor);
      return std::min(out, spec.out_norm_cap);
    }
    case TransformKind::kInvExpSquareNorm:
      return spec.lambda * r * std::exp(-r * r);
  }
  return r;
}

}  // namespace emocat

#endif  // EMOCAT_GRAD_TRANSFORM_HPP_
