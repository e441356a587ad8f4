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

// Reverse-mode automatic differentiation over dense f64 tensors. The graph is
// dynamic: ops evaluate eagerly and record a vjp closure on the result node.
// A node may carry a GradTransformSpec; during backward the transform is
// applied to the gradient flowing past that node toward its parents, never to
// the node's own value or its own stored grad.

#ifndef EMOCAT_AUTODIFF_HPP_
#define EMOCAT_AUTODIFF_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "emocat/grad_transform.hpp"
#include "emocat/tensor.hpp"

namespace emocat {

struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor&)> backprop;  // accumulates into parents
  std::optional<GradTransformSpec> transform;
};

namespace detail {

inline Tensor& ensure_grad(Node* n) {
  if (!n->has_grad) {
    n->grad = Tensor(n->value.shape);
    n->has_grad = true;
  }
  return n->grad;
}

inline void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace detail

/// Value-semantics handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Var leaf(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    return Var(std::move(n));
  }

  const Tensor& value() const { return node()->value; }
  const Tensor& grad() const {
    if (!node()->has_grad)
      throw std::runtime_error("Var::grad: no gradient (backward not run or node unreachable)");
    return node()->grad;
  }
  bool has_grad() const { return node()->has_grad; }

  Node* node() const {
    if (!n_) throw std::runtime_error("Var: empty handle");
    return n_.get();
  }
  const std::shared_ptr<Node>& ptr() const { return n_; }
  explicit operator bool() const { return static_cast<bool>(n_); }

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

inline Var make_node(const char* op, Tensor value, std::vector<Var> parents) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = std::move(value);
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.ptr());
  return Var(std::move(n));
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": operand shapes " + a.shape_str() +
                                " and " + b.shape_str() + " do not match");
}

}  // namespace detail

// ---- elementwise ----------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  detail::add_into(out, b.value());
  Var r = detail::make_node("add", std::move(out), {a, b});
  Node* pa = a.node();
  Node* pb = b.node();
  r.node()->backprop = [pa, pb](const Tensor& g) {
    detail::add_into(detail::ensure_grad(pa), g);
    detail::add_into(detail::ensure_grad(pb), g);
  };
  return r;
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.value().data[i];
  Var r = detail::make_node("sub", std::move(out), {a, b});
  Node* pa = a.node();
  Node* pb = b.node();
  r.node()->backprop = [pa, pb](const Tensor& g) {
    detail::add_into(detail::ensure_grad(pa), g);
    Tensor& gb = detail::ensure_grad(pb);
    for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
  };
  return r;
}

inline Var mul(const Var& a, const Var& b) {
  detail::check_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.value().data[i];
  Var r = detail::make_node("mul", std::move(out), {a, b});
  Node* pa = a.node();
  Node* pb = b.node();
  r.node()->backprop = [pa, pb](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    Tensor& gb = detail::ensure_grad(pb);
    const Tensor& av = pa->value;
    const Tensor& bv = pb->value;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * bv.data[i];
      gb.data[i] += g.data[i] * av.data[i];
    }
  };
  return r;
}

inline Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (double& v : out.data) v *= c;
  Var r = detail::make_node("scale", std::move(out), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa, c](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
  };
  return r;
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

/// Pass-through; useful as the attachment point for a gradient transform.
inline Var identity(const Var& a) {
  Var r = detail::make_node("identity", a.value(), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa](const Tensor& g) { detail::add_into(detail::ensure_grad(pa), g); };
  return r;
}

#define EMOCAT_UNARY_OP(NAME, FWD, BWD)                                     \
  inline Var NAME(const Var& a) {                                          \
    Tensor out = a.value();                                                 \
    for (double& x : out.data) x = (FWD);                                   \
    Var r = detail::make_node(#NAME, std::move(out), {a});                  \
    Node* pa = a.node();                                                    \
    Node* self = r.node();                                                  \
    self->backprop = [pa, self](const Tensor& g) {                          \
      Tensor& ga = detail::ensure_grad(pa);                                 \
      for (std::size_t i = 0; i < g.data.size(); ++i) {                     \
        double y = self->value.data[i];                                     \
        double x = pa->value.data[i];                                       \
        (void)y;                                                            \
        (void)x;                                                            \
        ga.data[i] += g.data[i] * (BWD);                                    \
      }                                                                     \
    };                                                                      \
    return r;                                                               \
  }

EMOCAT_UNARY_OP(tanh, std::tanh(x), (1.0 - y * y))
EMOCAT_UNARY_OP(sigmoid, 1.0 / (1.0 + std::exp(-x)), y * (1.0 - y))
EMOCAT_UNARY_OP(exp, std::exp(x), y)
EMOCAT_UNARY_OP(sin, std::sin(x), std::cos(x))
EMOCAT_UNARY_OP(abs, std::fabs(x), (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0)))

#undef EMOCAT_UNARY_OP

inline Var log(const Var& a) {
  for (double x : a.value().data)
    if (!(x > 0.0))
      throw std::invalid_argument("log: non-positive input entry " + std::to_string(x));
  Tensor out = a.value();
  for (double& x : out.data) x = std::log(x);
  Var r = detail::make_node("log", std::move(out), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      ga.data[i] += g.data[i] / pa->value.data[i];
  };
  return r;
}

// ---- linear algebra -------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0])
    throw std::invalid_argument("matmul: incompatible shapes " + av.shape_str() + " and " +
                                bv.shape_str());
  const std::size_t M = av.shape[0], K = av.shape[1], N = bv.shape[1];
  Tensor out({M, N});
  for (std::size_t i = 0; i < M; ++i) {
    const double* arow = &av.data[i * K];
    double* orow = &out.data[i * N];
    for (std::size_t k = 0; k < K; ++k) {
      double x = arow[k];
      if (x == 0.0) continue;
      const double* brow = &bv.data[k * N];
      for (std::size_t j = 0; j < N; ++j) orow[j] += x * brow[j];
    }
  }
  Var r = detail::make_node("matmul", std::move(out), {a, b});
  Node* pa = a.node();
  Node* pb = b.node();
  r.node()->backprop = [pa, pb, M, K, N](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    Tensor& gb = detail::ensure_grad(pb);
    const Tensor& av = pa->value;
    const Tensor& bv = pb->value;
    // dA = g * B^T
    for (std::size_t i = 0; i < M; ++i) {
      const double* grow = &g.data[i * N];
      double* garow = &ga.data[i * K];
      for (std::size_t k = 0; k < K; ++k) {
        const double* brow = &bv.data[k * N];
        double acc = 0.0;
        for (std::size_t j = 0; j < N; ++j) acc += grow[j] * brow[j];
        garow[k] += acc;
      }
    }
    // dB = A^T * g
    for (std::size_t i = 0; i < M; ++i) {
      const double* arow = &av.data[i * K];
      const double* grow = &g.data[i * N];
      for (std::size_t k = 0; k < K; ++k) {
        double x = arow[k];
        if (x == 0.0) continue;
        double* gbrow = &gb.data[k * N];
        for (std::size_t j = 0; j < N; ++j) gbrow[j] += x * grow[j];
      }
    }
  };
  return r;
}

/// out[t,c] = a[t,c] + v[c]; broadcast bias over rows.
inline Var add_rowvec(const Var& a, const Var& v) {
  const Tensor& av = a.value();
  const Tensor& vv = v.value();
  if (av.rank() != 2 || vv.rank() != 1 || av.shape[1] != vv.shape[0])
    throw std::invalid_argument("add_rowvec: shapes " + av.shape_str() + " and " +
                                vv.shape_str() + " do not broadcast");
  Tensor out = av;
  const std::size_t T = av.shape[0], C = av.shape[1];
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) out.data[t * C + c] += vv.data[c];
  Var r = detail::make_node("add_rowvec", std::move(out), {a, v});
  Node* pa = a.node();
  Node* pv = v.node();
  r.node()->backprop = [pa, pv, T, C](const Tensor& g) {
    detail::add_into(detail::ensure_grad(pa), g);
    Tensor& gv = detail::ensure_grad(pv);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) gv.data[c] += g.data[t * C + c];
  };
  return r;
}

/// 1-D convolution over a [T, Cin] sequence with a [k, Cin, Cout] kernel and
/// [Cout] bias, zero-padded so the output length equals T. k must be odd.
inline Var conv1d(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 2 || wv.rank() != 3 || bv.rank() != 1)
    throw std::invalid_argument("conv1d: expected input [T,Cin], weight [k,Cin,Cout], bias "
                                "[Cout]; got " + xv.shape_str() + ", " + wv.shape_str() + ", " +
                                bv.shape_str());
  const std::size_t T = xv.shape[0], Cin = xv.shape[1];
  const std::size_t k = wv.shape[0], Cout = wv.shape[2];
  if (wv.shape[1] != Cin || bv.shape[0] != Cout)
    throw std::invalid_argument("conv1d: weight " + wv.shape_str() + " / bias " + bv.shape_str() +
                                " do not match input " + xv.shape_str());
  if (k % 2 == 0) throw std::invalid_argument("conv1d: kernel width must be odd");
  const std::size_t off = k / 2;
  Tensor out({T, Cout});
  for (std::size_t t = 0; t < T; ++t) {
    double* orow = &out.data[t * Cout];
    for (std::size_t c = 0; c < Cout; ++c) orow[c] = bv.data[c];
    for (std::size_t kk = 0; kk < k; ++kk) {
      std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + kk) - static_cast<std::ptrdiff_t>(off);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      const double* xrow = &xv.data[static_cast<std::size_t>(src) * Cin];
      const double* wmat = &wv.data[kk * Cin * Cout];
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        double xval = xrow[ci];
        if (xval == 0.0) continue;
        const double* wrow = &wmat[ci * Cout];
        for (std::size_t c = 0; c < Cout; ++c) orow[c] += xval * wrow[c];
      }
    }
  }
  Var r = detail::make_node("conv1d", std::move(out), {x, w, b});
  Node* px = x.node();
  Node* pw = w.node();
  Node* pb = b.node();
  r.node()->backprop = [px, pw, pb, T, Cin, k, Cout, off](const Tensor& g) {
    Tensor& gx = detail::ensure_grad(px);
    Tensor& gw = detail::ensure_grad(pw);
    Tensor& gb = detail::ensure_grad(pb);
    const Tensor& xv = px->value;
    const Tensor& wv = pw->value;
    for (std::size_t t = 0; t < T; ++t) {
      const double* grow = &g.data[t * Cout];
      for (std::size_t c = 0; c < Cout; ++c) gb.data[c] += grow[c];
      for (std::size_t kk = 0; kk < k; ++kk) {
        std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + kk) - static_cast<std::ptrdiff_t>(off);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
        const double* xrow = &xv.data[static_cast<std::size_t>(src) * Cin];
        double* gxrow = &gx.data[static_cast<std::size_t>(src) * Cin];
        const double* wmat = &wv.data[kk * Cin * Cout];
        double* gwmat = &gw.data[kk * Cin * Cout];
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          const double* wrow = &wmat[ci * Cout];
          double* gwrow = &gwmat[ci * Cout];
          double xval = xrow[ci];
          double acc = 0.0;
          for (std::size_t c = 0; c < Cout; ++c) {
            acc += grow[c] * wrow[c];
            gwrow[c] += grow[c] * xval;
          }
          gxrow[ci] += acc;
        }
      }
    }
  };
  return r;
}

// ---- softmax family -------------------------------------------------------

namespace detail {

inline void softmax_rows(const Tensor& in, Tensor& out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = &in.data[r * cols];
    double* y = &out.data[r * cols];
    double m = x[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, x[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - m);
      s += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= s;
  }
}

inline void rows_cols_of(const Tensor& t, const char* op, std::size_t* rows, std::size_t* cols) {
  if (t.rank() == 1) {
    *rows = 1;
    *cols = t.shape[0];
  } else if (t.rank() == 2) {
    *rows = t.shape[0];
    *cols = t.shape[1];
  } else {
    throw std::invalid_argument(std::string(op) + ": expected rank 1 or 2, got shape " +
                                t.shape_str());
  }
}

}  // namespace detail

/// Row-wise softmax (whole tensor for rank 1).
inline Var softmax(const Var& a) {
  std::size_t rows, cols;
  detail::rows_cols_of(a.value(), "softmax", &rows, &cols);
  Tensor out(a.value().shape);
  detail::softmax_rows(a.value(), out, rows, cols);
  Var r = detail::make_node("softmax", std::move(out), {a});
  Node* pa = a.node();
  Node* self = r.node();
  r.node()->backprop = [pa, self, rows, cols](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    for (std::size_t rr = 0; rr < rows; ++rr) {
      const double* y = &self->value.data[rr * cols];
      const double* gr = &g.data[rr * cols];
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * y[c];
      double* gar = &ga.data[rr * cols];
      for (std::size_t c = 0; c < cols; ++c) gar[c] += y[c] * (gr[c] - dot);
    }
  };
  return r;
}

inline Var log_softmax(const Var& a) {
  std::size_t rows, cols;
  detail::rows_cols_of(a.value(), "log_softmax", &rows, &cols);
  Tensor out(a.value().shape);
  for (std::size_t rr = 0; rr < rows; ++rr) {
    const double* x = &a.value().data[rr * cols];
    double* y = &out.data[rr * cols];
    double m = x[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, x[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(x[c] - m);
    double lse = m + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] - lse;
  }
  Var r = detail::make_node("log_softmax", std::move(out), {a});
  Node* pa = a.node();
  Node* self = r.node();
  r.node()->backprop = [pa, self, rows, cols](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    for (std::size_t rr = 0; rr < rows; ++rr) {
      const double* y = &self->value.data[rr * cols];
      const double* gr = &g.data[rr * cols];
      double gsum = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gsum += gr[c];
      double* gar = &ga.data[rr * cols];
      for (std::size_t c = 0; c < cols; ++c) gar[c] += gr[c] - std::exp(y[c]) * gsum;
    }
  };
  return r;
}

// ---- shape ops -------------------------------------------------------------

/// Rows [r0, r1) of a rank-2 tensor, or entries [r0, r1) of a rank-1 tensor.
inline Var slice(const Var& a, std::size_t r0, std::size_t r1) {
  const Tensor& av = a.value();
  std::size_t rows, cols;
  detail::rows_cols_of(av, "slice", &rows, &cols);
  if (r0 >= r1 || r1 > rows)
    throw std::invalid_argument("slice: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                                ") out of bounds for shape " + av.shape_str());
  Tensor out(av.rank() == 1 ? std::vector<std::size_t>{(r1 - r0) * cols}
                            : std::vector<std::size_t>{r1 - r0, cols});
  std::copy(av.data.begin() + static_cast<std::ptrdiff_t>(r0 * cols),
            av.data.begin() + static_cast<std::ptrdiff_t>(r1 * cols), out.data.begin());
  Var r = detail::make_node("slice", std::move(out), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa, r0, cols](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[r0 * cols + i] += g.data[i];
  };
  return r;
}

/// Columns [c0, c1) of a rank-2 tensor.
inline Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
  const Tensor& av = a.value();
  if (av.rank() != 2)
    throw std::invalid_argument("slice_cols: expected rank 2, got " + av.shape_str());
  const std::size_t T = av.shape[0], C = av.shape[1];
  if (c0 >= c1 || c1 > C)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") out of bounds for shape " + av.shape_str());
  const std::size_t W = c1 - c0;
  Tensor out({T, W});
  for (std::size_t t = 0; t < T; ++t)
    std::copy(&av.data[t * C + c0], &av.data[t * C + c1], &out.data[t * W]);
  Var r = detail::make_node("slice_cols", std::move(out), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa, c0, C, W](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    const std::size_t T = g.data.size() / W;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < W; ++c) ga.data[t * C + c0 + c] += g.data[t * W + c];
  };
  return r;
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty list");
  const std::size_t C = parts[0].value().cols();
  std::size_t T = 0;
  for (const Var& p : parts) {
    if (p.value().rank() != 2 || p.value().cols() != C)
      throw std::invalid_argument("concat_rows: shape " + p.value().shape_str() +
                                  " does not match first part " + parts[0].value().shape_str());
    T += p.value().rows();
  }
  Tensor out({T, C});
  std::size_t pos = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() +
              static_cast<std::ptrdiff_t>(pos));
    pos += p.value().data.size();
  }
  Var r = detail::make_node("concat_rows", std::move(out), parts);
  std::vector<Node*> ps;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    ps.push_back(p.node());
    sizes.push_back(p.value().data.size());
  }
  r.node()->backprop = [ps, sizes](const Tensor& g) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Tensor& gp = detail::ensure_grad(ps[i]);
      for (std::size_t j = 0; j < sizes[i]; ++j) gp.data[j] += g.data[pos + j];
      pos += sizes[i];
    }
  };
  return r;
}

inline Var concat_rows(const Var& a, const Var& b) { return concat_rows(std::vector<Var>{a, b}); }

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty list");
  const std::size_t T = parts[0].value().rows();
  std::size_t C = 0;
  for (const Var& p : parts) {
    if (p.value().rank() != 2 || p.value().rows() != T)
      throw std::invalid_argument("concat_cols: shape " + p.value().shape_str() +
                                  " does not match first part " + parts[0].value().shape_str());
    C += p.value().cols();
  }
  Tensor out({T, C});
  std::size_t col0 = 0;
  for (const Var& p : parts) {
    const std::size_t W = p.value().cols();
    for (std::size_t t = 0; t < T; ++t)
      std::copy(&p.value().data[t * W], &p.value().data[(t + 1) * W], &out.data[t * C + col0]);
    col0 += W;
  }
  Var r = detail::make_node("concat_cols", std::move(out), parts);
  std::vector<Node*> ps;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    ps.push_back(p.node());
    widths.push_back(p.value().cols());
  }
  r.node()->backprop = [ps, widths, T, C](const Tensor& g) {
    std::size_t col0 = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Tensor& gp = detail::ensure_grad(ps[i]);
      const std::size_t W = widths[i];
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < W; ++c) gp.data[t * W + c] += g.data[t * C + col0 + c];
      col0 += W;
    }
  };
  return r;
}

inline Var concat_cols(const Var& a, const Var& b) { return concat_cols(std::vector<Var>{a, b}); }

inline Var reshape(const Var& a, std::vector<std::size_t> shape) {
  if (Tensor::numel_of(shape) != a.value().numel())
    throw std::invalid_argument("reshape: cannot reshape " + a.value().shape_str() + " to " +
                                Tensor::shape_str(shape));
  Tensor out(std::move(shape), a.value().data);
  Var r = detail::make_node("reshape", std::move(out), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
  };
  return r;
}

/// Mean over all entries; result is a rank-0 scalar.
inline Var mean_all(const Var& a) {
  const std::size_t n = a.value().numel();
  if (n == 0) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0.0;
  for (double v : a.value().data) s += v;
  Var r = detail::make_node("mean_all", Tensor::scalar(s / static_cast<double>(n)), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa, n](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    double gi = g.data[0] / static_cast<double>(n);
    for (double& v : ga.data) v += gi;
  };
  return r;
}

/// Mean over rows: [T, C] -> [1, C].
inline Var mean_rows(const Var& a) {
  const Tensor& av = a.value();
  if (av.rank() != 2)
    throw std::invalid_argument("mean_rows: expected rank 2, got " + av.shape_str());
  const std::size_t T = av.shape[0], C = av.shape[1];
  Tensor out({1, C});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) out.data[c] += av.data[t * C + c];
  for (std::size_t c = 0; c < C; ++c) out.data[c] /= static_cast<double>(T);
  Var r = detail::make_node("mean_rows", std::move(out), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa, T, C](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) ga.data[t * C + c] += g.data[c] / static_cast<double>(T);
  };
  return r;
}

/// Broadcast a rank-1 [C] vector to [T, C].
inline Var repeat_row(const Var& v, std::size_t T) {
  const Tensor& vv = v.value();
  if (vv.rank() != 1)
    throw std::invalid_argument("repeat_row: expected rank 1, got " + vv.shape_str());
  const std::size_t C = vv.shape[0];
  Tensor out({T, C});
  for (std::size_t t = 0; t < T; ++t)
    std::copy(vv.data.begin(), vv.data.end(), &out.data[t * C]);
  Var r = detail::make_node("repeat_row", std::move(out), {v});
  Node* pv = v.node();
  r.node()->backprop = [pv, T, C](const Tensor& g) {
    Tensor& gv = detail::ensure_grad(pv);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) gv.data[c] += g.data[t * C + c];
  };
  return r;
}

/// Embedding lookup: rows of `table` selected by `ids`.
inline Var gather_rows(const Var& table, const std::vector<std::size_t>& ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2)
    throw std::invalid_argument("gather_rows: expected rank-2 table, got " + tv.shape_str());
  const std::size_t V = tv.shape[0], D = tv.shape[1];
  for (std::size_t id : ids)
    if (id >= V)
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) +
                                  " out of range for table " + tv.shape_str());
  Tensor out({ids.size(), D});
  for (std::size_t t = 0; t < ids.size(); ++t)
    std::copy(&tv.data[ids[t] * D], &tv.data[(ids[t] + 1) * D], &out.data[t * D]);
  Var r = detail::make_node("gather_rows", std::move(out), {table});
  Node* pt = table.node();
  r.node()->backprop = [pt, ids, D](const Tensor& g) {
    Tensor& gt = detail::ensure_grad(pt);
    for (std::size_t t = 0; t < ids.size(); ++t)
      for (std::size_t d = 0; d < D; ++d) gt.data[ids[t] * D + d] += g.data[t * D + d];
  };
  return r;
}

/// Temporal bottleneck: output row t equals input row N*floor(t/N).
inline Var bottleneck_select(const Var& a, std::size_t N) {
  const Tensor& av = a.value();
  if (av.rank() != 2)
    throw std::invalid_argument("bottleneck_select: expected rank 2, got " + av.shape_str());
  if (N < 1) throw std::invalid_argument("bottleneck_select: rate must be >= 1");
  const std::size_t T = av.shape[0], C = av.shape[1];
  Tensor out({T, C});
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t src = (t / N) * N;
    std::copy(&av.data[src * C], &av.data[(src + 1) * C], &out.data[t * C]);
  }
  Var r = detail::make_node("bottleneck_select", std::move(out), {a});
  Node* pa = a.node();
  r.node()->backprop = [pa, N, T, C](const Tensor& g) {
    Tensor& ga = detail::ensure_grad(pa);
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t src = (t / N) * N;
      for (std::size_t c = 0; c < C; ++c) ga.data[src * C + c] += g.data[t * C + c];
    }
  };
  return r;
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

// ---- transform attachment ---------------------------------------------------

/// Attaches a gradient transform to a node. During backward, gradients flowing
/// past this node toward its parents go through transform_gradient; the node's
/// forward value and its own stored grad are untouched.
inline void attach(const Var& v, const GradTransformSpec& spec) {
  spec.validate();
  Node* n = v.node();
  if (n->transform.has_value())
    throw std::runtime_error(std::string("attach: node '") + n->op +
                             "' already carries a gradient transform");
  n->transform = spec;
}

// ---- execution ---------------------------------------------------------------

/// Eager graphs hold the forward value already; kept for API symmetry.
inline const Tensor& forward(const Var& root) { return root.value(); }

namespace detail {

inline std::vector<Node*> topo_order(Node* loss) {
  std::vector<Node*> order;
  std::unordered_set<Node*> done;
  // iterative post-order
  std::vector<std::pair<Node*, std::size_t>> stack{{loss, 0}};
  std::unordered_set<Node*> on_stack;
  on_stack.insert(loss);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (!done.count(p) && !on_stack.count(p)) {
        stack.emplace_back(p, 0);
        on_stack.insert(p);
      }
    } else {
      done.insert(n);
      on_stack.erase(n);
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;  // parents before children; loss last
}

}  // namespace detail

/// Reverse-mode backpropagation from a scalar loss. Every node reachable from
/// the loss ends up with grad = d loss / d node. Set apply_transforms=false to
/// run with all attached transforms forced to identity (gradient checking).
inline void backward(const Var& loss, bool apply_transforms = true) {
  if (loss.value().numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                loss.value().shape_str());
  std::vector<Node*> order = detail::topo_order(loss.node());
  for (Node* n : order) n->has_grad = false;
  Tensor& lg = detail::ensure_grad(loss.node());
  std::fill(lg.data.begin(), lg.data.end(), 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->has_grad || !n->backprop) continue;
    if (n->transform.has_value() && apply_transforms &&
        n->transform->kind != TransformKind::kIdentity) {
      n->backprop(transform_gradient(*n->transform, n->grad, n->op));
    } else {
      n->backprop(n->grad);
    }
  }
}

}  // namespace emocat

#endif  // EMOCAT_AUTODIFF_HPP_
