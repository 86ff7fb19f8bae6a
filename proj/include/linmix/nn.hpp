// Copyright 2026 The linmix Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Shared neural primitives: linear layers, GELU, softmax, layer
// normalization, the softmax + L1 double normalization, and the per-channel
// affine transform together with its folding into linear layers.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "linmix/ops.hpp"
#include "linmix/tape.hpp"

namespace linmix {

// Parameter bundles are templates over the value type: V = Tensor holds the
// numbers, V = Var holds the same arrays bound to a tape. Each bundle offers
// transform<U>(f) to rebind and a static visit(self, prefix, f) that walks
// its arrays in a fixed order with dotted names.

template <class V = Tensor>
struct LinearParams {
  V weight;  // [out x in]
  V bias;    // [out]

  template <class U, class F>
  LinearParams<U> transform(F&& f) const {
    return {f(weight), f(bias)};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "weight", self.weight);
    f(prefix + "bias", self.bias);
  }
};

template <class V = Tensor>
struct NormParams {
  V gain;  // [C]
  V bias;  // [C]
  double eps = 1e-5;

  template <class U, class F>
  NormParams<U> transform(F&& f) const {
    return {f(gain), f(bias), eps};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "gain", self.gain);
    f(prefix + "bias", self.bias);
  }
};

template <class V = Tensor>
struct AffineParams {
  V alpha;  // [C]
  V beta;   // [C]

  template <class U, class F>
  AffineParams<U> transform(F&& f) const {
    return {f(alpha), f(beta)};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "alpha", self.alpha);
    f(prefix + "beta", self.beta);
  }
};

inline LinearParams<> identity_linear(std::size_t n) {
  return {Tensor::identity(n), Tensor({n})};
}
inline LinearParams<> zero_linear(std::size_t out, std::size_t in) {
  return {Tensor({out, in}), Tensor({out})};
}
inline NormParams<> unit_norm(std::size_t c, double eps = 1e-5) {
  return {Tensor({c}, 1.0), Tensor({c}), eps};
}
inline AffineParams<> identity_affine(std::size_t c) {
  return {Tensor({c}, 1.0), Tensor({c})};
}

namespace detail {

inline void require_row_vector(const Tensor& x, const Tensor& v,
                               const char* op, const char* name) {
  x.require_rank(2);
  if (v.rank() != 1 || v.dim(0) != x.cols()) {
    throw ShapeError(std::string(op) + ": " + name + " dims " +
                     dims_string(v.dims()) + " do not match input " +
                     dims_string(x.dims()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Value kernels

/// out = X W^T + b, row-broadcast bias.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  x.require_rank(2);
  w.require_rank(2);
  const std::size_t n = x.rows(), in = x.cols(), out = w.rows();
  if (w.cols() != in || b.rank() != 1 || b.dim(0) != out) {
    throw ShapeError("linear: input " + dims_string(x.dims()) + ", weight " +
                     dims_string(w.dims()) + ", bias " + dims_string(b.dims()));
  }
  Tensor y({n, out});
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = &x(i, 0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = &w(o, 0);
      double s = 0.0;
      for (std::size_t k = 0; k < in; ++k) s += xi[k] * wo[k];
      y(i, o) = s + b[o];
    }
  }
  FlopCounter::add(flop_cost::kMac * n * in * out);
  return y;
}

inline double gelu_value(double x) {
  return 0.5 * x * std::erfc(-x / std::numbers::sqrt2);
}
inline double gelu_derivative(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf =
      std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}
inline constexpr Unary kGeluFn{gelu_value, gelu_derivative, flop_cost::kGelu};

/// Exact GELU, x * Phi(x) with Phi from erfc.
inline Tensor gelu(const Tensor& x) { return map(x, kGeluFn); }

inline Tensor softmax_rows(const Tensor& x) {
  x.require_rank(2);
  Tensor y(x.dims());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      y(i, j) = std::exp(x(i, j) - mx);
      s += y(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) /= s;
  }
  FlopCounter::add(flop_cost::kSoftmax * x.size());
  return y;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gain,
                         const Tensor& bias, double eps) {
  detail::require_row_vector(x, gain, "layer_norm", "gain");
  detail::require_row_vector(x, bias, "layer_norm", "bias");
  const std::size_t n = x.cols();
  Tensor y(x.dims());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double rstd = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j)
      y(i, j) = gain[j] * ((x(i, j) - mean) * rstd) + bias[j];
  }
  FlopCounter::add(flop_cost::kLayerNorm * x.size());
  return y;
}

namespace detail {

/// log of the column softmax: a[i, j] - logsumexp over i of a[., j].
inline Tensor column_log_softmax(const Tensor& a) {
  a.require_rank(2);
  const std::size_t n = a.rows(), s = a.cols();
  Tensor out(a.dims());
  for (std::size_t j = 0; j < s; ++j) {
    double mx = a(0, j);
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, a(i, j));
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(a(i, j) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t i = 0; i < n; ++i) out(i, j) = a(i, j) - lse;
  }
  return out;
}

/// Row softmax without flop accounting.
inline Tensor row_softmax_raw(const Tensor& x) {
  Tensor y(x.dims());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      y(i, j) = std::exp(x(i, j) - mx);
      z += y(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) /= z;
  }
  return y;
}

}  // namespace detail

/**
 * External-attention normalization: softmax down each column (over the
 * token axis), then L1-normalize each row (over the memory axis). Every
 * output row sums to one.
 *
 * The row step runs as a softmax over the log of the column softmax. This is
 * the same function, but a token whose scores trail every column maximum by
 * hundreds would otherwise underflow to an all-zero row and divide 0 by 0.
 */
inline Tensor double_norm(const Tensor& a) {
  Tensor y = detail::row_softmax_raw(detail::column_log_softmax(a));
  FlopCounter::add(flop_cost::kDoubleNorm * a.size());
  return y;
}

/// Per-channel scale and shift; no input statistics.
inline Tensor affine(const Tensor& x, const Tensor& alpha, const Tensor& beta) {
  detail::require_row_vector(x, alpha, "affine", "alpha");
  detail::require_row_vector(x, beta, "affine", "beta");
  Tensor y(x.dims());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      y(i, j) = alpha[j] * x(i, j) + beta[j];
  FlopCounter::add(flop_cost::kAffine * x.size());
  return y;
}

/// -log softmax(logits)[label] for a single example.
inline Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  const std::size_t k = logits.size();
  if (label >= k) {
    throw DomainError("cross_entropy: label " + std::to_string(label) +
                      " outside [0, " + std::to_string(k) + ")");
  }
  double mx = logits[0];
  for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::exp(logits[i] - mx);
  FlopCounter::add(flop_cost::kSoftmax * k);
  return Tensor::scalar(std::log(s) + mx - logits[label]);
}

// ---------------------------------------------------------------------------
// Differentiable versions

inline Var linear(Var x, Var w, Var b) {
  return x.tape->record(
      linear(x.value(), w.value(), b.value()), {x, w, b},
      [x, w, b](Tape& t, const Tensor& g) {
        if (t.requires_grad(x)) t.accumulate(x, matmul(g, t.value(w)));
        if (t.requires_grad(w)) t.accumulate(w, matmul(transpose(g), t.value(x)));
        if (t.requires_grad(b)) {
          Tensor db({g.cols()});
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t o = 0; o < g.cols(); ++o) db[o] += g(i, o);
          t.accumulate(b, std::move(db));
        }
      });
}

inline Var gelu(Var x) { return map(x, kGeluFn); }

inline Var softmax_rows(Var x) {
  const Var self = x.tape->next();
  return x.tape->record(softmax_rows(x.value()), {x},
                        [x, self](Tape& t, const Tensor& g) {
                          const Tensor& p = t.value(self);
                          Tensor dx(p.dims());
                          for (std::size_t i = 0; i < p.rows(); ++i) {
                            double dot = 0.0;
                            for (std::size_t j = 0; j < p.cols(); ++j)
                              dot += g(i, j) * p(i, j);
                            for (std::size_t j = 0; j < p.cols(); ++j)
                              dx(i, j) = p(i, j) * (g(i, j) - dot);
                          }
                          t.accumulate(x, std::move(dx));
                        });
}

inline Var layer_norm(Var x, Var gain, Var bias, double eps) {
  return x.tape->record(
      layer_norm(x.value(), gain.value(), bias.value(), eps), {x, gain, bias},
      [x, gain, bias, eps](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        const Tensor& gv = t.value(gain);
        const std::size_t m = xv.rows(), n = xv.cols();
        const double dn = static_cast<double>(n);
        Tensor dx(xv.dims()), dgain({n}), dbias({n});
        std::vector<double> xhat(n), dxhat(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mean = 0.0;
          for (std::size_t j = 0; j < n; ++j) mean += xv(i, j);
          mean /= dn;
          double var = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = xv(i, j) - mean;
            var += d * d;
          }
          var /= dn;
          const double rstd = 1.0 / std::sqrt(var + eps);
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            xhat[j] = (xv(i, j) - mean) * rstd;
            dxhat[j] = g(i, j) * gv[j];
            dgain[j] += g(i, j) * xhat[j];
            dbias[j] += g(i, j);
            sum_dxhat += dxhat[j];
            sum_dxhat_xhat += dxhat[j] * xhat[j];
          }
          for (std::size_t j = 0; j < n; ++j) {
            dx(i, j) = rstd * (dxhat[j] - sum_dxhat / dn -
                               xhat[j] * sum_dxhat_xhat / dn);
          }
        }
        t.accumulate(x, std::move(dx));
        t.accumulate(gain, std::move(dgain));
        t.accumulate(bias, std::move(dbias));
      });
}

inline Var double_norm(Var a) {
  Tape& tape = *a.tape;
  const Var out = tape.next();
  return tape.record(
      double_norm(a.value()), {a},
      [a, out](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(out);
        Tensor sigma = detail::column_log_softmax(t.value(a));
        for (auto& v : sigma.data()) v = std::exp(v);
        const std::size_t n = y.rows(), s = y.cols();
        // Row softmax over L = log(sigma).
        Tensor dlog(y.dims());
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < s; ++j) dot += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < s; ++j) dlog(i, j) = y(i, j) * (g(i, j) - dot);
        }
        // Column log-softmax.
        Tensor da(y.dims());
        for (std::size_t j = 0; j < s; ++j) {
          double col = 0.0;
          for (std::size_t i = 0; i < n; ++i) col += dlog(i, j);
          for (std::size_t i = 0; i < n; ++i) da(i, j) = dlog(i, j) - sigma(i, j) * col;
        }
        t.accumulate(a, std::move(da));
      });
}

inline Var affine(Var x, Var alpha, Var beta) {
  return x.tape->record(
      affine(x.value(), alpha.value(), beta.value()), {x, alpha, beta},
      [x, alpha, beta](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        const Tensor& av = t.value(alpha);
        Tensor dx(xv.dims()), dalpha({xv.cols()}), dbeta({xv.cols()});
        for (std::size_t i = 0; i < xv.rows(); ++i) {
          for (std::size_t j = 0; j < xv.cols(); ++j) {
            dx(i, j) = g(i, j) * av[j];
            dalpha[j] += g(i, j) * xv(i, j);
            dbeta[j] += g(i, j);
          }
        }
        t.accumulate(x, std::move(dx));
        t.accumulate(alpha, std::move(dalpha));
        t.accumulate(beta, std::move(dbeta));
      });
}

inline Var cross_entropy(Var logits, std::size_t label) {
  return logits.tape->record(
      cross_entropy(logits.value(), label), {logits},
      [logits, label](Tape& t, const Tensor& g) {
        const Tensor& z = t.value(logits);
        double mx = z[0];
        for (std::size_t i = 1; i < z.size(); ++i) mx = std::max(mx, z[i]);
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += std::exp(z[i] - mx);
        Tensor dz(z.dims());
        for (std::size_t i = 0; i < z.size(); ++i)
          dz[i] = g[0] * (std::exp(z[i] - mx) / s - (i == label ? 1.0 : 0.0));
        t.accumulate(logits, std::move(dz));
      });
}

// ---------------------------------------------------------------------------
// Bundle-taking forms, generic over Tensor / Var.

template <class V>
V linear(const V& x, const LinearParams<V>& p) {
  return linear(x, p.weight, p.bias);
}
template <class V>
V layer_norm(const V& x, const NormParams<V>& p) {
  return layer_norm(x, p.gain, p.bias, p.eps);
}
template <class V>
V affine(const V& x, const AffineParams<V>& p) {
  return affine(x, p.alpha, p.beta);
}

// ---------------------------------------------------------------------------
// Inference-time folding

/**
 * Folds an affine applied to a linear layer's input into the layer:
 * W' = W Diag(alpha), b' = W beta + b, so that
 * linear(X, folded) == linear(affine(X, aff), lin).
 */
inline LinearParams<> fold_affine(const AffineParams<>& aff,
                                  const LinearParams<>& lin) {
  const Tensor& w = lin.weight;
  w.require_rank(2);
  if (aff.alpha.rank() != 1 || aff.alpha.dim(0) != w.cols() ||
      aff.beta.dims() != aff.alpha.dims()) {
    throw ShapeError("fold_affine: affine dims " + dims_string(aff.alpha.dims()) +
                     " do not match linear input extent of weight " +
                     dims_string(w.dims()));
  }
  LinearParams<> out{Tensor(w.dims()), lin.bias};
  for (std::size_t o = 0; o < w.rows(); ++o) {
    double shift = 0.0;
    for (std::size_t k = 0; k < w.cols(); ++k) {
      out.weight(o, k) = w(o, k) * aff.alpha[k];
      shift += w(o, k) * aff.beta[k];
    }
    out.bias[o] = lin.bias[o] + shift;
  }
  return out;
}

/**
 * Folds an affine applied to a linear layer's output into the layer:
 * W' = Diag(alpha) W, b' = Diag(alpha) b + beta.
 */
inline LinearParams<> absorb_affine_output(const LinearParams<>& lin,
                                           const AffineParams<>& aff) {
  const Tensor& w = lin.weight;
  w.require_rank(2);
  if (aff.alpha.rank() != 1 || aff.alpha.dim(0) != w.rows() ||
      aff.beta.dims() != aff.alpha.dims()) {
    throw ShapeError("absorb_affine_output: affine dims " +
                     dims_string(aff.alpha.dims()) +
                     " do not match linear output extent of weight " +
                     dims_string(w.dims()));
  }
  LinearParams<> out{Tensor(w.dims()), Tensor(lin.bias.dims())};
  for (std::size_t o = 0; o < w.rows(); ++o) {
    for (std::size_t k = 0; k < w.cols(); ++k)
      out.weight(o, k) = aff.alpha[o] * w(o, k);
    out.bias[o] = aff.alpha[o] * lin.bias[o] + aff.beta[o];
  }
  return out;
}

}  // namespace linmix
