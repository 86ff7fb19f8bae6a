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

// Token-matrix transforms [S x C] -> [S x C] for the four linear-layer
// architectures. Every block is a template over Tensor (plain evaluation)
// and Var (recorded for differentiation).

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "linmix/nn.hpp"
#include "linmix/random.hpp"

namespace linmix {

inline const Tensor& value_of(const Tensor& t) { return t; }
inline const Tensor& value_of(const Var& v) { return v.value(); }

namespace detail {

inline void require_tokens(const Tensor& x, std::size_t s, std::size_t c,
                           const char* block) {
  x.require_rank(2);
  if (x.rows() != s || x.cols() != c) {
    throw ShapeError(std::string(block) + ": input " + dims_string(x.dims()) +
                     " does not match parameters for [" + std::to_string(s) +
                     "x" + std::to_string(c) + "]");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MLP-Mixer

template <class V = Tensor>
struct MixerLayerParams {
  NormParams<V> norm1, norm2;
  LinearParams<V> f1;  // [D_S x S]
  LinearParams<V> f2;  // [S x D_S]
  LinearParams<V> f3;  // [D_C x C]
  LinearParams<V> f4;  // [C x D_C]

  template <class U, class F>
  MixerLayerParams<U> transform(F&& f) const {
    return {norm1.template transform<U>(f), norm2.template transform<U>(f),
            f1.template transform<U>(f),    f2.template transform<U>(f),
            f3.template transform<U>(f),    f4.template transform<U>(f)};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    NormParams<V>::visit(self.norm1, prefix + "norm1.", f);
    NormParams<V>::visit(self.norm2, prefix + "norm2.", f);
    LinearParams<V>::visit(self.f1, prefix + "f1.", f);
    LinearParams<V>::visit(self.f2, prefix + "f2.", f);
    LinearParams<V>::visit(self.f3, prefix + "f3.", f);
    LinearParams<V>::visit(self.f4, prefix + "f4.", f);
  }
};

/// Token-mixing MLP over the transposed matrix, then a channel-mixing MLP,
/// each with a residual connection.
template <class V>
V mixer_layer(const V& x, const MixerLayerParams<V>& p) {
  detail::require_tokens(value_of(x), value_of(p.f1.weight).cols(),
                         value_of(p.norm1.gain).size(), "mixer_layer");
  V u = add(x, transpose(linear(gelu(linear(transpose(layer_norm(x, p.norm1)),
                                            p.f1)),
                                p.f2)));
  return add(u, linear(gelu(linear(layer_norm(u, p.norm2), p.f3)), p.f4));
}

// ---------------------------------------------------------------------------
// External attention

/// softmax(F F^T): the N x N map of the simplified self-attention.
template <class V>
V self_attention_map(const V& f) {
  return softmax_rows(matmul(f, transpose(f)));
}

/// Simplified self-attention, softmax(F F^T) F.
template <class V>
V simplified_self_attention(const V& f) {
  return matmul(self_attention_map(f), f);
}

/// Double-normalized F Mk^T: the N x S_mem map of external attention.
template <class V>
V external_attention_map(const V& f, const V& key_memory) {
  const Tensor& fv = value_of(f);
  const Tensor& mk = value_of(key_memory);
  fv.require_rank(2);
  mk.require_rank(2);
  if (fv.cols() != mk.cols()) {
    throw ShapeError("external_attention: feature width " +
                     dims_string(fv.dims()) + " does not match key memory " +
                     dims_string(mk.dims()));
  }
  return double_norm(matmul(f, transpose(key_memory)));
}

/// Attention against two learned memories: Norm(F Mk^T) Mv. Cost is linear
/// in the token count.
template <class V>
V external_attention(const V& f, const V& key_memory, const V& value_memory) {
  if (value_of(key_memory).dims() != value_of(value_memory).dims()) {
    throw ShapeError("external_attention: key memory " +
                     dims_string(value_of(key_memory).dims()) +
                     " and value memory " +
                     dims_string(value_of(value_memory).dims()) + " differ");
  }
  return matmul(external_attention_map(f, key_memory), value_memory);
}

/// The same computation written as two linear layers, without the residual:
/// f2(Norm(f1(F))).
template <class V>
V external_attention_linear_inner(const V& f, const LinearParams<V>& f1,
                                  const LinearParams<V>& f2) {
  return linear(double_norm(linear(f, f1)), f2);
}

/// F + f2(Norm(f1(F))).
template <class V>
V external_attention_linear(const V& f, const LinearParams<V>& f1,
                            const LinearParams<V>& f2) {
  const Tensor& out_w = value_of(f2.weight);
  if (out_w.rows() != value_of(f).cols()) {
    throw ShapeError("external_attention_linear: f2 output extent " +
                     std::to_string(out_w.rows()) +
                     " does not match feature width of " +
                     dims_string(value_of(f).dims()));
  }
  return add(f, external_attention_linear_inner(f, f1, f2));
}

/**
 * Per-head memories plus the merge layer of multi-head external attention.
 * keys[h] and values[h] are [S_mem x d] with d * heads == C.
 */
template <class V = Tensor>
struct ExternalAttentionParams {
  std::vector<V> keys;
  std::vector<V> values;
  LinearParams<V> merge;  // [C x C]

  std::size_t heads() const { return keys.size(); }

  template <class U, class F>
  ExternalAttentionParams<U> transform(F&& f) const {
    ExternalAttentionParams<U> out;
    for (const auto& k : keys) out.keys.push_back(f(k));
    for (const auto& v : values) out.values.push_back(f(v));
    out.merge = merge.template transform<U>(f);
    return out;
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    for (std::size_t h = 0; h < self.keys.size(); ++h) {
      f(prefix + "head" + std::to_string(h) + ".key_memory", self.keys[h]);
      f(prefix + "head" + std::to_string(h) + ".value_memory", self.values[h]);
    }
    LinearParams<V>::visit(self.merge, prefix + "merge.", f);
  }
};

/// Single-head form on the first head's memories.
template <class V>
V external_attention(const V& f, const ExternalAttentionParams<V>& p) {
  if (p.keys.empty()) throw ConfigError("external_attention: no memories");
  return external_attention(f, p.keys[0], p.values[0]);
}

/**
 * Splits channels into heads contiguous groups, runs external attention per
 * head against that head's memories, concatenates, merges with a C x C
 * linear layer and adds the residual.
 */
template <class V>
V multi_head_external_attention(const V& f, const ExternalAttentionParams<V>& p,
                                std::size_t heads) {
  const Tensor& fv = value_of(f);
  fv.require_rank(2);
  const std::size_t c = fv.cols();
  if (heads == 0 || c % heads != 0) {
    throw ConfigError("multi_head_external_attention: channel count " +
                      std::to_string(c) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (p.keys.size() != heads || p.values.size() != heads) {
    throw ConfigError("multi_head_external_attention: parameters hold " +
                      std::to_string(p.keys.size()) + " heads, expected " +
                      std::to_string(heads));
  }
  const std::size_t d = c / heads;
  std::vector<V> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    outs.push_back(
        external_attention(slice_cols(f, h * d, d), p.keys[h], p.values[h]));
  }
  V merged = heads == 1 ? outs.front() : concat_cols(outs);
  return add(f, linear(merged, p.merge));
}

template <class V>
V multi_head_external_attention(const V& f,
                                const ExternalAttentionParams<V>& p) {
  return multi_head_external_attention(f, p, p.heads());
}

/**
 * Model layer for the external-attention architecture: multi-head external
 * attention (with its residual) followed by a pre-normalized channel MLP.
 */
template <class V = Tensor>
struct ExternalAttentionLayerParams {
  ExternalAttentionParams<V> attn;
  NormParams<V> norm;
  LinearParams<V> f3;  // [D_C x C]
  LinearParams<V> f4;  // [C x D_C]

  template <class U, class F>
  ExternalAttentionLayerParams<U> transform(F&& f) const {
    return {attn.template transform<U>(f), norm.template transform<U>(f),
            f3.template transform<U>(f), f4.template transform<U>(f)};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    ExternalAttentionParams<V>::visit(self.attn, prefix + "attn.", f);
    NormParams<V>::visit(self.norm, prefix + "norm.", f);
    LinearParams<V>::visit(self.f3, prefix + "f3.", f);
    LinearParams<V>::visit(self.f4, prefix + "f4.", f);
  }
};

template <class V>
V external_attention_layer(const V& x, const ExternalAttentionLayerParams<V>& p) {
  V u = multi_head_external_attention(x, p.attn);
  return add(u, linear(gelu(linear(layer_norm(u, p.norm), p.f3)), p.f4));
}

// ---------------------------------------------------------------------------
// Feed-forward-only

template <class V = Tensor>
struct FFOnlyParams {
  LinearParams<V> f1;  // [D_C x C]
  LinearParams<V> f2;  // [C x D_C]
  LinearParams<V> f3;  // [D_S x S]
  LinearParams<V> f4;  // [S x D_S]
  NormParams<V> norm1;  // over C
  NormParams<V> norm2;  // over S (normalizes the transposed matrix)

  template <class U, class F>
  FFOnlyParams<U> transform(F&& f) const {
    return {f1.template transform<U>(f),    f2.template transform<U>(f),
            f3.template transform<U>(f),    f4.template transform<U>(f),
            norm1.template transform<U>(f), norm2.template transform<U>(f)};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    LinearParams<V>::visit(self.f1, prefix + "f1.", f);
    LinearParams<V>::visit(self.f2, prefix + "f2.", f);
    LinearParams<V>::visit(self.f3, prefix + "f3.", f);
    LinearParams<V>::visit(self.f4, prefix + "f4.", f);
    NormParams<V>::visit(self.norm1, prefix + "norm1.", f);
    NormParams<V>::visit(self.norm2, prefix + "norm2.", f);
  }
};

/// Channel MLP first, then a token MLP on the transposed matrix.
template <class V>
V ff_only_block(const V& x, const FFOnlyParams<V>& p) {
  detail::require_tokens(value_of(x), value_of(p.f3.weight).cols(),
                         value_of(p.f1.weight).cols(), "ff_only_block");
  V u = add(x, linear(gelu(linear(layer_norm(x, p.norm1), p.f1)), p.f2));
  return add(u, transpose(linear(
                    gelu(linear(layer_norm(transpose(u), p.norm2), p.f3)),
                    p.f4)));
}

// ---------------------------------------------------------------------------
// ResMLP

template <class V = Tensor>
struct ResMLPBlockParams {
  AffineParams<V> aff_pre1, aff_post1, aff_pre2, aff_post2;  // all over C
  LinearParams<V> f1;  // [S x S]
  LinearParams<V> f2;  // [D_C x C]
  LinearParams<V> f3;  // [C x D_C]

  template <class U, class F>
  ResMLPBlockParams<U> transform(F&& f) const {
    return {aff_pre1.template transform<U>(f), aff_post1.template transform<U>(f),
            aff_pre2.template transform<U>(f), aff_post2.template transform<U>(f),
            f1.template transform<U>(f),       f2.template transform<U>(f),
            f3.template transform<U>(f)};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    AffineParams<V>::visit(self.aff_pre1, prefix + "aff_pre1.", f);
    AffineParams<V>::visit(self.aff_post1, prefix + "aff_post1.", f);
    AffineParams<V>::visit(self.aff_pre2, prefix + "aff_pre2.", f);
    AffineParams<V>::visit(self.aff_post2, prefix + "aff_post2.", f);
    LinearParams<V>::visit(self.f1, prefix + "f1.", f);
    LinearParams<V>::visit(self.f2, prefix + "f2.", f);
    LinearParams<V>::visit(self.f3, prefix + "f3.", f);
  }
};

/// Activation-free token linear and a channel MLP, each wrapped in
/// per-channel affines that stand in for normalization.
template <class V>
V resmlp_block(const V& x, const ResMLPBlockParams<V>& p) {
  const Tensor& w1 = value_of(p.f1.weight);
  if (w1.rows() != w1.cols()) {
    throw ShapeError("resmlp_block: token linear must be square, got " +
                     dims_string(w1.dims()));
  }
  detail::require_tokens(value_of(x), w1.rows(), value_of(p.aff_pre1.alpha).size(),
                         "resmlp_block");
  V u = add(x, affine(transpose(linear(transpose(affine(x, p.aff_pre1)), p.f1)),
                      p.aff_post1));
  return add(u, affine(linear(gelu(linear(affine(u, p.aff_pre2), p.f2)), p.f3),
                       p.aff_post2));
}

/**
 * Inference form of a ResMLP block with every affine folded away:
 *   U = X + (W1 X) Diag(token_scale) + token_shift
 *   Y = U + f3(gelu(f2(U)))
 * The token affines are per-channel while W1 mixes tokens, so they fold
 * into a channel scale and an [S x C] shift rather than into W1 itself.
 */
struct FoldedResMLPBlock {
  Tensor token_weight;  // [S x S]
  Tensor token_scale;   // [C]
  Tensor token_shift;   // [S x C]
  LinearParams<> f2;
  LinearParams<> f3;
};

inline FoldedResMLPBlock fold_resmlp_block(const ResMLPBlockParams<>& p) {
  const Tensor& w1 = p.f1.weight;
  const std::size_t s = w1.rows(), c = p.aff_pre1.alpha.size();
  FoldedResMLPBlock out{w1, Tensor({c}), Tensor({s, c}),
                        fold_affine(p.aff_pre2, p.f2),
                        absorb_affine_output(p.f3, p.aff_post2)};
  for (std::size_t j = 0; j < c; ++j)
    out.token_scale[j] = p.aff_pre1.alpha[j] * p.aff_post1.alpha[j];
  for (std::size_t i = 0; i < s; ++i) {
    double row_sum = 0.0;
    for (std::size_t k = 0; k < s; ++k) row_sum += w1(i, k);
    for (std::size_t j = 0; j < c; ++j) {
      out.token_shift(i, j) =
          (row_sum * p.aff_pre1.beta[j] + p.f1.bias[i]) * p.aff_post1.alpha[j] +
          p.aff_post1.beta[j];
    }
  }
  return out;
}

inline Tensor resmlp_block_folded(const Tensor& x, const FoldedResMLPBlock& p) {
  detail::require_tokens(x, p.token_weight.rows(), p.token_scale.size(),
                         "resmlp_block_folded");
  Tensor mixed = matmul(p.token_weight, x);
  for (std::size_t i = 0; i < mixed.rows(); ++i)
    for (std::size_t j = 0; j < mixed.cols(); ++j)
      mixed(i, j) = mixed(i, j) * p.token_scale[j] + p.token_shift(i, j);
  Tensor u = add(x, mixed);
  return add(u, linear(gelu(linear(u, p.f2)), p.f3));
}

/// Fills every array of a parameter bundle with uniform draws in [lo, hi].
template <template <class> class Params>
void randomize(Params<Tensor>& p, Rng& rng, double lo, double hi) {
  Params<Tensor>::visit(p, "", [&](const std::string&, Tensor& t) {
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
  });
}

// ---------------------------------------------------------------------------
// Initialization: zero biases, weights uniform in [-s, s] with
// s = sqrt(1 / fan_in), affines and norms at identity.

inline Tensor init_weight(Rng& rng, std::size_t out, std::size_t in) {
  const double s = std::sqrt(1.0 / static_cast<double>(in));
  return rng.tensor({out, in}, -s, s);
}

inline LinearParams<> init_linear(Rng& rng, std::size_t out, std::size_t in) {
  return {init_weight(rng, out, in), Tensor({out})};
}

inline MixerLayerParams<> init_mixer_layer(Rng& rng, std::size_t s,
                                           std::size_t c, std::size_t ds,
                                           std::size_t dc) {
  MixerLayerParams<> p;
  p.norm1 = unit_norm(c);
  p.norm2 = unit_norm(c);
  p.f1 = init_linear(rng, ds, s);
  p.f2 = init_linear(rng, s, ds);
  p.f3 = init_linear(rng, dc, c);
  p.f4 = init_linear(rng, c, dc);
  return p;
}

inline ExternalAttentionParams<> init_external_attention(Rng& rng,
                                                         std::size_t c,
                                                         std::size_t memory,
                                                         std::size_t heads) {
  if (heads == 0 || c % heads != 0) {
    throw ConfigError("external attention: channels " + std::to_string(c) +
                      " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t d = c / heads;
  ExternalAttentionParams<> p;
  for (std::size_t h = 0; h < heads; ++h) {
    // Mk acts as a linear layer with fan-in d, Mv^T with fan-in S_mem.
    p.keys.push_back(init_weight(rng, memory, d));
    const double s = std::sqrt(1.0 / static_cast<double>(memory));
    p.values.push_back(rng.tensor({memory, d}, -s, s));
  }
  p.merge = init_linear(rng, c, c);
  return p;
}

inline ExternalAttentionLayerParams<> init_external_attention_layer(
    Rng& rng, std::size_t c, std::size_t dc, std::size_t memory,
    std::size_t heads) {
  ExternalAttentionLayerParams<> p;
  p.attn = init_external_attention(rng, c, memory, heads);
  p.norm = unit_norm(c);
  p.f3 = init_linear(rng, dc, c);
  p.f4 = init_linear(rng, c, dc);
  return p;
}

inline FFOnlyParams<> init_ff_only(Rng& rng, std::size_t s, std::size_t c,
                                   std::size_t ds, std::size_t dc) {
  FFOnlyParams<> p;
  p.f1 = init_linear(rng, dc, c);
  p.f2 = init_linear(rng, c, dc);
  p.f3 = init_linear(rng, ds, s);
  p.f4 = init_linear(rng, s, ds);
  p.norm1 = unit_norm(c);
  p.norm2 = unit_norm(s);
  return p;
}

inline ResMLPBlockParams<> init_resmlp_block(Rng& rng, std::size_t s,
                                             std::size_t c, std::size_t dc) {
  ResMLPBlockParams<> p;
  p.aff_pre1 = identity_affine(c);
  p.aff_post1 = identity_affine(c);
  p.aff_pre2 = identity_affine(c);
  p.aff_post2 = identity_affine(c);
  p.f1 = init_linear(rng, s, s);
  p.f2 = init_linear(rng, dc, c);
  p.f3 = init_linear(rng, c, dc);
  return p;
}

}  // namespace linmix
