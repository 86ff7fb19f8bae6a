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

// Reference computations for tests. The block references use explicit index
// loops over plain doubles and never call the library's ops. The cost
// references count by enumeration and by the runtime counter.

#pragma once

#include <cmath>
#include <vector>

#include "linmix/linmix.hpp"

namespace linmix::oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid grid(std::size_t rows, std::size_t cols) {
  return Grid(rows, std::vector<double>(cols, 0.0));
}

inline Grid to_grid(const Tensor& t) {
  Grid g = grid(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) g[i][j] = t(i, j);
  return g;
}

inline double max_gap(const Grid& g, const Tensor& t) {
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j)
      worst = std::max(worst, std::abs(g[i][j] - t(i, j)));
  return worst;
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

// Row-wise layer norm: each row normalized over its entries.
inline Grid norm_rows(const Grid& x, const Tensor& gain, const Tensor& bias,
                      double eps) {
  Grid y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(x[i].size());
    double mean = 0.0;
    for (double v : x[i]) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < x[i].size(); ++j)
      y[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * gain[j] + bias[j];
  }
  return y;
}

// Column-wise layer norm: each column normalized over the rows.
inline Grid norm_cols(const Grid& x, const Tensor& gain, const Tensor& bias,
                      double eps) {
  Grid y = x;
  const std::size_t rows = x.size(), cols = x[0].size();
  for (std::size_t j = 0; j < cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < rows; ++i) mean += x[i][j];
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t i = 0; i < rows; ++i) var += (x[i][j] - mean) * (x[i][j] - mean);
    var /= static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i)
      y[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * gain[i] + bias[i];
  }
  return y;
}

// out[i][j] = x[i][j] + sum_k W2[j][k] gelu(b1[k] + sum_t W1[k][t] z[i][t]) + b2[j]
// with z the (already normalized) rows; the hidden MLP acts along each row.
inline Grid row_mlp(const Grid& z, const LinearParams<>& a, const LinearParams<>& b) {
  const std::size_t hidden = a.weight.rows(), width = b.weight.rows();
  Grid out = grid(z.size(), width);
  for (std::size_t i = 0; i < z.size(); ++i) {
    std::vector<double> h(hidden);
    for (std::size_t k = 0; k < hidden; ++k) {
      double s = a.bias[k];
      for (std::size_t t = 0; t < z[i].size(); ++t) s += a.weight(k, t) * z[i][t];
      h[k] = gelu(s);
    }
    for (std::size_t j = 0; j < width; ++j) {
      double s = b.bias[j];
      for (std::size_t k = 0; k < hidden; ++k) s += b.weight(j, k) * h[k];
      out[i][j] = s;
    }
  }
  return out;
}

// Same MLP acting down each column.
inline Grid col_mlp(const Grid& z, const LinearParams<>& a, const LinearParams<>& b) {
  const std::size_t hidden = a.weight.rows(), height = b.weight.rows();
  const std::size_t cols = z[0].size();
  Grid out = grid(height, cols);
  for (std::size_t j = 0; j < cols; ++j) {
    std::vector<double> h(hidden);
    for (std::size_t k = 0; k < hidden; ++k) {
      double s = a.bias[k];
      for (std::size_t t = 0; t < z.size(); ++t) s += a.weight(k, t) * z[t][j];
      h[k] = gelu(s);
    }
    for (std::size_t i = 0; i < height; ++i) {
      double s = b.bias[i];
      for (std::size_t k = 0; k < hidden; ++k) s += b.weight(i, k) * h[k];
      out[i][j] = s;
    }
  }
  return out;
}

inline Grid plus(const Grid& x, const Grid& y) {
  Grid out = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j) out[i][j] += y[i][j];
  return out;
}

/// Token MLP down the columns of LN(X), then a channel MLP along the rows.
inline Grid mixer(const Tensor& x_in, const MixerLayerParams<>& p) {
  const Grid x = to_grid(x_in);
  const Grid u = plus(x, col_mlp(norm_rows(x, p.norm1.gain, p.norm1.bias, p.norm1.eps),
                                 p.f1, p.f2));
  return plus(u, row_mlp(norm_rows(u, p.norm2.gain, p.norm2.bias, p.norm2.eps),
                         p.f3, p.f4));
}

/// Channel MLP along the rows, then a token MLP down columns normalized over
/// tokens.
inline Grid ff_only(const Tensor& x_in, const FFOnlyParams<>& p) {
  const Grid x = to_grid(x_in);
  const Grid u = plus(x, row_mlp(norm_rows(x, p.norm1.gain, p.norm1.bias, p.norm1.eps),
                                 p.f1, p.f2));
  return plus(u, col_mlp(norm_cols(u, p.norm2.gain, p.norm2.bias, p.norm2.eps),
                         p.f3, p.f4));
}

inline Grid scale_shift(const Grid& x, const AffineParams<>& a) {
  Grid out = x;
  for (auto& row : out)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = a.alpha[j] * row[j] + a.beta[j];
  return out;
}

/// Affine-wrapped token linear, then an affine-wrapped channel MLP.
inline Grid resmlp(const Tensor& x_in, const ResMLPBlockParams<>& p) {
  const Grid x = to_grid(x_in);
  const Grid a = scale_shift(x, p.aff_pre1);
  const std::size_t s = x.size(), c = x[0].size();
  Grid mixed = grid(s, c);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double v = p.f1.bias[i];
      for (std::size_t t = 0; t < s; ++t) v += p.f1.weight(i, t) * a[t][j];
      mixed[i][j] = v;
    }
  const Grid u = plus(x, scale_shift(mixed, p.aff_post1));
  return plus(u, scale_shift(row_mlp(scale_shift(u, p.aff_pre2), p.f2, p.f3),
                             p.aff_post2));
}

/// A random valid configuration of `arch` at test scale.
inline ModelConfig random_config(Rng& rng, Arch arch) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.patch = 1 + rng.below(4);
  cfg.height = cfg.patch * (1 + rng.below(3));
  cfg.width = cfg.patch * (1 + rng.below(3));
  cfg.channels = 1 + rng.below(3);
  cfg.heads = 1 + rng.below(3);
  cfg.embed_dim = arch == Arch::ext_attn ? cfg.heads * (1 + rng.below(4))
                                         : 1 + rng.below(8);
  cfg.depth = rng.below(4);
  cfg.token_hidden = 1 + rng.below(8);
  cfg.channel_hidden = 1 + rng.below(8);
  cfg.memory = 1 + rng.below(6);
  cfg.classes = 2 + rng.below(4);
  cfg.seed = rng.below(1000);
  return cfg;
}

/// Sum of the lengths of every learnable array of the built model.
inline std::uint64_t enumerated_params(const ModelConfig& cfg) {
  const Model<> m = build_model(cfg);
  std::uint64_t n = 0;
  Model<>::visit(m, "", [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

/// Operation counter reading across one forward pass on a zero image.
inline std::uint64_t instrumented_flops(const ModelConfig& cfg) {
  const Model<> m = build_model(cfg);
  const Tensor img({cfg.channels, cfg.height, cfg.width});
  const FlopScope scope;
  forward_logits(m, img);
  return scope.count();
}

}  // namespace linmix::oracle
