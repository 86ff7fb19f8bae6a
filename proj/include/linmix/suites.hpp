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

// Self-checking property suites run by `linmix check`.
//
//   gradcheck    central differences against the tape for every op, block
//                and end-to-end model
//   equivalence  alternative formulations that must agree numerically
//   invariants   normalization sums, residual identity, shapes, token reach
//
// Every draw gets its own seed (base + 1000 * check + draw) so a failure can
// be replayed from the reported seed alone.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "linmix/gradcheck.hpp"
#include "linmix/model.hpp"

namespace linmix {

struct CheckResult {
  std::string property;
  bool passed = false;
  double worst = 0.0;      // worst error, or smallest value for lower bounds
  double tolerance = 0.0;
  bool lower_bound = false;  // passes when worst >= tolerance
  std::uint64_t seed = 0;    // seed of the worst draw
  std::string detail;        // exception text when a draw threw
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.passed; });
  }
  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(
        checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; }));
  }
};

inline std::string format_check(const CheckResult& c) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s %-56s worst=%.3e %s %.1e seed=%llu",
                c.passed ? "PASS" : "FAIL", c.property.c_str(), c.worst,
                c.lower_bound ? ">=" : "<=", c.tolerance,
                static_cast<unsigned long long>(c.seed));
  std::string line = buf;
  if (!c.detail.empty()) line += "  (" + c.detail + ")";
  return line;
}

inline std::string format_report(const SuiteReport& r) {
  std::string out;
  for (const auto& c : r.checks) out += format_check(c) + "\n";
  out += r.suite + ": " + std::to_string(r.checks.size() - r.failures()) + "/" +
         std::to_string(r.checks.size()) + " checks passed\n";
  return out;
}

namespace suite {

// Desk dimensions shared by the block-level checks.
inline constexpr std::size_t kTokens = 4;
inline constexpr std::size_t kChannels = 8;
inline constexpr std::size_t kTokenHidden = 6;
inline constexpr std::size_t kChannelHidden = 16;
inline constexpr std::size_t kMemory = 5;
inline constexpr std::size_t kHeads = 2;
inline constexpr int kGradDraws = 10;
inline constexpr int kTrials = 100;
inline constexpr double kGradTol = 1e-4;

class Runner {
 public:
  Runner(std::string suite, std::uint64_t base_seed)
      : report_{std::move(suite), {}}, base_(base_seed) {}

  /// Each draw returns an error that must stay <= tol.
  template <class F>
  void upper(const std::string& property, double tol, int draws, F&& draw) {
    run(property, tol, false, draws, draw);
  }
  /// Each draw returns a value that must stay >= tol.
  template <class F>
  void lower(const std::string& property, double tol, int draws, F&& draw) {
    run(property, tol, true, draws, draw);
  }

  SuiteReport take() { return std::move(report_); }

 private:
  template <class F>
  void run(const std::string& property, double tol, bool lower, int draws,
           F& draw) {
    CheckResult c{property, true, lower ? INFINITY : 0.0, tol, lower, 0, {}};
    const std::uint64_t first = base_ + 1000 * report_.checks.size();
    for (int k = 0; k < draws; ++k) {
      const std::uint64_t seed = first + static_cast<std::uint64_t>(k);
      Rng rng(seed);
      double v;
      try {
        v = draw(rng);
      } catch (const Error& e) {
        c.passed = false;
        c.seed = seed;
        c.detail = e.what();
        break;
      }
      const bool worse = std::isnan(v) || (lower ? v < c.worst : v > c.worst);
      if (worse || k == 0) {
        c.worst = v;
        c.seed = seed;
      }
      if (std::isnan(v) || (lower ? v < tol : v > tol)) c.passed = false;
    }
    report_.checks.push_back(std::move(c));
  }

  SuiteReport report_;
  std::uint64_t base_;
};

inline Tensor uniform(Rng& rng, Dims dims, double lo = -1.0, double hi = 1.0) {
  return rng.tensor(std::move(dims), lo, hi);
}

inline std::size_t extent(Rng& rng, std::size_t hi) { return 1 + rng.below(hi); }

/// Gradient check of a generic op on one input, scalarized by a random
/// weighting of its output.
template <class Op>
double input_check(Rng& rng, const Tensor& x, Op&& op) {
  const Tensor w = uniform(rng, op(x).dims());
  return finite_diff_check(
      [&](const auto& v) {
        auto y = op(v);
        return sum_all(mul(y, lift(w, y)));
      },
      x);
}

/// Gradient check over every array of a parameter bundle; `op` lifts its
/// own constant inputs.
template <template <class> class Params, class Op>
double params_check(Rng& rng, const Params<Tensor>& p, Op&& op) {
  const Tensor w = uniform(rng, op(p).dims());
  return params_gradcheck<Params>(p, [&](const auto& q) {
    auto y = op(q);
    return sum_all(mul(y, lift(w, y)));
  });
}

template <class V = Tensor>
struct LinearPair {
  LinearParams<V> f1, f2;

  template <class U, class F>
  LinearPair<U> transform(F&& f) const {
    return {f1.template transform<U>(f), f2.template transform<U>(f)};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    LinearParams<V>::visit(self.f1, prefix + "f1.", f);
    LinearParams<V>::visit(self.f2, prefix + "f2.", f);
  }
};

template <template <class> class Params>
Params<Tensor> randomized(Params<Tensor> p, Rng& rng) {
  randomize(p, rng, -1.0, 1.0);
  return p;
}

inline MixerLayerParams<> random_mixer(Rng& rng, std::size_t s, std::size_t c) {
  return randomized(init_mixer_layer(rng, s, c, kTokenHidden, kChannelHidden), rng);
}
inline ExternalAttentionLayerParams<> random_ext_attn(Rng& rng, std::size_t c,
                                                      std::size_t heads) {
  return randomized(
      init_external_attention_layer(rng, c, kChannelHidden, kMemory, heads), rng);
}
inline FFOnlyParams<> random_ff_only(Rng& rng, std::size_t s, std::size_t c) {
  return randomized(init_ff_only(rng, s, c, kTokenHidden, kChannelHidden), rng);
}
inline ResMLPBlockParams<> random_resmlp(Rng& rng, std::size_t s, std::size_t c) {
  return randomized(init_resmlp_block(rng, s, c, kChannelHidden), rng);
}

/// One randomized block of `arch` at S x C, as a Layer.
inline Layer<> random_layer(Arch arch, Rng& rng, std::size_t s, std::size_t c) {
  switch (arch) {
    case Arch::mixer: return random_mixer(rng, s, c);
    case Arch::ext_attn: return random_ext_attn(rng, c, c % kHeads == 0 ? kHeads : 1);
    case Arch::ff_only: return random_ff_only(rng, s, c);
    case Arch::resmlp: return random_resmlp(rng, s, c);
  }
  throw ConfigError("random_layer: unknown arch");
}

/// Zeroes every parameter that feeds a residual branch, leaving norms and
/// affines at their initial identity values.
inline Layer<> residual_floor(Arch arch, std::size_t s, std::size_t c) {
  Rng rng(0);
  switch (arch) {
    case Arch::mixer: {
      auto p = init_mixer_layer(rng, s, c, kTokenHidden, kChannelHidden);
      p.f1 = zero_linear(kTokenHidden, s);
      p.f2 = zero_linear(s, kTokenHidden);
      p.f3 = zero_linear(kChannelHidden, c);
      p.f4 = zero_linear(c, kChannelHidden);
      return p;
    }
    case Arch::ext_attn: {
      auto p = init_external_attention_layer(rng, c, kChannelHidden, kMemory, kHeads);
      p.attn.merge = zero_linear(c, c);
      p.f3 = zero_linear(kChannelHidden, c);
      p.f4 = zero_linear(c, kChannelHidden);
      return p;
    }
    case Arch::ff_only: {
      auto p = init_ff_only(rng, s, c, kTokenHidden, kChannelHidden);
      p.f1 = zero_linear(kChannelHidden, c);
      p.f2 = zero_linear(c, kChannelHidden);
      p.f3 = zero_linear(kTokenHidden, s);
      p.f4 = zero_linear(s, kTokenHidden);
      return p;
    }
    case Arch::resmlp: {
      auto p = init_resmlp_block(rng, s, c, kChannelHidden);
      p.f1 = zero_linear(s, s);
      p.f2 = zero_linear(kChannelHidden, c);
      p.f3 = zero_linear(c, kChannelHidden);
      return p;
    }
  }
  throw ConfigError("residual_floor: unknown arch");
}

/**
 * Central-difference token-pair sensitivities of a token map:
 * out(i, j) = sum over channels of |d Y[i, :] / d X[j, :]|.
 */
template <class F>
Tensor token_sensitivity(F&& f, const Tensor& x, double step = 1e-5) {
  const std::size_t s = x.rows(), c = x.cols();
  Tensor sens({s, s});
  Tensor probe = x;
  for (std::size_t j = 0; j < s; ++j) {
    for (std::size_t k = 0; k < c; ++k) {
      probe(j, k) = x(j, k) + step;
      const Tensor up = f(probe);
      probe(j, k) = x(j, k) - step;
      const Tensor down = f(probe);
      probe(j, k) = x(j, k);
      for (std::size_t i = 0; i < s; ++i)
        for (std::size_t o = 0; o < up.cols(); ++o)
          sens(i, j) += std::abs(up(i, o) - down(i, o)) / (2.0 * step);
    }
  }
  return sens;
}

inline ModelConfig desk_config(Arch arch) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.height = 8;
  cfg.width = 8;
  cfg.patch = 4;
  cfg.embed_dim = kChannels;
  cfg.depth = 1;
  cfg.token_hidden = kTokenHidden;
  cfg.channel_hidden = kChannelHidden;
  cfg.memory = kMemory;
  cfg.heads = kHeads;
  cfg.classes = 3;
  return cfg;
}

inline Model<> random_model(const ModelConfig& cfg, Rng& rng) {
  Model<> m = build_model(cfg);
  randomize(m, rng, -1.0, 1.0);
  return m;
}

// ---------------------------------------------------------------------------

inline void gradcheck_ops(Runner& r) {
  const double tol = kGradTol;
  const int n = kGradDraws;
  auto x34 = [](Rng& rng) { return uniform(rng, {3, 4}); };

  r.upper("op.matmul.lhs", tol, n, [&](Rng& rng) {
    const Tensor b = uniform(rng, {4, 5});
    return input_check(rng, x34(rng),
                       [&](const auto& v) { return matmul(v, lift(b, v)); });
  });
  r.upper("op.matmul.rhs", tol, n, [&](Rng& rng) {
    const Tensor a = uniform(rng, {2, 3});
    return input_check(rng, x34(rng),
                       [&](const auto& v) { return matmul(lift(a, v), v); });
  });
  r.upper("op.transpose", tol, n, [&](Rng& rng) {
    return input_check(rng, x34(rng), [](const auto& v) { return transpose(v); });
  });
  r.upper("op.add", tol, n, [&](Rng& rng) {
    const Tensor b = x34(rng);
    return input_check(rng, x34(rng), [&](const auto& v) {
      return add(add(v, lift(b, v)), mul(v, v));
    });
  });
  r.upper("op.sub", tol, n, [&](Rng& rng) {
    const Tensor b = x34(rng);
    return input_check(rng, x34(rng), [&](const auto& v) {
      return sub(lift(b, v), mul(v, v));
    });
  });
  r.upper("op.mul", tol, n, [&](Rng& rng) {
    const Tensor b = x34(rng);
    return input_check(rng, x34(rng),
                       [&](const auto& v) { return mul(v, lift(b, v)); });
  });
  r.upper("op.add_scalar", tol, n, [&](Rng& rng) {
    return input_check(rng, x34(rng),
                       [](const auto& v) { return mul(add(v, 0.5), v); });
  });
  r.upper("op.scale", tol, n, [&](Rng& rng) {
    return input_check(rng, x34(rng),
                       [](const auto& v) { return mul(scale(v, -2.5), v); });
  });
  r.upper("op.gelu", tol, n, [&](Rng& rng) {
    return input_check(rng, x34(rng), [](const auto& v) { return gelu(v); });
  });
  for (Axis axis : {Axis::rows, Axis::cols}) {
    for (Stat stat : {Stat::sum, Stat::mean, Stat::var}) {
      const std::string name =
          std::string("op.reduce.") + (axis == Axis::rows ? "rows." : "cols.") +
          (stat == Stat::sum ? "sum" : stat == Stat::mean ? "mean" : "var");
      r.upper(name, tol, n, [&](Rng& rng) {
        return input_check(rng, x34(rng),
                           [&](const auto& v) { return reduce(v, axis, stat); });
      });
    }
  }
  r.upper("op.sum_all", tol, n, [&](Rng& rng) {
    return input_check(rng, x34(rng),
                       [](const auto& v) { return sum_all(mul(v, v)); });
  });
  r.upper("op.reshape", tol, n, [&](Rng& rng) {
    return input_check(rng, x34(rng), [](const auto& v) {
      return mul(reshape(v, Dims{2, 6}), reshape(v, Dims{2, 6}));
    });
  });
  r.upper("op.slice_concat", tol, n, [&](Rng& rng) {
    return input_check(rng, x34(rng), [](const auto& v) {
      using V = std::decay_t<decltype(v)>;
      return concat_cols(std::vector<V>{mul(slice_cols(v, 2, 2), slice_cols(v, 0, 2)),
                                        slice_cols(v, 1, 1)});
    });
  });
  r.upper("op.linear.input", tol, n, [&](Rng& rng) {
    const Tensor w = uniform(rng, {5, 4}), b = uniform(rng, {5});
    return input_check(rng, x34(rng), [&](const auto& v) {
      return gelu(linear(v, lift(w, v), lift(b, v)));
    });
  });
  r.upper("op.linear.params", tol, n, [&](Rng& rng) {
    const Tensor x = x34(rng);
    const LinearParams<> p{uniform(rng, {5, 4}), uniform(rng, {5})};
    return params_check<LinearParams>(rng, p, [&](const auto& q) {
      return gelu(linear(lift(x, q.weight), q));
    });
  });
  r.upper("op.softmax_rows", tol, n, [&](Rng& rng) {
    return input_check(rng, scale(x34(rng), 3.0),
                       [](const auto& v) { return softmax_rows(v); });
  });
  r.upper("op.layer_norm.input", tol, n, [&](Rng& rng) {
    const NormParams<> p{uniform(rng, {4}), uniform(rng, {4})};
    return input_check(rng, x34(rng), [&](const auto& v) {
      return layer_norm(v, lift(p.gain, v), lift(p.bias, v), p.eps);
    });
  });
  r.upper("op.layer_norm.params", tol, n, [&](Rng& rng) {
    const Tensor x = x34(rng);
    const NormParams<> p{uniform(rng, {4}), uniform(rng, {4})};
    return params_check<NormParams>(rng, p, [&](const auto& q) {
      return layer_norm(lift(x, q.gain), q);
    });
  });
  r.upper("op.double_norm", tol, n, [&](Rng& rng) {
    return input_check(rng, scale(x34(rng), 3.0),
                       [](const auto& v) { return double_norm(v); });
  });
  r.upper("op.affine.input", tol, n, [&](Rng& rng) {
    const AffineParams<> p{uniform(rng, {4}), uniform(rng, {4})};
    return input_check(rng, x34(rng), [&](const auto& v) {
      return mul(affine(v, lift(p.alpha, v), lift(p.beta, v)), v);
    });
  });
  r.upper("op.affine.params", tol, n, [&](Rng& rng) {
    const Tensor x = x34(rng);
    const AffineParams<> p{uniform(rng, {4}), uniform(rng, {4})};
    return params_check<AffineParams>(rng, p, [&](const auto& q) {
      auto y = affine(lift(x, q.alpha), q);
      return mul(y, y);
    });
  });
  r.upper("op.cross_entropy", tol, n, [&](Rng& rng) {
    const std::size_t label = rng.below(5);
    return input_check(rng, scale(uniform(rng, {5}), 4.0),
                       [&](const auto& v) { return cross_entropy(v, label); });
  });
}

inline void gradcheck_blocks(Runner& r) {
  const double tol = kGradTol;
  const int n = kGradDraws;
  const std::size_t s = kTokens, c = kChannels, m = kMemory;
  auto tokens = [&](Rng& rng) { return uniform(rng, {s, c}); };

  r.upper("block.patch_embed.params", tol, n, [&](Rng& rng) {
    const Tensor patches = extract_patches(uniform(rng, {2, 8, 8}), 4);
    const PatchEmbedParams<> p{{uniform(rng, {c, 32}), uniform(rng, {c})}};
    return params_check<PatchEmbedParams>(rng, p, [&](const auto& q) {
      return embed(lift(patches, q.proj.weight), q);
    });
  });
  r.upper("block.mixer.input", tol, n, [&](Rng& rng) {
    const auto p = random_mixer(rng, s, c);
    return input_check(rng, tokens(rng), [&](const auto& v) {
      return mixer_layer(v, p.template transform<std::decay_t<decltype(v)>>(
                                [&](const Tensor& t) { return lift(t, v); }));
    });
  });
  r.upper("block.mixer.params", tol, n, [&](Rng& rng) {
    const Tensor x = tokens(rng);
    return params_check<MixerLayerParams>(rng, random_mixer(rng, s, c), [&](const auto& q) {
      return mixer_layer(lift(x, q.f1.weight), q);
    });
  });
  r.upper("block.self_attention", tol, n, [&](Rng& rng) {
    return input_check(rng, tokens(rng),
                       [](const auto& v) { return simplified_self_attention(v); });
  });
  r.upper("block.external_attention.input", tol, n, [&](Rng& rng) {
    const Tensor mk = uniform(rng, {m, c}), mv = uniform(rng, {m, c});
    return input_check(rng, tokens(rng), [&](const auto& v) {
      return external_attention(v, lift(mk, v), lift(mv, v));
    });
  });
  r.upper("block.external_attention.memories", tol, n, [&](Rng& rng) {
    const Tensor x = tokens(rng);
    ExternalAttentionParams<> p;
    p.keys.push_back(uniform(rng, {m, c}));
    p.values.push_back(uniform(rng, {m, c}));
    p.merge = {uniform(rng, {c, c}), uniform(rng, {c})};
    return params_check<ExternalAttentionParams>(rng, p, [&](const auto& q) {
      return external_attention(lift(x, q.keys[0]), q);
    });
  });
  r.upper("block.external_attention_linear.input", tol, n, [&](Rng& rng) {
    const LinearParams<> f1{uniform(rng, {m, c}), uniform(rng, {m})};
    const LinearParams<> f2{uniform(rng, {c, m}), uniform(rng, {c})};
    return input_check(rng, tokens(rng), [&](const auto& v) {
      using V = std::decay_t<decltype(v)>;
      auto bind = [&](const Tensor& t) { return lift(t, v); };
      return external_attention_linear(v, f1.template transform<V>(bind),
                                       f2.template transform<V>(bind));
    });
  });
  r.upper("block.external_attention_linear.params", tol, n, [&](Rng& rng) {
    const Tensor x = tokens(rng);
    const LinearPair<> p{{uniform(rng, {m, c}), uniform(rng, {m})},
                         {uniform(rng, {c, m}), uniform(rng, {c})}};
    return params_check<LinearPair>(rng, p, [&](const auto& q) {
      return external_attention_linear(lift(x, q.f1.weight), q.f1, q.f2);
    });
  });
  r.upper("block.multi_head_external_attention.input", tol, n, [&](Rng& rng) {
    const auto p = random_ext_attn(rng, c, kHeads).attn;
    return input_check(rng, tokens(rng), [&](const auto& v) {
      return multi_head_external_attention(
          v, p.template transform<std::decay_t<decltype(v)>>(
                 [&](const Tensor& t) { return lift(t, v); }));
    });
  });
  r.upper("block.multi_head_external_attention.params", tol, n, [&](Rng& rng) {
    const Tensor x = tokens(rng);
    return params_check<ExternalAttentionParams>(
        rng, random_ext_attn(rng, c, kHeads).attn, [&](const auto& q) {
          return multi_head_external_attention(lift(x, q.merge.weight), q);
        });
  });
  r.upper("block.ext_attn_layer.input", tol, n, [&](Rng& rng) {
    const auto p = random_ext_attn(rng, c, kHeads);
    return input_check(rng, tokens(rng), [&](const auto& v) {
      return external_attention_layer(
          v, p.template transform<std::decay_t<decltype(v)>>(
                 [&](const Tensor& t) { return lift(t, v); }));
    });
  });
  r.upper("block.ext_attn_layer.params", tol, n, [&](Rng& rng) {
    const Tensor x = tokens(rng);
    return params_check<ExternalAttentionLayerParams>(
        rng, random_ext_attn(rng, c, kHeads), [&](const auto& q) {
          return external_attention_layer(lift(x, q.f3.weight), q);
        });
  });
  r.upper("block.ff_only.input", tol, n, [&](Rng& rng) {
    const auto p = random_ff_only(rng, s, c);
    return input_check(rng, tokens(rng), [&](const auto& v) {
      return ff_only_block(v, p.template transform<std::decay_t<decltype(v)>>(
                                  [&](const Tensor& t) { return lift(t, v); }));
    });
  });
  r.upper("block.ff_only.params", tol, n, [&](Rng& rng) {
    const Tensor x = tokens(rng);
    return params_check<FFOnlyParams>(rng, random_ff_only(rng, s, c), [&](const auto& q) {
      return ff_only_block(lift(x, q.f1.weight), q);
    });
  });
  r.upper("block.resmlp.input", tol, n, [&](Rng& rng) {
    const auto p = random_resmlp(rng, s, c);
    return input_check(rng, tokens(rng), [&](const auto& v) {
      return resmlp_block(v, p.template transform<std::decay_t<decltype(v)>>(
                                 [&](const Tensor& t) { return lift(t, v); }));
    });
  });
  r.upper("block.resmlp.params", tol, n, [&](Rng& rng) {
    const Tensor x = tokens(rng);
    return params_check<ResMLPBlockParams>(rng, random_resmlp(rng, s, c), [&](const auto& q) {
      return resmlp_block(lift(x, q.f1.weight), q);
    });
  });
}

inline void gradcheck_models(Runner& r) {
  for (Arch arch : kAllArchs) {
    r.upper("model." + arch_name(arch) + ".loss", kGradTol, kGradDraws, [&](Rng& rng) {
      const ModelConfig cfg = desk_config(arch);
      const Model<> model = random_model(cfg, rng);
      const Tensor image = uniform(rng, {1, 8, 8}, 0.0, 1.0);
      const std::size_t label = rng.below(cfg.classes);
      return params_gradcheck<Model>(model, [&](const auto& q) {
        return cross_entropy(forward_logits(q, image), label);
      });
    });
  }
}

// ---------------------------------------------------------------------------

inline void equivalence_checks(Runner& r) {
  r.upper("external_attention.memory_vs_linear", 1e-12, kTrials, [](Rng& rng) {
    const std::size_t n = extent(rng, 8), d = extent(rng, 8), m = extent(rng, 8);
    const Tensor f = uniform(rng, {n, d});
    const Tensor mk = uniform(rng, {m, d}), mv = uniform(rng, {m, d});
    const LinearParams<> f1{mk, Tensor({m})}, f2{transpose(mv), Tensor({d})};
    return max_abs_diff(external_attention(f, mk, mv),
                        external_attention_linear_inner(f, f1, f2));
  });
  r.upper("external_attention.single_head_vs_memory", 1e-12, kTrials, [](Rng& rng) {
    const std::size_t n = extent(rng, 8), d = extent(rng, 8), m = extent(rng, 8);
    const Tensor f = uniform(rng, {n, d});
    ExternalAttentionParams<> p;
    p.keys.push_back(uniform(rng, {m, d}));
    p.values.push_back(uniform(rng, {m, d}));
    p.merge = identity_linear(d);
    return max_abs_diff(multi_head_external_attention(f, p),
                        add(f, external_attention(f, p.keys[0], p.values[0])));
  });
  r.upper("affine.fold_input", 1e-12, kTrials, [](Rng& rng) {
    const std::size_t n = extent(rng, 8), in = extent(rng, 8), out = extent(rng, 8);
    const Tensor x = uniform(rng, {n, in});
    const AffineParams<> aff{uniform(rng, {in}), uniform(rng, {in})};
    const LinearParams<> lin{uniform(rng, {out, in}), uniform(rng, {out})};
    return max_abs_diff(linear(affine(x, aff), lin), linear(x, fold_affine(aff, lin)));
  });
  r.upper("affine.absorb_output", 1e-12, kTrials, [](Rng& rng) {
    const std::size_t n = extent(rng, 8), in = extent(rng, 8), out = extent(rng, 8);
    const Tensor x = uniform(rng, {n, in});
    const LinearParams<> lin{uniform(rng, {out, in}), uniform(rng, {out})};
    const AffineParams<> aff{uniform(rng, {out}), uniform(rng, {out})};
    return max_abs_diff(affine(linear(x, lin), aff),
                        linear(x, absorb_affine_output(lin, aff)));
  });
  r.upper("resmlp.fold_block", 1e-10, kTrials, [](Rng& rng) {
    const std::size_t s = extent(rng, 8), c = extent(rng, 8);
    const auto p = randomized(init_resmlp_block(rng, s, c, extent(rng, 8)), rng);
    const Tensor x = uniform(rng, {s, c});
    return max_abs_diff(resmlp_block(x, p), resmlp_block_folded(x, fold_resmlp_block(p)));
  });
  r.upper("resmlp.fold_model", 1e-10, kTrials, [](Rng& rng) {
    ModelConfig cfg = desk_config(Arch::resmlp);
    cfg.depth = 2;
    const Model<> m = random_model(cfg, rng);
    const Tensor image = uniform(rng, {1, 8, 8}, 0.0, 1.0);
    return max_abs_diff(forward_logits(m, image),
                        forward_logits(fold_resmlp_model(m), image));
  });
  for (Arch arch : kAllArchs) {
    r.upper("model." + arch_name(arch) + ".value_vs_tape", 0.0, kGradDraws,
            [arch](Rng& rng) {
              const Model<> m = random_model(desk_config(arch), rng);
              const Tensor image = uniform(rng, {1, 8, 8}, 0.0, 1.0);
              Tape tape;
              const Model<Var> bound =
                  m.transform<Var>([&](const Tensor& t) { return tape.leaf(t); });
              return max_abs_diff(forward_logits(m, image),
                                  forward_logits(bound, image).value());
            });
  }
}

// ---------------------------------------------------------------------------

inline double row_sum_error(const Tensor& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (!(a(i, j) >= 0.0)) return INFINITY;
      sum += a(i, j);
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

inline void invariant_checks(Runner& r) {
  r.upper("softmax_rows.row_sums", 1e-12, kTrials, [](Rng& rng) {
    return row_sum_error(softmax_rows(
        uniform(rng, {extent(rng, 8), extent(rng, 8)}, -50.0, 50.0)));
  });
  r.upper("double_norm.row_sums", 1e-12, kTrials, [](Rng& rng) {
    return row_sum_error(double_norm(
        uniform(rng, {extent(rng, 8), extent(rng, 8)}, -500.0, 500.0)));
  });
  r.upper("layer_norm.zero_mean_rows", 1e-12, kTrials, [](Rng& rng) {
    const std::size_t c = 1 + extent(rng, 7);
    const Tensor y = layer_norm(uniform(rng, {extent(rng, 8), c}, -5.0, 5.0),
                                Tensor({c}, 1.0), Tensor({c}), 1e-5);
    const Tensor mean = reduce(y, Axis::rows, Stat::mean);
    double worst = 0.0;
    for (double v : mean.data()) worst = std::max(worst, std::abs(v));
    return worst;
  });
  r.upper("patches.round_trip", 0.0, kTrials, [](Rng& rng) {
    const std::size_t p = extent(rng, 4), ch = extent(rng, 3);
    const std::size_t h = p * extent(rng, 4), w = p * extent(rng, 4);
    const Tensor image = uniform(rng, {ch, h, w});
    return max_abs_diff(assemble_patches(extract_patches(image, p), ch, h, w, p), image);
  });
  r.upper("transpose.involution", 0.0, kTrials, [](Rng& rng) {
    const Tensor a = uniform(rng, {extent(rng, 8), extent(rng, 8)});
    return max_abs_diff(transpose(transpose(a)), a);
  });
  for (Arch arch : kAllArchs) {
    const std::string name = arch_name(arch);
    r.upper("residual_identity." + name, 0.0, kGradDraws, [arch](Rng& rng) {
      const Tensor x = uniform(rng, {kTokens, kChannels}, -3.0, 3.0);
      return max_abs_diff(apply_layer(x, residual_floor(arch, kTokens, kChannels)), x);
    });
    r.upper("shape_preservation." + name, 0.0, kTrials, [arch](Rng& rng) {
      const std::size_t s = extent(rng, 6), c = extent(rng, 6);
      const Tensor y = apply_layer(uniform(rng, {s, c}), random_layer(arch, rng, s, c));
      return y.dims() == Dims{s, c} ? 0.0 : 1.0;
    });
    r.lower("long_range.min_token_sensitivity." + name, 1e-6, kGradDraws,
            [arch](Rng& rng) {
              const Layer<> layer = random_layer(arch, rng, kTokens, kChannels);
              const Tensor sens = token_sensitivity(
                  [&](const Tensor& x) { return apply_layer(x, layer); },
                  uniform(rng, {kTokens, kChannels}));
              return *std::min_element(sens.data().begin(), sens.data().end());
            });
  }
}

}  // namespace suite

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"gradcheck", "equivalence",
                                                 "invariants"};
  return names;
}

/// Runs one named suite, or all three for "all".
inline SuiteReport run_suite(const std::string& name, std::uint64_t seed = 1) {
  if (name == "all") {
    SuiteReport all{"all", {}};
    for (const auto& part : suite_names()) {
      SuiteReport r = run_suite(part, seed);
      for (auto& c : r.checks) {
        c.property = part + "." + c.property;
        all.checks.push_back(std::move(c));
      }
    }
    return all;
  }
  suite::Runner r(name, seed);
  if (name == "gradcheck") {
    suite::gradcheck_ops(r);
    suite::gradcheck_blocks(r);
    suite::gradcheck_models(r);
  } else if (name == "equivalence") {
    suite::equivalence_checks(r);
  } else if (name == "invariants") {
    suite::invariant_checks(r);
  } else {
    throw ConfigError("unknown suite '" + name +
                      "' (expected gradcheck, equivalence, invariants or all)");
  }
  return r.take();
}

}  // namespace linmix
