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

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "linmix/blocks.hpp"
#include "linmix/patchify.hpp"

namespace linmix {

enum class Arch { mixer, ext_attn, ff_only, resmlp };

inline constexpr std::array<Arch, 4> kAllArchs = {Arch::mixer, Arch::ext_attn,
                                                  Arch::ff_only, Arch::resmlp};

inline std::string arch_name(Arch a) {
  switch (a) {
    case Arch::mixer: return "mixer";
    case Arch::ext_attn: return "ext_attn";
    case Arch::ff_only: return "ff_only";
    case Arch::resmlp: return "resmlp";
  }
  return "unknown";
}

inline Arch parse_arch(std::string_view name) {
  for (Arch a : kAllArchs)
    if (arch_name(a) == name) return a;
  throw ConfigError("unknown arch '" + std::string(name) +
                    "' (expected mixer, ext_attn, ff_only or resmlp)");
}

struct ModelConfig {
  Arch arch = Arch::mixer;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  std::size_t patch = 4;            // P
  std::size_t embed_dim = 16;       // C
  std::size_t depth = 2;
  std::size_t token_hidden = 32;    // D_S
  std::size_t channel_hidden = 32;  // D_C
  std::size_t memory = 16;          // S_mem
  std::size_t heads = 2;            // H
  std::size_t classes = 2;
  std::uint64_t seed = 0;

  std::size_t tokens() const { return (height / patch) * (width / patch); }
  std::size_t patch_dim() const { return patch * patch * channels; }

  void validate() const {
    auto positive = [](std::size_t v, const char* field) {
      if (v == 0) throw ConfigError(std::string(field) + " must be positive");
    };
    positive(height, "height");
    positive(width, "width");
    positive(channels, "channels");
    positive(patch, "patch");
    positive(embed_dim, "C");
    positive(token_hidden, "D_S");
    positive(channel_hidden, "D_C");
    positive(memory, "S_mem");
    positive(heads, "H");
    positive(classes, "classes");
    if (height % patch != 0) {
      throw ConfigError("height " + std::to_string(height) +
                        " not divisible by patch " + std::to_string(patch));
    }
    if (width % patch != 0) {
      throw ConfigError("width " + std::to_string(width) +
                        " not divisible by patch " + std::to_string(patch));
    }
    if (arch == Arch::ext_attn && embed_dim % heads != 0) {
      throw ConfigError("H: C=" + std::to_string(embed_dim) +
                        " not divisible by H=" + std::to_string(heads));
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class V = Tensor>
using Layer = std::variant<MixerLayerParams<V>, ExternalAttentionLayerParams<V>,
                           FFOnlyParams<V>, ResMLPBlockParams<V>>;

/// Patch embedding, a stack of blocks, token mean-pooling and a linear head.
template <class V = Tensor>
struct Model {
  ModelConfig cfg;
  PatchEmbedParams<V> embed;
  std::vector<Layer<V>> layers;
  LinearParams<V> head;  // [classes x C]

  template <class U, class F>
  Model<U> transform(F&& f) const {
    Model<U> out{cfg, embed.template transform<U>(f), {},
                 head.template transform<U>(f)};
    for (const auto& layer : layers) {
      std::visit(
          [&](const auto& p) {
            out.layers.emplace_back(p.template transform<U>(f));
          },
          layer);
    }
    return out;
  }

  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    PatchEmbedParams<V>::visit(self.embed, prefix + "embed.", f);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      std::visit(
          [&](auto& p) {
            std::remove_cvref_t<decltype(p)>::visit(
                p, prefix + "layers." + std::to_string(i) + ".", f);
          },
          self.layers[i]);
    }
    LinearParams<V>::visit(self.head, prefix + "head.", f);
  }
};

/// Applies one block of any architecture.
template <class V>
V apply_layer(const V& x, const Layer<V>& layer) {
  return std::visit(
      [&](const auto& p) -> V {
        using P = std::remove_cvref_t<decltype(p)>;
        if constexpr (std::is_same_v<P, MixerLayerParams<V>>) {
          return mixer_layer(x, p);
        } else if constexpr (std::is_same_v<P, ExternalAttentionLayerParams<V>>) {
          return external_attention_layer(x, p);
        } else if constexpr (std::is_same_v<P, FFOnlyParams<V>>) {
          return ff_only_block(x, p);
        } else {
          return resmlp_block(x, p);
        }
      },
      layer);
}

inline Model<> build_model(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t s = cfg.tokens(), c = cfg.embed_dim;
  Model<> m;
  m.cfg = cfg;
  m.embed.proj = init_linear(rng, c, cfg.patch_dim());
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    switch (cfg.arch) {
      case Arch::mixer:
        m.layers.emplace_back(
            init_mixer_layer(rng, s, c, cfg.token_hidden, cfg.channel_hidden));
        break;
      case Arch::ext_attn:
        m.layers.emplace_back(init_external_attention_layer(
            rng, c, cfg.channel_hidden, cfg.memory, cfg.heads));
        break;
      case Arch::ff_only:
        m.layers.emplace_back(
            init_ff_only(rng, s, c, cfg.token_hidden, cfg.channel_hidden));
        break;
      case Arch::resmlp:
        m.layers.emplace_back(init_resmlp_block(rng, s, c, cfg.channel_hidden));
        break;
    }
  }
  m.head = init_linear(rng, cfg.classes, c);
  return m;
}

/// Number of learnable scalars, by enumerating every array.
template <class V>
std::uint64_t parameter_count(const Model<V>& m) {
  std::uint64_t n = 0;
  Model<V>::visit(m, "", [&](const std::string&, const V& t) {
    n += value_of(t).size();
  });
  return n;
}

/// Global average pooling over tokens: [S x C] -> [C].
template <class V>
V pool_tokens(const V& x) {
  return reduce(x, Axis::cols, Stat::mean);
}

/// Token features after embedding and all blocks, [S x C].
template <class V>
V forward_features(const Model<V>& m, const Tensor& image) {
  const ModelConfig& cfg = m.cfg;
  image.require_rank(3);
  if (image.dim(0) != cfg.channels || image.dim(1) != cfg.height ||
      image.dim(2) != cfg.width) {
    throw ShapeError("forward: image " + dims_string(image.dims()) +
                     " does not match model input [" +
                     std::to_string(cfg.channels) + "x" +
                     std::to_string(cfg.height) + "x" +
                     std::to_string(cfg.width) + "]");
  }
  V x = embed(lift(extract_patches(image, cfg.patch), m.head.weight), m.embed);
  for (const auto& layer : m.layers) x = apply_layer(x, layer);
  return x;
}

/// Raw class logits, [classes].
template <class V>
V forward_logits(const Model<V>& m, const Tensor& image) {
  V pooled = reshape(pool_tokens(forward_features(m, image)),
                     Dims{1, m.cfg.embed_dim});
  return reshape(linear(pooled, m.head), Dims{m.cfg.classes});
}

/// A ResMLP model with every affine folded into adjacent linear maps.
struct FoldedResMLPModel {
  ModelConfig cfg;
  PatchEmbedParams<> embed;
  std::vector<FoldedResMLPBlock> layers;
  LinearParams<> head;
};

inline FoldedResMLPModel fold_resmlp_model(const Model<>& m) {
  if (m.cfg.arch != Arch::resmlp) {
    throw ConfigError("fold_resmlp_model: arch is " + arch_name(m.cfg.arch) +
                      ", expected resmlp");
  }
  FoldedResMLPModel out{m.cfg, m.embed, {}, m.head};
  for (const auto& layer : m.layers)
    out.layers.push_back(fold_resmlp_block(std::get<ResMLPBlockParams<>>(layer)));
  return out;
}

inline Tensor forward_logits(const FoldedResMLPModel& m, const Tensor& image) {
  Tensor x = embed(extract_patches(image, m.cfg.patch), m.embed);
  for (const auto& layer : m.layers) x = resmlp_block_folded(x, layer);
  const Tensor pooled = reshape(pool_tokens(x), Dims{1, m.cfg.embed_dim});
  return reshape(linear(pooled, m.head), Dims{m.cfg.classes});
}

}  // namespace linmix
