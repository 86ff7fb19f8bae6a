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

#include <string>

#include "linmix/nn.hpp"

namespace linmix {

// Images are rank-3 tensors [channels x height x width] with values in [0, 1].

/**
 * Splits an image into non-overlapping P x P patches.
 *
 * Rows come in raster order over the patch grid (top-left first). Each row
 * is one patch flattened channel-major, then row-major within the patch, so
 * entry c*P*P + r*P + q holds pixel (c, top + r, left + q).
 */
inline Tensor extract_patches(const Tensor& image, std::size_t patch) {
  image.require_rank(3);
  const std::size_t ch = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (patch == 0) throw ConfigError("extract_patches: patch size must be > 0");
  if (h % patch != 0) {
    throw PartitionError("extract_patches: image height " + std::to_string(h) +
                      " not divisible by patch size " + std::to_string(patch));
  }
  if (w % patch != 0) {
    throw PartitionError("extract_patches: image width " + std::to_string(w) +
                      " not divisible by patch size " + std::to_string(patch));
  }
  const std::size_t gh = h / patch, gw = w / patch;
  Tensor out({gh * gw, ch * patch * patch});
  for (std::size_t pr = 0; pr < gh; ++pr) {
    for (std::size_t pc = 0; pc < gw; ++pc) {
      double* row = &out(pr * gw + pc, 0);
      for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t r = 0; r < patch; ++r)
          for (std::size_t q = 0; q < patch; ++q)
            *row++ = image(c, pr * patch + r, pc * patch + q);
    }
  }
  return out;
}

// Inverse of extract_patches.
inline Tensor assemble_patches(const Tensor& patches, std::size_t channels,
                               std::size_t height, std::size_t width,
                               std::size_t patch) {
  patches.require_rank(2);
  const std::size_t gh = height / patch, gw = width / patch;
  if (height % patch || width % patch || patches.rows() != gh * gw ||
      patches.cols() != channels * patch * patch) {
    throw ShapeError("assemble_patches: patches " +
                     dims_string(patches.dims()) + " do not tile a " +
                     std::to_string(channels) + "x" + std::to_string(height) +
                     "x" + std::to_string(width) + " image at patch " +
                     std::to_string(patch));
  }
  Tensor image({channels, height, width});
  for (std::size_t pr = 0; pr < gh; ++pr) {
    for (std::size_t pc = 0; pc < gw; ++pc) {
      const double* row = &patches(pr * gw + pc, 0);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t r = 0; r < patch; ++r)
          for (std::size_t q = 0; q < patch; ++q)
            image(c, pr * patch + r, pc * patch + q) = *row++;
    }
  }
  return image;
}

template <class V = Tensor>
struct PatchEmbedParams {
  LinearParams<V> proj;  // [C x P*P*channels]

  template <class U, class F>
  PatchEmbedParams<U> transform(F&& f) const {
    return {proj.template transform<U>(f)};
  }
  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    LinearParams<V>::visit(self.proj, prefix + "proj.", f);
  }
};

// Projects every patch row with the same weights: [S x D] -> [S x C].
template <class V>
V embed(const V& patches, const PatchEmbedParams<V>& p) {
  return linear(patches, p.proj);
}

}  // namespace linmix
