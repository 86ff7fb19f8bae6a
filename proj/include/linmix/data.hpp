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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "linmix/random.hpp"
#include "linmix/tensor.hpp"

namespace linmix {

struct Dataset {
  std::vector<Tensor> images;  // each [channels x height x width]
  std::vector<std::size_t> labels;
  std::size_t classes = 2;

  std::size_t size() const { return images.size(); }

  void validate() const {
    if (images.size() != labels.size()) {
      throw ConsistencyError("dataset holds " + std::to_string(images.size()) +
                             " images but " + std::to_string(labels.size()) +
                             " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= classes) {
        throw DomainError("label " + std::to_string(labels[i]) + " at index " +
                          std::to_string(i) + " outside [0, " +
                          std::to_string(classes) + ")");
      }
    }
  }
};

/**
 * Synthetic task whose label needs information from several patches.
 *
 * The image is split into four quadrants; each quadrant either holds a
 * bright square blob at a random offset or not. The label is the number of
 * lit quadrants modulo `classes`. Every quadrant is lit with probability
 * 1/2 independently of the label, so no single patch carries information
 * about the class. Background pixels are uniform noise in [0, 0.1]; blob
 * pixels are 0.9 plus the same noise. Labels cycle 0, 1, ..., so class
 * counts differ by at most one.
 */
inline Dataset gen_synthetic(std::size_t n, std::size_t classes,
                             std::size_t image_dim, std::uint64_t seed) {
  if (classes < 2 || classes > 5) {
    throw ConfigError("gen_synthetic: classes must be in [2, 5], got " +
                      std::to_string(classes));
  }
  if (n < classes) {
    throw ConfigError("gen_synthetic: n=" + std::to_string(n) +
                      " smaller than classes=" + std::to_string(classes));
  }
  if (image_dim < 2 || image_dim % 2 != 0) {
    throw ConfigError("gen_synthetic: image_dim must be even and >= 2, got " +
                      std::to_string(image_dim));
  }
  const std::size_t quadrant = image_dim / 2;
  const std::size_t blob = std::max<std::size_t>(1, quadrant / 2 - 1);
  Rng rng(seed);
  Dataset data;
  data.classes = classes;
  data.images.reserve(n);
  data.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % classes;
    unsigned mask;
    do {
      mask = static_cast<unsigned>(rng.below(16));
    } while (static_cast<std::size_t>(std::popcount(mask)) % classes != label);

    Tensor img({1, image_dim, image_dim});
    for (auto& v : img.data()) v = 0.1 * rng.uniform();
    for (std::size_t q = 0; q < 4; ++q) {
      if (!(mask & (1u << q))) continue;
      const std::size_t top = (q / 2) * quadrant + rng.below(quadrant - blob + 1);
      const std::size_t left = (q % 2) * quadrant + rng.below(quadrant - blob + 1);
      for (std::size_t r = 0; r < blob; ++r)
        for (std::size_t c = 0; c < blob; ++c)
          img(0, top + r, left + c) += 0.9;
    }
    data.images.push_back(std::move(img));
    data.labels.push_back(label);
  }
  return data;
}

// ---------------------------------------------------------------------------
// IDX files: big-endian. Images: magic 0x00000803, int32 count, rows, cols,
// then count*rows*cols unsigned bytes. Labels: magic 0x00000801, int32
// count, then count bytes.

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& bytes,
                               std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError("'" + path + "': truncated header at offset " +
                      std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace detail

/// Reads an IDX image/label pair; pixels are scaled to [0, 1] by 1/255.
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  const std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
  if (img_magic != kIdxImageMagic) {
    throw FormatError("'" + images_path + "': bad image magic at offset 0");
  }
  const std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
  if (lab_magic != kIdxLabelMagic) {
    throw FormatError("'" + labels_path + "': bad label magic at offset 0");
  }
  const std::size_t count = detail::read_be32(img, 4, images_path);
  const std::size_t rows = detail::read_be32(img, 8, images_path);
  const std::size_t cols = detail::read_be32(img, 12, images_path);
  const std::size_t label_count = detail::read_be32(lab, 4, labels_path);
  if (rows == 0 || cols == 0) {
    throw FormatError("'" + images_path + "': zero image extent at offset 8");
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) {
    throw FormatError("'" + images_path + "': truncated pixel data at offset " +
                      std::to_string(img.size()) + ", expected " +
                      std::to_string(16 + count * pixels) + " bytes");
  }
  if (lab.size() < 8 + label_count) {
    throw FormatError("'" + labels_path + "': truncated label data at offset " +
                      std::to_string(lab.size()) + ", expected " +
                      std::to_string(8 + label_count) + " bytes");
  }
  if (count != label_count) {
    throw ConsistencyError("'" + images_path + "' holds " +
                           std::to_string(count) + " images but '" +
                           labels_path + "' holds " +
                           std::to_string(label_count) + " labels");
  }

  Dataset data;
  data.images.reserve(count);
  data.labels.reserve(count);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor t({1, rows, cols});
    const unsigned char* src = img.data() + 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) t[p] = src[p] / 255.0;
    data.images.push_back(std::move(t));
    data.labels.push_back(lab[8 + i]);
    max_label = std::max<std::size_t>(max_label, lab[8 + i]);
  }
  data.classes = std::max<std::size_t>(2, max_label + 1);
  return data;
}

/// Writes a single-channel dataset as an IDX pair; pixels round(v * 255).
inline void save_idx(const Dataset& data, const std::string& images_path,
                     const std::string& labels_path) {
  data.validate();
  if (data.images.empty()) throw ContractError("save_idx: empty dataset");
  const Tensor& first = data.images.front();
  if (first.rank() != 3 || first.dim(0) != 1) {
    throw ShapeError("save_idx: only single-channel images, got " +
                     dims_string(first.dims()));
  }
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot write '" + images_path + "'");
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot write '" + labels_path + "'");
  const auto count = static_cast<std::uint32_t>(data.size());
  detail::write_be32(img, kIdxImageMagic);
  detail::write_be32(img, count);
  detail::write_be32(img, static_cast<std::uint32_t>(first.dim(1)));
  detail::write_be32(img, static_cast<std::uint32_t>(first.dim(2)));
  for (const Tensor& t : data.images) {
    if (t.dims() != first.dims()) {
      throw ShapeError("save_idx: mixed image dims " + dims_string(t.dims()));
    }
    for (double v : t.data()) {
      const double px = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
      img.put(static_cast<char>(static_cast<unsigned char>(px)));
    }
  }
  detail::write_be32(lab, kIdxLabelMagic);
  detail::write_be32(lab, count);
  for (std::size_t l : data.labels) {
    if (l > 255) throw DomainError("save_idx: label " + std::to_string(l) + " > 255");
    lab.put(static_cast<char>(static_cast<unsigned char>(l)));
  }
  if (!img || !lab) throw IoError("write failed for IDX pair");
}

}  // namespace linmix
