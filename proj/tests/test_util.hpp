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

// Helpers shared by the unit tests.

#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "linmix/linmix.hpp"

namespace linmix::testing {

inline Tensor random_tensor(Rng& rng, Dims dims, double lo = -1.0, double hi = 1.0) {
  return rng.tensor(std::move(dims), lo, hi);
}

/// Dense matrix product by the textbook triple loop.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.cols(); ++t) s += a(i, t) * b(t, j);
      c(i, j) = s;
    }
  return c;
}

/// A scratch directory removed at scope exit.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("linmix_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline ModelConfig small_config(Arch arch) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.height = 8;
  cfg.width = 8;
  cfg.patch = 4;
  cfg.embed_dim = 8;
  cfg.depth = 1;
  cfg.token_hidden = 6;
  cfg.channel_hidden = 16;
  cfg.memory = 5;
  cfg.heads = 2;
  cfg.classes = 3;
  cfg.seed = 11;
  return cfg;
}

}  // namespace linmix::testing
