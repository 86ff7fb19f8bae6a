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

#include <cstdint>

namespace linmix {

/**
 * Per-element FLOP constants used by both the instrumented kernels and the
 * closed-form cost model. A multiply-accumulate counts as 2, so a matmul
 * [m x k] x [k x n] costs 2mkn and a linear layer [n x in] -> [n x out]
 * costs 2*n*in*out (the bias add takes the place of the first addition).
 * Transpose, slicing, concatenation and reshapes are free.
 */
namespace flop_cost {
inline constexpr std::uint64_t kMac = 2;
inline constexpr std::uint64_t kElementwise = 1;  // add, sub, mul, scale
inline constexpr std::uint64_t kGelu = 8;
inline constexpr std::uint64_t kSoftmax = 5;  // max, sub, exp, sum, div
inline constexpr std::uint64_t kLayerNorm = 8;
inline constexpr std::uint64_t kL1Norm = 2;
inline constexpr std::uint64_t kDoubleNorm = kSoftmax + kL1Norm;
inline constexpr std::uint64_t kAffine = 2;
inline constexpr std::uint64_t kReduceSum = 1;  // also mean
inline constexpr std::uint64_t kReduceVar = 3;
}  // namespace flop_cost

// Thread-local counter incremented by every forward kernel.
class FlopCounter {
 public:
  static std::uint64_t& value() {
    thread_local std::uint64_t count = 0;
    return count;
  }
  static void add(std::uint64_t n) { value() += n; }
};

// Measures the FLOPs spent inside its lifetime.
class FlopScope {
 public:
  FlopScope() : start_(FlopCounter::value()) {}
  std::uint64_t count() const { return FlopCounter::value() - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace linmix
