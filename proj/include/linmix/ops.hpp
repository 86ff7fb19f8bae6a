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

// Value-level array kernels. Every kernel here charges its forward cost to
// FlopCounter; the differentiable wrappers in tape.hpp reuse them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "linmix/flops.hpp"
#include "linmix/tensor.hpp"

namespace linmix {

enum class Axis {
  rows,  // one statistic per row
  cols,  // one statistic per column
};

enum class Stat { sum, mean, var };

// Differentiable scalar function for `map`.
struct Unary {
  double (*f)(double);
  double (*df)(double);
  std::uint64_t flops = flop_cost::kElementwise;
};

namespace detail {

inline void require_same_dims(const Tensor& a, const Tensor& b,
                              const char* op) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": operand dims " +
                     dims_string(a.dims()) + " and " + dims_string(b.dims()) +
                     " differ");
  }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  a.require_rank(2);
  b.require_rank(2);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner extents differ, " + dims_string(a.dims()) +
                     " x " + dims_string(b.dims()));
  }
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = &c(i, 0);
    for (std::size_t t = 0; t < k; ++t) {
      const double ait = a(i, t);
      const double* bt = &b(t, 0);
      for (std::size_t j = 0; j < n; ++j) ci[j] += ait * bt[j];
    }
  }
  FlopCounter::add(flop_cost::kMac * m * k * n);
  return c;
}

inline Tensor transpose(const Tensor& a) {
  a.require_rank(2);
  const std::size_t m = a.rows(), n = a.cols();
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
  return t;
}

namespace detail {

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_dims(a, b, op);
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  FlopCounter::add(flop_cost::kElementwise * a.size());
  return out;
}

template <class F>
Tensor apply(const Tensor& a, F f, std::uint64_t flops_per_element) {
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  FlopCounter::add(flops_per_element * a.size());
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "add", [](double x, double y) { return x + y; });
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "sub", [](double x, double y) { return x - y; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "mul", [](double x, double y) { return x * y; });
}
inline Tensor add(const Tensor& a, double s) {
  return detail::apply(a, [s](double x) { return x + s; },
                       flop_cost::kElementwise);
}
inline Tensor scale(const Tensor& a, double s) {
  return detail::apply(a, [s](double x) { return x * s; },
                       flop_cost::kElementwise);
}
inline Tensor map(const Tensor& a, const Unary& fn) {
  return detail::apply(a, fn.f, fn.flops);
}

inline Tensor reduce(const Tensor& a, Axis axis, Stat stat) {
  a.require_rank(2);
  const std::size_t m = a.rows(), n = a.cols();
  const bool per_row = axis == Axis::rows;
  const std::size_t outer = per_row ? m : n;
  const std::size_t inner = per_row ? n : m;
  if (inner == 0) throw DomainError("reduce: empty axis");
  auto at = [&](std::size_t o, std::size_t i) {
    return per_row ? a(o, i) : a(i, o);
  };
  Tensor out({outer});
  for (std::size_t o = 0; o < outer; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < inner; ++i) s += at(o, i);
    if (stat == Stat::sum) {
      out[o] = s;
      continue;
    }
    const double mean = s / static_cast<double>(inner);
    if (stat == Stat::mean) {
      out[o] = mean;
      continue;
    }
    double v = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double d = at(o, i) - mean;
      v += d * d;
    }
    out[o] = v / static_cast<double>(inner);
  }
  FlopCounter::add((stat == Stat::var ? flop_cost::kReduceVar
                                      : flop_cost::kReduceSum) *
                   a.size());
  return out;
}

inline Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  FlopCounter::add(flop_cost::kReduceSum * a.size());
  return Tensor::scalar(s);
}

inline Tensor reshape(const Tensor& a, Dims dims) {
  return Tensor(std::move(dims), a.storage());
}

inline Tensor slice_cols(const Tensor& a, std::size_t begin,
                         std::size_t count) {
  a.require_rank(2);
  if (count == 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " +
                     dims_string(a.dims()));
  }
  Tensor out({a.rows(), count});
  for (std::size_t i = 0; i < a.rows(); ++i)
    std::copy_n(&a(i, begin), count, &out(i, 0));
  return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row count mismatch " +
                       dims_string(parts.front().dims()) + " vs " +
                       dims_string(p.dims()));
    }
    n += p.cols();
  }
  Tensor out({m, n});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(&p(i, 0), p.cols(), &out(i, offset));
    offset += p.cols();
  }
  return out;
}

}  // namespace linmix
