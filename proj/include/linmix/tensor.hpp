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

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace linmix {

// Error hierarchy. Every failure in the library surfaces as one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ShapeError : public Error { using Error::Error; };
class RankError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class PartitionError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class ConsistencyError : public Error { using Error::Error; };
class DivergenceError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

using Dims = std::vector<std::size_t>;

inline std::string dims_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

/**
 * Dense row-major array of doubles, rank 1 to 3.
 *
 * A default-constructed tensor is the empty (rank 0) placeholder; every
 * other tensor has positive extents and data().size() == product of dims.
 */
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Dims dims, double fill = 0.0) : dims_(std::move(dims)) {
    check_dims();
    data_.assign(count(dims_), fill);
  }

  Tensor(Dims dims, std::vector<double> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != count(dims_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + dims_string(dims_));
    }
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  static Tensor matrix(
      std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto& row : rows) {
      if (row.size() != n) throw ShapeError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({m, n}, std::move(data));
  }

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  std::size_t rank() const { return dims_.size(); }
  const Dims& dims() const { return dims_; }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const {
    require_rank(2);
    return dims_[0];
  }
  std::size_t cols() const {
    require_rank(2);
    return dims_[1];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * dims_[1] + j];
  }
  const double& operator()(std::size_t i, std::size_t j) const {
    return data_[i * dims_[1] + j];
  }
  double& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * dims_[1] + i) * dims_[2] + j];
  }
  const double& operator()(std::size_t c, std::size_t i,
                           std::size_t j) const {
    return data_[(c * dims_[1] + i) * dims_[2] + j];
  }

  double item() const {
    if (data_.size() != 1) {
      throw ContractError("item() on non-scalar tensor " + dims_string(dims_));
    }
    return data_[0];
  }

  void require_rank(std::size_t r) const {
    if (dims_.size() != r) {
      throw RankError("expected rank " + std::to_string(r) + ", got tensor " +
                      dims_string(dims_));
    }
  }

  // Bitwise comparison of dims and contents.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  static std::size_t count(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
  }

  void check_dims() const {
    if (dims_.empty() || dims_.size() > 3) {
      throw RankError("tensor rank must be 1..3, got " +
                      std::to_string(dims_.size()));
    }
    for (auto d : dims_) {
      if (d == 0) throw ShapeError("zero extent in dims " + dims_string(dims_));
    }
  }

  Dims dims_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    throw ShapeError("max_abs_diff: " + dims_string(a.dims()) + " vs " +
                     dims_string(b.dims()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
    if (!(d <= worst)) worst = d;
  }
  return worst;
}

}  // namespace linmix
