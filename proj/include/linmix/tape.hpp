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
#include <functional>
#include <initializer_list>
#include <utility>
#include <vector>

#include "linmix/ops.hpp"
#include "linmix/tensor.hpp"

namespace linmix {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Dims& dims() const { return value().dims(); }
};

/**
 * Define-by-run reverse-mode recorder.
 *
 * Nodes are appended in evaluation order, so ids are already a topological
 * order. Gradients from fan-out are summed. A tape is owned by one thread
 * for one forward/backward evaluation.
 */
class Tape {
 public:
  // Propagates the node's output gradient into its inputs via accumulate().
  using BackwardFn = std::function<void(Tape&, const Tensor&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value) { return push(std::move(value), true, nullptr); }
  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || nodes_[v.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || nodes_[v.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  // Handle the next recorded node will receive; lets a backward rule read
  // its own forward output.
  Var next() { return Var{this, nodes_.size()}; }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void accumulate(Var v, Tensor g) {
    Node& node = nodes_[v.id];
    if (!node.requires_grad) return;
    if (node.grad.empty()) {
      node.grad = std::move(g);
      return;
    }
    auto dst = node.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  // Seeds d(seed)/d(seed) = 1 and propagates to every earlier node.
  void backward(Var seed) {
    if (value(seed).size() != 1) {
      throw ContractError("backward: seed must be scalar, got " +
                          dims_string(value(seed).dims()));
    }
    for (auto& n : nodes_) n.grad = Tensor();
    nodes_[seed.id].grad = Tensor(value(seed).dims(), 1.0);
    for (std::size_t i = seed.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) {
        // Copy: the callback may accumulate into other nodes.
        const Tensor g = n.grad;
        n.backward(*this, g);
      }
    }
  }

  // Gradient of the last backward() seed with respect to v; zeros if v was
  // unreachable.
  Tensor grad(Var v) const {
    const Node& n = nodes_[v.id];
    return n.grad.empty() ? Tensor(n.value.dims()) : n.grad;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn fn) {
    nodes_.push_back({std::move(value), Tensor(), requires_grad, std::move(fn)});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

// Tensor-or-Var lifting: a constant of the same kind as `like`.
inline Tensor lift(const Tensor& t, const Tensor&) { return t; }
inline Var lift(const Tensor& t, const Var& like) {
  return like.tape->constant(t);
}

inline Var matmul(Var a, Var b) {
  return a.tape->record(matmul(a.value(), b.value()), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          t.accumulate(a, matmul(g, transpose(t.value(b))));
                          t.accumulate(b, matmul(transpose(t.value(a)), g));
                        });
}

inline Var transpose(Var a) {
  return a.tape->record(transpose(a.value()), {a},
                        [a](Tape& t, const Tensor& g) {
                          t.accumulate(a, transpose(g));
                        });
}

inline Var add(Var a, Var b) {
  return a.tape->record(add(a.value(), b.value()), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          t.accumulate(a, g);
                          t.accumulate(b, g);
                        });
}

inline Var sub(Var a, Var b) {
  return a.tape->record(sub(a.value(), b.value()), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          t.accumulate(a, g);
                          t.accumulate(b, scale(g, -1.0));
                        });
}

inline Var mul(Var a, Var b) {
  return a.tape->record(mul(a.value(), b.value()), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          t.accumulate(a, mul(g, t.value(b)));
                          t.accumulate(b, mul(g, t.value(a)));
                        });
}

inline Var add(Var a, double s) {
  return a.tape->record(add(a.value(), s), {a},
                        [a](Tape& t, const Tensor& g) { t.accumulate(a, g); });
}

inline Var scale(Var a, double s) {
  return a.tape->record(scale(a.value(), s), {a},
                        [a, s](Tape& t, const Tensor& g) {
                          t.accumulate(a, scale(g, s));
                        });
}

inline Var map(Var a, const Unary& fn) {
  return a.tape->record(map(a.value(), fn), {a},
                        [a, fn](Tape& t, const Tensor& g) {
                          const Tensor& x = t.value(a);
                          Tensor dx(x.dims());
                          for (std::size_t i = 0; i < x.size(); ++i)
                            dx[i] = g[i] * fn.df(x[i]);
                          t.accumulate(a, std::move(dx));
                        });
}

inline Var reduce(Var a, Axis axis, Stat stat) {
  return a.tape->record(
      reduce(a.value(), axis, stat), {a},
      [a, axis, stat](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(a);
        const bool per_row = axis == Axis::rows;
        const std::size_t m = x.rows(), n = x.cols();
        const double count = static_cast<double>(per_row ? n : m);
        Tensor means;
        if (stat == Stat::var) means = reduce(x, axis, Stat::mean);
        Tensor dx(x.dims());
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t o = per_row ? i : j;
            switch (stat) {
              case Stat::sum: dx(i, j) = g[o]; break;
              case Stat::mean: dx(i, j) = g[o] / count; break;
              case Stat::var:
                dx(i, j) = g[o] * 2.0 * (x(i, j) - means[o]) / count;
                break;
            }
          }
        }
        t.accumulate(a, std::move(dx));
      });
}

inline Var sum_all(Var a) {
  return a.tape->record(sum_all(a.value()), {a},
                        [a](Tape& t, const Tensor& g) {
                          t.accumulate(a, Tensor(t.value(a).dims(), g[0]));
                        });
}

inline Var reshape(Var a, Dims dims) {
  return a.tape->record(reshape(a.value(), std::move(dims)), {a},
                        [a](Tape& t, const Tensor& g) {
                          t.accumulate(a, reshape(g, t.value(a).dims()));
                        });
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  return a.tape->record(slice_cols(a.value(), begin, count), {a},
                        [a, begin, count](Tape& t, const Tensor& g) {
                          Tensor dx(t.value(a).dims());
                          for (std::size_t i = 0; i < dx.rows(); ++i)
                            for (std::size_t j = 0; j < count; ++j)
                              dx(i, begin + j) = g(i, j);
                          t.accumulate(a, std::move(dx));
                        });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  Tape& tape = *parts.front().tape;
  return tape.record(concat_cols(values), parts,
                     [parts](Tape& t, const Tensor& g) {
                       std::size_t offset = 0;
                       for (const Var& p : parts) {
                         const std::size_t n = t.value(p).cols();
                         t.accumulate(p, slice_cols(g, offset, n));
                         offset += n;
                       }
                     });
}

}  // namespace linmix
