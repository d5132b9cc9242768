#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bassl/rng.hpp"
#include "bassl/tensor.hpp"

// Forward primitives with reverse-mode gradients. Everything is eager: the
// value is computed on construction and the node keeps a closure that knows
// how to push its gradient into its parents.

namespace bassl {

namespace detail {

template <typename T>
std::shared_ptr<TensorNode<T>> make_node(std::vector<size_t> shape,
                                         const std::vector<Tensor<T>>& parents) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = std::move(shape);
  n->value.assign(n->size(), T(0));
  for (const auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node());
  }
  return n;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

template <typename T>
std::string shapes2(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  return std::string(op) + ": shape mismatch " + Tensor<T>::shape_str(a.shape()) + " vs " +
         Tensor<T>::shape_str(b.shape());
}

// C(m x n) += A(m x k) * B(k x n)
template <typename T>
void mm_acc_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (size_t t = 0; t < k; ++t) {
      const T av = ai[t];
      const T* bt = b + t * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T
template <typename T>
void mm_acc_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T s = T(0);
      for (size_t t = 0; t < k; ++t) s += ai[t] * bj[t];
      ci[j] += s;
    }
  }
}

// C(k x n) += A(m x k)^T * B(m x n)
template <typename T>
void mm_acc_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* bi = b + i * n;
    for (size_t t = 0; t < k; ++t) {
      const T av = ai[t];
      T* ct = c + t * n;
      for (size_t j = 0; j < n; ++j) ct[j] += av * bi[j];
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), detail::shapes2("add", a, b));
  auto n = detail::make_node(a.shape(), std::vector<Tensor<T>>{a, b});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] + b.values()[i];
  if (n->requires_grad) {
    auto an = a.node(), bn = b.node();
    auto* raw = n.get();
    n->backprop = [an, bn, raw] {
      if (raw->grad.empty()) return;
      if (an->requires_grad) {
        auto& g = an->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i];
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), detail::shapes2("subtract", a, b));
  auto n = detail::make_node(a.shape(), std::vector<Tensor<T>>{a, b});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] - b.values()[i];
  if (n->requires_grad) {
    auto an = a.node(), bn = b.node();
    auto* raw = n.get();
    n->backprop = [an, bn, raw] {
      if (raw->grad.empty()) return;
      if (an->requires_grad) {
        auto& g = an->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] -= raw->grad[i];
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), detail::shapes2("multiply", a, b));
  auto n = detail::make_node(a.shape(), std::vector<Tensor<T>>{a, b});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] * b.values()[i];
  if (n->requires_grad) {
    auto an = a.node(), bn = b.node();
    auto* raw = n.get();
    n->backprop = [an, bn, raw] {
      if (raw->grad.empty()) return;
      if (an->requires_grad) {
        auto& g = an->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i] * an->value[i];
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, double s) {
  auto n = detail::make_node(a.shape(), std::vector<Tensor<T>>{a});
  const T sv = static_cast<T>(s);
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] * sv;
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, sv] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i] * sv;
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, double s) {
  auto n = detail::make_node(a.shape(), std::vector<Tensor<T>>{a});
  const T sv = static_cast<T>(s);
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] + sv;
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i];
    };
  }
  return Tensor<T>(n);
}

/// Broadcast add of a length-c vector to every row of an (r x c) matrix.
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& m, const Tensor<T>& v) {
  detail::require(m.rank() == 2 && v.rank() == 1 && m.dim(1) == v.dim(0),
                  detail::shapes2("add_rowvec", m, v));
  auto n = detail::make_node(m.shape(), std::vector<Tensor<T>>{m, v});
  const size_t r = m.dim(0), c = m.dim(1);
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) n->value[i * c + j] = m.values()[i * c + j] + v.values()[j];
  if (n->requires_grad) {
    auto mn = m.node(), vn = v.node();
    auto* raw = n.get();
    n->backprop = [mn, vn, raw, r, c] {
      if (raw->grad.empty()) return;
      if (mn->requires_grad) {
        auto& g = mn->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i];
      }
      if (vn->requires_grad) {
        auto& g = vn->ensure_grad();
        for (size_t i = 0; i < r; ++i)
          for (size_t j = 0; j < c; ++j) g[j] += raw->grad[i * c + j];
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
                  detail::shapes2("matmul", a, b));
  const size_t m = a.dim(0), k = a.dim(1), nn = b.dim(1);
  auto n = detail::make_node({m, nn}, std::vector<Tensor<T>>{a, b});
  detail::mm_acc_nn(a.values().data(), b.values().data(), n->value.data(), m, k, nn);
  if (n->requires_grad) {
    auto an = a.node(), bn = b.node();
    auto* raw = n.get();
    n->backprop = [an, bn, raw, m, k, nn] {
      if (raw->grad.empty()) return;
      if (an->requires_grad) {
        detail::mm_acc_nt(raw->grad.data(), bn->value.data(), an->ensure_grad().data(), m, nn, k);
      }
      if (bn->requires_grad) {
        detail::mm_acc_tn(an->value.data(), raw->grad.data(), bn->ensure_grad().data(), m, k, nn);
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::require(a.rank() == 2, "transpose: expects rank 2, got shape " +
                                     Tensor<T>::shape_str(a.shape()));
  const size_t r = a.dim(0), c = a.dim(1);
  auto n = detail::make_node({c, r}, std::vector<Tensor<T>>{a});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) n->value[j * r + i] = a.values()[i * c + j];
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, r, c] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) g[i * c + j] += raw->grad[j * r + i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<size_t> shape) {
  size_t cnt = 1;
  for (size_t d : shape) cnt *= d;
  detail::require(cnt == a.size(), "reshape: size mismatch " + Tensor<T>::shape_str(a.shape()) +
                                       " -> " + Tensor<T>::shape_str(shape));
  auto n = detail::make_node(std::move(shape), std::vector<Tensor<T>>{a});
  n->value = a.values();
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i];
    };
  }
  return Tensor<T>(n);
}

/// Concatenate along the last axis: rank-1 pieces -> one longer vector,
/// rank-2 pieces with equal row counts -> one wider matrix.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  detail::require(!parts.empty(), "concat: no inputs");
  const size_t rank = parts[0].rank();
  detail::require(rank == 1 || rank == 2, "concat: expects rank 1 or 2");
  size_t rows = rank == 2 ? parts[0].dim(0) : 1;
  size_t total = 0;
  for (const auto& p : parts) {
    detail::require(p.rank() == rank && (rank == 1 || p.dim(0) == rows),
                    detail::shapes2("concat", parts[0], p));
    total += p.shape().back();
  }
  std::vector<size_t> shape = rank == 1 ? std::vector<size_t>{total}
                                        : std::vector<size_t>{rows, total};
  auto n = detail::make_node(std::move(shape), parts);
  size_t off = 0;
  for (const auto& p : parts) {
    const size_t w = p.shape().back();
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < w; ++j) n->value[i * total + off + j] = p.values()[i * w + j];
    off += w;
  }
  if (n->requires_grad) {
    std::vector<std::shared_ptr<TensorNode<T>>> pn;
    std::vector<size_t> widths;
    for (const auto& p : parts) {
      pn.push_back(p.node());
      widths.push_back(p.shape().back());
    }
    auto* raw = n.get();
    n->backprop = [pn, widths, raw, rows, total] {
      if (raw->grad.empty()) return;
      size_t off = 0;
      for (size_t k = 0; k < pn.size(); ++k) {
        const size_t w = widths[k];
        if (pn[k]->requires_grad) {
          auto& g = pn[k]->ensure_grad();
          for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < w; ++j) g[i * w + j] += raw->grad[i * total + off + j];
        }
        off += w;
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  return concat_cols(std::vector<Tensor<T>>{a, b});
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, size_t start, size_t len) {
  detail::require(a.rank() == 2 && start + len <= a.dim(1),
                  "slice_cols: out of range on shape " + Tensor<T>::shape_str(a.shape()));
  const size_t r = a.dim(0), c = a.dim(1);
  auto n = detail::make_node({r, len}, std::vector<Tensor<T>>{a});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < len; ++j) n->value[i * len + j] = a.values()[i * c + start + j];
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, r, c, len, start] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < len; ++j) g[i * c + start + j] += raw->grad[i * len + j];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, size_t start, size_t len) {
  detail::require(a.rank() == 2 && start + len <= a.dim(0),
                  "slice_rows: out of range on shape " + Tensor<T>::shape_str(a.shape()));
  const size_t c = a.dim(1);
  auto n = detail::make_node({len, c}, std::vector<Tensor<T>>{a});
  std::copy_n(a.values().data() + start * c, len * c, n->value.data());
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, c, len, start] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < len * c; ++i) g[start * c + i] += raw->grad[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<size_t>& idx) {
  detail::require(a.rank() == 2, "gather_rows: expects rank 2");
  const size_t c = a.dim(1);
  for (size_t i : idx)
    detail::require(i < a.dim(0), "gather_rows: index " + std::to_string(i) +
                                      " out of range on shape " + Tensor<T>::shape_str(a.shape()));
  auto n = detail::make_node({idx.size(), c}, std::vector<Tensor<T>>{a});
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(a.values().data() + idx[i] * c, c, n->value.data() + i * c);
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, idx, c] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = 0; j < c; ++j) g[idx[i] * c + j] += raw->grad[i * c + j];
    };
  }
  return Tensor<T>(n);
}

/// Single row of a matrix as a rank-1 tensor.
template <typename T>
Tensor<T> row_vec(const Tensor<T>& a, size_t i) {
  return reshape(gather_rows(a, {i}), {a.dim(1)});
}

/// Copy of `a` with the listed rows replaced by the (shared) rank-1 token.
template <typename T>
Tensor<T> replace_rows(const Tensor<T>& a, const Tensor<T>& token,
                       const std::vector<size_t>& idx) {
  detail::require(a.rank() == 2 && token.rank() == 1 && token.dim(0) == a.dim(1),
                  detail::shapes2("replace_rows", a, token));
  const size_t r = a.dim(0), c = a.dim(1);
  std::vector<bool> masked(r, false);
  for (size_t i : idx) {
    detail::require(i < r, "replace_rows: mask index " + std::to_string(i) +
                               " out of range for " + std::to_string(r) + " rows");
    masked[i] = true;
  }
  auto n = detail::make_node({r, c}, std::vector<Tensor<T>>{a, token});
  for (size_t i = 0; i < r; ++i) {
    const T* src = masked[i] ? token.values().data() : a.values().data() + i * c;
    std::copy_n(src, c, n->value.data() + i * c);
  }
  if (n->requires_grad) {
    auto an = a.node(), tn = token.node();
    auto* raw = n.get();
    n->backprop = [an, tn, raw, masked, r, c] {
      if (raw->grad.empty()) return;
      for (size_t i = 0; i < r; ++i) {
        if (masked[i]) {
          if (tn->requires_grad) {
            auto& g = tn->ensure_grad();
            for (size_t j = 0; j < c; ++j) g[j] += raw->grad[i * c + j];
          }
        } else if (an->requires_grad) {
          auto& g = an->ensure_grad();
          for (size_t j = 0; j < c; ++j) g[i * c + j] += raw->grad[i * c + j];
        }
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  auto n = detail::make_node({}, std::vector<Tensor<T>>{a});
  T s = T(0);
  for (T v : a.values()) s += v;
  n->value[0] = s;
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[0];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

/// Sum over one axis of a rank-2 tensor: axis 0 collapses rows, axis 1 columns.
template <typename T>
Tensor<T> sum_axis(const Tensor<T>& a, size_t axis) {
  detail::require(a.rank() == 2 && axis < 2, "sum_axis: expects rank 2 and axis 0|1");
  const size_t r = a.dim(0), c = a.dim(1);
  const size_t out_len = axis == 0 ? c : r;
  auto n = detail::make_node({out_len}, std::vector<Tensor<T>>{a});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) n->value[axis == 0 ? j : i] += a.values()[i * c + j];
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, r, c, axis] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) g[i * c + j] += raw->grad[axis == 0 ? j : i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& a, size_t axis) {
  const double denom = axis == 0 ? static_cast<double>(a.dim(0)) : static_cast<double>(a.dim(1));
  return scale(sum_axis(a, axis), 1.0 / denom);
}

namespace detail {

// Order-invariant sum: equal multisets of addends give bitwise-equal results
// regardless of how the caller ordered them. Used where a reduction runs over
// the sequence axis, so that row permutations commute exactly with the op.
template <typename T>
T sorted_sum(std::vector<T>& buf) {
  std::sort(buf.begin(), buf.end());
  T s = T(0);
  for (T v : buf) s += v;
  return s;
}

}  // namespace detail

/// Row-wise softmax. Accepts rank 1 (treated as a single row) or rank 2.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  detail::require(a.rank() == 1 || a.rank() == 2, "softmax: expects rank 1 or 2");
  const size_t r = a.rank() == 2 ? a.dim(0) : 1;
  const size_t c = a.shape().back();
  detail::require(c > 0, "softmax: empty rows");
  auto n = detail::make_node(a.shape(), std::vector<Tensor<T>>{a});
  std::vector<T> buf(c);
  for (size_t i = 0; i < r; ++i) {
    const T* x = a.values().data() + i * c;
    T* y = n->value.data() + i * c;
    T m = x[0];
    for (size_t j = 1; j < c; ++j) m = std::max(m, x[j]);
    for (size_t j = 0; j < c; ++j) buf[j] = std::exp(x[j] - m);
    std::vector<T> tmp = buf;
    const T denom = detail::sorted_sum(tmp);
    for (size_t j = 0; j < c; ++j) y[j] = buf[j] / denom;
  }
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, r, c] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < r; ++i) {
        const T* p = raw->value.data() + i * c;
        const T* go = raw->grad.data() + i * c;
        T dot = T(0);
        for (size_t j = 0; j < c; ++j) dot += p[j] * go[j];
        for (size_t j = 0; j < c; ++j) g[i * c + j] += p[j] * (go[j] - dot);
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T, typename FwdFn, typename GradFn>
Tensor<T> unary_op(const char* /*name*/, const Tensor<T>& a, FwdFn fwd, GradFn grad) {
  auto n = detail::make_node(a.shape(), std::vector<Tensor<T>>{a});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = fwd(a.values()[i]);
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, grad] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i] * grad(an->value[i], raw->value[i]);
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return unary_op(
      "log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary_op(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary_op(
      "sigmoid", a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

/// softplus(x) = log(1 + e^x), evaluated stably in both tails.
template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  return unary_op(
      "softplus", a,
      [](T x) { return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x))); },
      [](T x, T) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      });
}

/// Exact-erf GELU, so finite-difference checks are clean.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  return unary_op(
      "gelu", a,
      [](T x) {
        constexpr double inv_sqrt2 = 0.7071067811865475244;
        return static_cast<T>(0.5 * static_cast<double>(x) *
                              (1.0 + std::erf(static_cast<double>(x) * inv_sqrt2)));
      },
      [](T x, T) {
        constexpr double inv_sqrt2 = 0.7071067811865475244;
        constexpr double inv_sqrt2pi = 0.3989422804014326779;
        const double xd = static_cast<double>(x);
        const double cdf = 0.5 * (1.0 + std::erf(xd * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * xd * xd);
        return static_cast<T>(cdf + xd * pdf);
      });
}

/// Row-wise layer normalization with learned gain and bias (both length c).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     double eps = 1e-5) {
  detail::require(x.rank() == 2 && gain.rank() == 1 && bias.rank() == 1 &&
                      gain.dim(0) == x.dim(1) && bias.dim(0) == x.dim(1),
                  detail::shapes2("layer_norm", x, gain));
  const size_t r = x.dim(0), c = x.dim(1);
  auto n = detail::make_node({r, c}, std::vector<Tensor<T>>{x, gain, bias});
  auto xhat = std::make_shared<std::vector<T>>(r * c);
  auto istd = std::make_shared<std::vector<T>>(r);
  for (size_t i = 0; i < r; ++i) {
    const T* xi = x.values().data() + i * c;
    T mu = T(0);
    for (size_t j = 0; j < c; ++j) mu += xi[j];
    mu /= static_cast<T>(c);
    T var = T(0);
    for (size_t j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<T>(c);
    const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*istd)[i] = inv;
    for (size_t j = 0; j < c; ++j) {
      const T xh = (xi[j] - mu) * inv;
      (*xhat)[i * c + j] = xh;
      n->value[i * c + j] = xh * gain.values()[j] + bias.values()[j];
    }
  }
  if (n->requires_grad) {
    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    auto* raw = n.get();
    n->backprop = [xn, gn, bn, raw, xhat, istd, r, c] {
      if (raw->grad.empty()) return;
      for (size_t i = 0; i < r; ++i) {
        const T* go = raw->grad.data() + i * c;
        const T* xh = xhat->data() + i * c;
        if (gn->requires_grad) {
          auto& gg = gn->ensure_grad();
          for (size_t j = 0; j < c; ++j) gg[j] += go[j] * xh[j];
        }
        if (bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (size_t j = 0; j < c; ++j) gb[j] += go[j];
        }
        if (xn->requires_grad) {
          auto& gx = xn->ensure_grad();
          T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
          for (size_t j = 0; j < c; ++j) {
            const T dxh = go[j] * gn->value[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
          }
          const T invc = T(1) / static_cast<T>(c);
          for (size_t j = 0; j < c; ++j) {
            const T dxh = go[j] * gn->value[j];
            gx[i * c + j] += (*istd)[i] * (dxh - invc * sum_dxhat - invc * xh[j] * sum_dxhat_xhat);
          }
        }
      }
    };
  }
  return Tensor<T>(n);
}

/// Inverted dropout. Identity when train is false or p == 0; otherwise each
/// entry is zeroed with probability p and survivors are scaled by 1/(1-p).
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double p, Rng& rng, bool train) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0,1)");
  if (!train || p == 0.0) return a;
  auto n = detail::make_node(a.shape(), std::vector<Tensor<T>>{a});
  auto sc = std::make_shared<std::vector<T>>(a.size());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (size_t i = 0; i < a.size(); ++i) {
    (*sc)[i] = rng.uniform() < p ? T(0) : keep_scale;
    n->value[i] = a.values()[i] * (*sc)[i];
  }
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, sc] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += raw->grad[i] * (*sc)[i];
    };
  }
  return Tensor<T>(n);
}

/// Euclidean norm per row (rank 2 -> rank 1) or of a vector (rank 1 -> scalar).
template <typename T>
Tensor<T> l2_norm(const Tensor<T>& a) {
  detail::require(a.rank() == 1 || a.rank() == 2, "l2_norm: expects rank 1 or 2");
  const size_t r = a.rank() == 2 ? a.dim(0) : 1;
  const size_t c = a.shape().back();
  std::vector<size_t> out_shape = a.rank() == 2 ? std::vector<size_t>{r} : std::vector<size_t>{};
  auto n = detail::make_node(std::move(out_shape), std::vector<Tensor<T>>{a});
  for (size_t i = 0; i < r; ++i) {
    T s = T(0);
    for (size_t j = 0; j < c; ++j) {
      const T v = a.values()[i * c + j];
      s += v * v;
    }
    n->value[i] = std::sqrt(s);
  }
  if (n->requires_grad) {
    auto an = a.node();
    auto* raw = n.get();
    n->backprop = [an, raw, r, c] {
      if (raw->grad.empty()) return;
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < r; ++i) {
        const T nv = raw->value[i];
        if (nv == T(0)) continue;
        for (size_t j = 0; j < c; ++j) g[i * c + j] += raw->grad[i] * an->value[i * c + j] / nv;
      }
    };
  }
  return Tensor<T>(n);
}

/// Cosine similarity: two vectors -> scalar, or two equal-shape matrices ->
/// per-row vector. Throws NumericError on a zero-norm row.
template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape() && (a.rank() == 1 || a.rank() == 2),
                  detail::shapes2("cosine_similarity", a, b));
  const size_t r = a.rank() == 2 ? a.dim(0) : 1;
  const size_t c = a.shape().back();
  std::vector<size_t> out_shape = a.rank() == 2 ? std::vector<size_t>{r} : std::vector<size_t>{};
  auto n = detail::make_node(std::move(out_shape), std::vector<Tensor<T>>{a, b});
  auto norms = std::make_shared<std::vector<T>>(2 * r);
  for (size_t i = 0; i < r; ++i) {
    const T* ai = a.values().data() + i * c;
    const T* bi = b.values().data() + i * c;
    T na = T(0), nb = T(0), d = T(0);
    for (size_t j = 0; j < c; ++j) {
      na += ai[j] * ai[j];
      nb += bi[j] * bi[j];
      d += ai[j] * bi[j];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na == T(0) || nb == T(0)) {
      throw NumericError("cosine_similarity: zero-norm vector at row " + std::to_string(i));
    }
    (*norms)[2 * i] = na;
    (*norms)[2 * i + 1] = nb;
    n->value[i] = d / (na * nb);
  }
  if (n->requires_grad) {
    auto an = a.node(), bn = b.node();
    auto* raw = n.get();
    n->backprop = [an, bn, raw, norms, r, c] {
      if (raw->grad.empty()) return;
      for (size_t i = 0; i < r; ++i) {
        const T go = raw->grad[i];
        if (go == T(0)) continue;
        const T* ai = an->value.data() + i * c;
        const T* bi = bn->value.data() + i * c;
        const T na = (*norms)[2 * i], nb = (*norms)[2 * i + 1];
        const T cv = raw->value[i];
        if (an->requires_grad) {
          auto& g = an->ensure_grad();
          for (size_t j = 0; j < c; ++j)
            g[i * c + j] += go * (bi[j] / (na * nb) - cv * ai[j] / (na * na));
        }
        if (bn->requires_grad) {
          auto& g = bn->ensure_grad();
          for (size_t j = 0; j < c; ++j)
            g[i * c + j] += go * (ai[j] / (na * nb) - cv * bi[j] / (nb * nb));
        }
      }
    };
  }
  return Tensor<T>(n);
}

/// Attention mixing O = P*V with an order-invariant inner reduction over the
/// sequence axis (see sorted_sum). Gradients are ordinary matmul gradients.
template <typename T>
Tensor<T> attn_mix(const Tensor<T>& p, const Tensor<T>& v) {
  detail::require(p.rank() == 2 && v.rank() == 2 && p.dim(1) == v.dim(0),
                  detail::shapes2("attn_mix", p, v));
  const size_t m = p.dim(0), k = p.dim(1), nn = v.dim(1);
  auto n = detail::make_node({m, nn}, std::vector<Tensor<T>>{p, v});
  std::vector<T> buf(k);
  for (size_t i = 0; i < m; ++i) {
    const T* pi = p.values().data() + i * k;
    for (size_t j = 0; j < nn; ++j) {
      for (size_t t = 0; t < k; ++t) buf[t] = pi[t] * v.values()[t * nn + j];
      n->value[i * nn + j] = detail::sorted_sum(buf);
    }
  }
  if (n->requires_grad) {
    auto pn = p.node(), vn = v.node();
    auto* raw = n.get();
    n->backprop = [pn, vn, raw, m, k, nn] {
      if (raw->grad.empty()) return;
      if (pn->requires_grad)
        detail::mm_acc_nt(raw->grad.data(), vn->value.data(), pn->ensure_grad().data(), m, nn, k);
      if (vn->requires_grad)
        detail::mm_acc_tn(pn->value.data(), raw->grad.data(), vn->ensure_grad().data(), m, k, nn);
    };
  }
  return Tensor<T>(n);
}

/// Stack rank-0 tensors into one rank-1 tensor.
template <typename T>
Tensor<T> stack_scalars(const std::vector<Tensor<T>>& xs) {
  detail::require(!xs.empty(), "stack_scalars: no inputs");
  for (const auto& x : xs) detail::require(x.rank() == 0, "stack_scalars: expects rank-0 inputs");
  auto n = detail::make_node({xs.size()}, xs);
  for (size_t i = 0; i < xs.size(); ++i) n->value[i] = xs[i].values()[0];
  if (n->requires_grad) {
    std::vector<std::shared_ptr<TensorNode<T>>> pn;
    for (const auto& x : xs) pn.push_back(x.node());
    auto* raw = n.get();
    n->backprop = [pn, raw] {
      if (raw->grad.empty()) return;
      for (size_t i = 0; i < pn.size(); ++i) {
        if (pn[i]->requires_grad) pn[i]->ensure_grad()[0] += raw->grad[i];
      }
    };
  }
  return Tensor<T>(n);
}

/// log(sum(exp(v))) of a rank-1 tensor, stabilized by the (constant) max shift.
template <typename T>
Tensor<T> logsumexp(const Tensor<T>& v) {
  detail::require(v.rank() == 1 && v.dim(0) > 0, "logsumexp: expects non-empty rank-1 input");
  const T m = *std::max_element(v.values().begin(), v.values().end());
  return add_scalar(log(sum_all(exp(add_scalar(v, -static_cast<double>(m))))),
                    static_cast<double>(m));
}

/// y = x*W + b for a rank-1 x (k) or the rows of a rank-2 x (r x k).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() == 1) {
    auto y = add_rowvec(matmul(reshape(x, {1, x.dim(0)}), w), b);
    return reshape(y, {w.dim(1)});
  }
  return add_rowvec(matmul(x, w), b);
}

}  // namespace bassl
