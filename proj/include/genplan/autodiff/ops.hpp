#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "genplan/autodiff/tape.hpp"

namespace genplan::ad {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using CMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MMap = Eigen::Map<RowMat<T>>;

inline std::string shape_str(std::size_t r, std::size_t c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

template <class T>
void require_same(const char* op, Var<T> a, Var<T> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch(std::string(op) + ": " + shape_str(a.rows(), a.cols()) + " vs " +
                        shape_str(b.rows(), b.cols()));
}

inline void require_index(const char* op, const Index& idx, std::size_t bound) {
  for (auto i : *idx)
    if (i >= bound)
      throw IndexError(std::string(op) + ": index " + std::to_string(i) + " out of range " +
                       std::to_string(bound));
}

// Elementwise unary op with derivative expressed through input x and output y.
template <class T, class F, class D>
Var<T> unary(Var<T> a, F f, D dfdx) {
  Tape<T>& t = *a.tape;
  const std::size_t n = a.rows() * a.cols();
  const T* x = a.data();
  std::vector<T> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
  return t.make(a.rows(), a.cols(), std::move(y), {a}, [a, dfdx](Tape<T>& tp, std::uint32_t self) {
    const T* g = tp.grad_or_null(self);
    const T* x = tp.value(a.id);
    const T* y = tp.value(self);
    T* ga = tp.grad(a.id);
    const std::size_t n = tp.size(self);
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace detail

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: " + detail::shape_str(a.rows(), a.cols()) + " x " +
                        detail::shape_str(b.rows(), b.cols()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<T> out(m * n);
  detail::MMap<T>(out.data(), m, n).noalias() =
      detail::CMap<T>(a.data(), m, k) * detail::CMap<T>(b.data(), k, n);
  return a.tape->make(m, n, std::move(out), {a, b}, [a, b, m, k, n](Tape<T>& t, std::uint32_t self) {
    detail::CMap<T> g(t.grad_or_null(self), m, n);
    if (t.needs_grad(a.id))
      detail::MMap<T>(t.grad(a.id), m, k).noalias() += g * detail::CMap<T>(t.value(b.id), k, n).transpose();
    if (t.needs_grad(b.id))
      detail::MMap<T>(t.grad(b.id), k, n).noalias() += detail::CMap<T>(t.value(a.id), m, k).transpose() * g;
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same("add", a, b);
  const std::size_t n = a.rows() * a.cols();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] + b.data()[i];
  return a.tape->make(a.rows(), a.cols(), std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    const std::size_t n = t.size(self);
    for (Var<T> in : {a, b}) {
      if (!t.needs_grad(in.id)) continue;
      T* gi = t.grad(in.id);
      for (std::size_t i = 0; i < n; ++i) gi[i] += g[i];
    }
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same("sub", a, b);
  const std::size_t n = a.rows() * a.cols();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] - b.data()[i];
  return a.tape->make(a.rows(), a.cols(), std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    const std::size_t n = t.size(self);
    if (t.needs_grad(a.id)) {
      T* ga = t.grad(a.id);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (t.needs_grad(b.id)) {
      T* gb = t.grad(b.id);
      for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
    }
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same("mul", a, b);
  const std::size_t n = a.rows() * a.cols();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] * b.data()[i];
  return a.tape->make(a.rows(), a.cols(), std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    const std::size_t n = t.size(self);
    if (t.needs_grad(a.id)) {
      T* ga = t.grad(a.id);
      const T* vb = t.value(b.id);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
    }
    if (t.needs_grad(b.id)) {
      T* gb = t.grad(b.id);
      const T* va = t.value(a.id);
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
    }
  });
}

// a [m x n] + bias [1 x n] broadcast over rows.
template <class T>
Var<T> add_bias(Var<T> a, Var<T> bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols())
    throw ShapeMismatch("add_bias: " + detail::shape_str(a.rows(), a.cols()) + " + " +
                        detail::shape_str(bias.rows(), bias.cols()));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(a.data(), a.data() + m * n);
  const T* b = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  return a.tape->make(m, n, std::move(out), {a, bias}, [a, bias, m, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    if (t.needs_grad(a.id)) {
      T* ga = t.grad(a.id);
      for (std::size_t i = 0; i < m * n; ++i) ga[i] += g[i];
    }
    if (t.needs_grad(bias.id)) {
      T* gb = t.grad(bias.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  return detail::unary(a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <class T>
Var<T> add_scalar(Var<T> a, T c) {
  return detail::unary(a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <class T>
Var<T> relu(Var<T> a) {
  return detail::unary(a, [](T x) { return x > T(0) ? x : T(0); },
                       [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> exp(Var<T> a) {
  return detail::unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Var<T> log(Var<T> a) {
  return detail::unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <class T>
Var<T> square(Var<T> a) {
  return detail::unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

// Gradient passes only where lo < x < hi.
template <class T>
Var<T> clip(Var<T> a, T lo, T hi) {
  return detail::unary(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                       [lo, hi](T x, T) { return (x > lo && x < hi) ? T(1) : T(0); });
}

// Elementwise minimum; ties send the gradient to a.
template <class T>
Var<T> minimum(Var<T> a, Var<T> b) {
  detail::require_same("minimum", a, b);
  const std::size_t n = a.rows() * a.cols();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::min(a.data()[i], b.data()[i]);
  return a.tape->make(a.rows(), a.cols(), std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    const T* va = t.value(a.id);
    const T* vb = t.value(b.id);
    const std::size_t n = t.size(self);
    T* ga = t.needs_grad(a.id) ? t.grad(a.id) : nullptr;
    T* gb = t.needs_grad(b.id) ? t.grad(b.id) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      if (va[i] <= vb[i]) {
        if (ga) ga[i] += g[i];
      } else if (gb) {
        gb[i] += g[i];
      }
    }
  });
}

// Column-wise concatenation (axis 1) of matrices with equal row counts.
template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) throw ShapeMismatch("concat_cols: row counts differ");
    n += p.cols();
  }
  std::vector<T> out(m * n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(p.data() + i * c, c, out.data() + i * n + off);
    off += c;
  }
  return parts[0].tape->make(m, n, std::move(out), parts, [parts, m, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t c = t.cols(p.id);
      if (t.needs_grad(p.id)) {
        T* gp = t.grad(p.id);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * n + off + j];
      }
      off += c;
    }
  });
}

// Row-wise concatenation (axis 0) of matrices with equal column counts.
template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ShapeMismatch("concat_rows: column counts differ");
    m += p.rows();
  }
  std::vector<T> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.data(), p.data() + p.rows() * n);
  return parts[0].tape->make(m, n, std::move(out), parts, [parts](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t sz = t.size(p.id);
      if (t.needs_grad(p.id)) {
        T* gp = t.grad(p.id);
        for (std::size_t i = 0; i < sz; ++i) gp[i] += g[off + i];
      }
      off += sz;
    }
  });
}

// Rows [begin, end) of a.
template <class T>
Var<T> row_slice(Var<T> a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) throw IndexError("row_slice: bad range");
  const std::size_t n = a.cols();
  std::vector<T> out(a.data() + begin * n, a.data() + end * n);
  return a.tape->make(end - begin, n, std::move(out), {a}, [a, begin, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    T* ga = t.grad(a.id) + begin * n;
    const std::size_t sz = t.size(self);
    for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i];
  });
}

// out[r] = a[idx[r]].
template <class T>
Var<T> gather_rows(Var<T> a, Index idx) {
  detail::require_index("gather_rows", idx, a.rows());
  const std::size_t n = a.cols();
  std::vector<T> out(idx->size() * n);
  for (std::size_t r = 0; r < idx->size(); ++r) std::copy_n(a.data() + (*idx)[r] * n, n, out.data() + r * n);
  return a.tape->make(idx->size(), n, std::move(out), {a}, [a, idx, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    T* ga = t.grad(a.id);
    for (std::size_t r = 0; r < idx->size(); ++r) {
      T* dst = ga + (*idx)[r] * n;
      const T* src = g + r * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  });
}

// out[s] = sum of rows r with seg[r] == s; empty segments are zero.
template <class T>
Var<T> segment_sum(Var<T> a, Index seg, std::size_t num_segments) {
  if (seg->size() != a.rows()) throw ShapeMismatch("segment_sum: one segment id per row required");
  detail::require_index("segment_sum", seg, num_segments);
  const std::size_t n = a.cols();
  std::vector<T> out(num_segments * n, T(0));
  for (std::size_t r = 0; r < seg->size(); ++r) {
    T* dst = out.data() + (*seg)[r] * n;
    const T* src = a.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
  }
  return a.tape->make(num_segments, n, std::move(out), {a}, [a, seg, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    T* ga = t.grad(a.id);
    for (std::size_t r = 0; r < seg->size(); ++r) {
      const T* src = g + (*seg)[r] * n;
      T* dst = ga + r * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  });
}

template <class T>
Var<T> segment_mean(Var<T> a, Index seg, std::size_t num_segments) {
  if (seg->size() != a.rows()) throw ShapeMismatch("segment_mean: one segment id per row required");
  detail::require_index("segment_mean", seg, num_segments);
  std::vector<std::size_t> count(num_segments, 0);
  for (auto s : *seg) ++count[s];
  std::vector<T> w(seg->size());
  for (std::size_t r = 0; r < seg->size(); ++r) w[r] = T(1) / static_cast<T>(count[(*seg)[r]]);
  const std::size_t n = a.cols();
  std::vector<T> out(num_segments * n, T(0));
  for (std::size_t r = 0; r < seg->size(); ++r) {
    T* dst = out.data() + (*seg)[r] * n;
    const T* src = a.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] += w[r] * src[j];
  }
  return a.tape->make(num_segments, n, std::move(out), {a},
                      [a, seg, n, w = std::move(w)](Tape<T>& t, std::uint32_t self) {
                        const T* g = t.grad_or_null(self);
                        T* ga = t.grad(a.id);
                        for (std::size_t r = 0; r < seg->size(); ++r) {
                          const T* src = g + (*seg)[r] * n;
                          T* dst = ga + r * n;
                          for (std::size_t j = 0; j < n; ++j) dst[j] += w[r] * src[j];
                        }
                      });
}

// Columnwise max over each segment; empty segments give zero. The gradient
// goes to the first row attaining the max.
template <class T>
Var<T> segment_max(Var<T> a, Index seg, std::size_t num_segments) {
  if (seg->size() != a.rows()) throw ShapeMismatch("segment_max: one segment id per row required");
  detail::require_index("segment_max", seg, num_segments);
  const std::size_t n = a.cols();
  constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();
  auto arg = std::make_shared<std::vector<std::uint32_t>>(num_segments * n, none);
  std::vector<T> out(num_segments * n, T(0));
  const T* x = a.data();
  for (std::size_t r = 0; r < seg->size(); ++r) {
    const std::size_t s = (*seg)[r];
    for (std::size_t j = 0; j < n; ++j) {
      auto& best = (*arg)[s * n + j];
      if (best == none || x[r * n + j] > out[s * n + j]) {
        best = static_cast<std::uint32_t>(r);
        out[s * n + j] = x[r * n + j];
      }
    }
  }
  return a.tape->make(num_segments, n, std::move(out), {a}, [a, arg, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    T* ga = t.grad(a.id);
    for (std::size_t k = 0; k < arg->size(); ++k)
      if ((*arg)[k] != none) ga[(*arg)[k] * n + k % n] += g[k];
  });
}

// Log-softmax of a column vector within each segment.
template <class T>
Var<T> segment_logsoftmax(Var<T> x, Index seg, std::size_t num_segments) {
  if (x.cols() != 1 || seg->size() != x.rows())
    throw ShapeMismatch("segment_logsoftmax: needs a column vector with one segment id per row");
  detail::require_index("segment_logsoftmax", seg, num_segments);
  const T* v = x.data();
  std::vector<T> mx(num_segments, -std::numeric_limits<T>::infinity());
  for (std::size_t r = 0; r < seg->size(); ++r) mx[(*seg)[r]] = std::max(mx[(*seg)[r]], v[r]);
  std::vector<T> z(num_segments, T(0));
  for (std::size_t r = 0; r < seg->size(); ++r) z[(*seg)[r]] += std::exp(v[r] - mx[(*seg)[r]]);
  std::vector<T> out(seg->size());
  for (std::size_t r = 0; r < seg->size(); ++r) {
    const std::size_t s = (*seg)[r];
    out[r] = v[r] - mx[s] - std::log(z[s]);
  }
  return x.tape->make(x.rows(), 1, std::move(out), {x},
                      [x, seg, num_segments](Tape<T>& t, std::uint32_t self) {
                        const T* g = t.grad_or_null(self);
                        const T* y = t.value(self);
                        std::vector<T> gsum(num_segments, T(0));
                        for (std::size_t r = 0; r < seg->size(); ++r) gsum[(*seg)[r]] += g[r];
                        T* gx = t.grad(x.id);
                        for (std::size_t r = 0; r < seg->size(); ++r)
                          gx[r] += g[r] - std::exp(y[r]) * gsum[(*seg)[r]];
                      });
}

template <class T>
Var<T> segment_softmax(Var<T> x, Index seg, std::size_t num_segments) {
  if (x.cols() != 1 || seg->size() != x.rows())
    throw ShapeMismatch("segment_softmax: needs a column vector with one segment id per row");
  detail::require_index("segment_softmax", seg, num_segments);
  const T* v = x.data();
  std::vector<T> mx(num_segments, -std::numeric_limits<T>::infinity());
  for (std::size_t r = 0; r < seg->size(); ++r) mx[(*seg)[r]] = std::max(mx[(*seg)[r]], v[r]);
  std::vector<T> out(seg->size()), z(num_segments, T(0));
  for (std::size_t r = 0; r < seg->size(); ++r) {
    out[r] = std::exp(v[r] - mx[(*seg)[r]]);
    z[(*seg)[r]] += out[r];
  }
  for (std::size_t r = 0; r < seg->size(); ++r) out[r] /= z[(*seg)[r]];
  return x.tape->make(x.rows(), 1, std::move(out), {x},
                      [x, seg, num_segments](Tape<T>& t, std::uint32_t self) {
                        const T* g = t.grad_or_null(self);
                        const T* y = t.value(self);
                        std::vector<T> dot(num_segments, T(0));
                        for (std::size_t r = 0; r < seg->size(); ++r) dot[(*seg)[r]] += g[r] * y[r];
                        T* gx = t.grad(x.id);
                        for (std::size_t r = 0; r < seg->size(); ++r) gx[r] += y[r] * (g[r] - dot[(*seg)[r]]);
                      });
}

// Per-row dot product: out[r] = <a[r], b[r]>, shape [m x 1].
template <class T>
Var<T> row_dot(Var<T> a, Var<T> b) {
  detail::require_same("row_dot", a, b);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(m, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += a.data()[i * n + j] * b.data()[i * n + j];
  return a.tape->make(m, 1, std::move(out), {a, b}, [a, b, m, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    if (t.needs_grad(a.id)) {
      T* ga = t.grad(a.id);
      const T* vb = t.value(b.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i] * vb[i * n + j];
    }
    if (t.needs_grad(b.id)) {
      T* gb = t.grad(b.id);
      const T* va = t.value(a.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[i * n + j] += g[i] * va[i * n + j];
    }
  });
}

// out[i, :] = a[i, :] * w[i].
template <class T>
Var<T> scale_rows(Var<T> a, Var<T> w) {
  if (w.cols() != 1 || w.rows() != a.rows())
    throw ShapeMismatch("scale_rows: weights must be [rows x 1]");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] * w.data()[i];
  return a.tape->make(m, n, std::move(out), {a, w}, [a, w, m, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    if (t.needs_grad(a.id)) {
      T* ga = t.grad(a.id);
      const T* vw = t.value(w.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * vw[i];
    }
    if (t.needs_grad(w.id)) {
      T* gw = t.grad(w.id);
      const T* va = t.value(a.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gw[i] += g[i * n + j] * va[i * n + j];
    }
  });
}

// Sum of every entry, as a 1x1.
template <class T>
Var<T> sum(Var<T> a) {
  T s = T(0);
  const std::size_t n = a.rows() * a.cols();
  for (std::size_t i = 0; i < n; ++i) s += a.data()[i];
  return a.tape->make(1, 1, {s}, {a}, [a](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad_or_null(self)[0];
    T* ga = t.grad(a.id);
    const std::size_t n = t.size(a.id);
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.rows() * a.cols();
  if (n == 0) throw ShapeMismatch("mean of an empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(n));
}

// Reduction along an axis: axis 0 gives [1 x n], axis 1 gives [m x 1].
template <class T>
Var<T> sum(Var<T> a, int axis) {
  const std::size_t m = a.rows(), n = a.cols();
  if (axis != 0 && axis != 1) throw ShapeMismatch("sum: axis must be 0 or 1");
  std::vector<T> out(axis == 0 ? n : m, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += a.data()[i * n + j];
  return a.tape->make(axis == 0 ? 1 : m, axis == 0 ? n : 1, std::move(out), {a},
                      [a, axis, m, n](Tape<T>& t, std::uint32_t self) {
                        const T* g = t.grad_or_null(self);
                        T* ga = t.grad(a.id);
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[axis == 0 ? j : i];
                      });
}

template <class T>
Var<T> mean(Var<T> a, int axis) {
  const std::size_t count = axis == 0 ? a.rows() : a.cols();
  if (count == 0) throw ShapeMismatch("mean over an empty axis");
  return scale(sum(a, axis), T(1) / static_cast<T>(count));
}

template <class T>
Var<T> max(Var<T> a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeMismatch("max: axis must be 0 or 1");
  const std::size_t m = a.rows(), n = a.cols();
  if (m == 0 || n == 0) throw ShapeMismatch("max over an empty axis");
  if (axis == 0) return segment_max(a, make_index(std::vector<std::uint32_t>(m, 0)), 1);
  auto arg = std::make_shared<std::vector<std::size_t>>(m, 0);
  std::vector<T> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (a.data()[i * n + j] > a.data()[i * n + best]) best = j;
    (*arg)[i] = best;
    out[i] = a.data()[i * n + best];
  }
  return a.tape->make(m, 1, std::move(out), {a}, [a, arg, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad_or_null(self);
    T* ga = t.grad(a.id);
    for (std::size_t i = 0; i < arg->size(); ++i) ga[i * n + (*arg)[i]] += g[i];
  });
}

}  // namespace genplan::ad
