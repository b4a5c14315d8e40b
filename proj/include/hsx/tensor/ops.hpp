#pragma once

// Core differentiable operations: arithmetic, matmul, activations, reshaping
// and reductions. Matrix products run on Eigen's GEMM kernels over row-major
// maps of the tensor storage.

#include <Eigen/Core>

#include <cmath>
#include <numbers>

#include "hsx/tensor/tensor.hpp"

namespace hsx::tensor {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using CMatMap = Eigen::Map<const RowMat<T>>;

namespace detail {

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw Error(ErrorKind::Dimension, std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                          " vs " + shape_str(b.shape()));
}

// True when `b` matches the trailing dimensions of `a`.
inline bool trailing_match(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

}  // namespace detail

/// Elementwise sum. `b` may also match the trailing dimensions of `a`, in which
/// case it is broadcast over the leading ones (bias addition), or hold a
/// single element that is added everywhere.
template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.size() != 1 && !detail::trailing_match(a.shape(), b.shape()))
    throw Error(ErrorKind::Dimension,
                "add: cannot broadcast " + shape_str(b.shape()) + " onto " + shape_str(a.shape()));
  const std::size_t n = a.size(), m = b.size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i % m];
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {pa, pb},
      [pa, pb, n, m](Node<T>& self) {
        if (pa->requires_grad) {
          auto& g = pa->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i % m] += self.grad[i];
        }
      }, "add");
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  const std::size_t n = a.size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {pa, pb},
      [pa, pb, n](Node<T>& self) {
        if (pa->requires_grad) {
          auto& g = pa->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i] -= self.grad[i];
        }
      }, "sub");
}

/// Elementwise (Hadamard) product, with the same trailing broadcast as add.
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (!detail::trailing_match(a.shape(), b.shape()))
    throw Error(ErrorKind::Dimension,
                "mul: cannot broadcast " + shape_str(b.shape()) + " onto " + shape_str(a.shape()));
  const std::size_t n = a.size(), m = b.size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i % m];
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {pa, pb},
      [pa, pb, n, m](Node<T>& self) {
        if (pa->requires_grad) {
          auto& g = pa->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * pb->value[i % m];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i % m] += self.grad[i] * pa->value[i];
        }
      }, "mul");
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  const std::size_t n = a.size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
  auto pa = a.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {pa},
      [pa, n, s](Node<T>& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * s;
      }, "scale");
}

/// Matrix product of a [M x K] and b [K x N].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw Error(ErrorKind::Dimension,
                "matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const auto M = static_cast<Eigen::Index>(a.dim(0));
  const auto K = static_cast<Eigen::Index>(a.dim(1));
  const auto N = static_cast<Eigen::Index>(b.dim(1));
  std::vector<T> out(static_cast<std::size_t>(M * N));
  MatMap<T>(out.data(), M, N).noalias() = CMatMap<T>(a.data().data(), M, K) * CMatMap<T>(b.data().data(), K, N);
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_result<T>({a.dim(0), b.dim(1)}, std::move(out), {pa, pb},
      [pa, pb, M, K, N](Node<T>& self) {
        CMatMap<T> dC(self.grad.data(), M, N);
        if (pa->requires_grad)
          MatMap<T>(pa->ensure_grad().data(), M, K).noalias() += dC * CMatMap<T>(pb->value.data(), K, N).transpose();
        if (pb->requires_grad)
          MatMap<T>(pb->ensure_grad().data(), K, N).noalias() += CMatMap<T>(pa->value.data(), M, K).transpose() * dC;
      }, "matmul");
}

/// x [.. x K] times w [K x N] plus optional bias [N]; leading dims are flattened.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias = nullptr);

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size())
    throw Error(ErrorKind::Dimension,
                "reshape: " + shape_str(a.shape()) + " cannot become " + shape_str(shape));
  auto pa = a.node_ptr();
  const std::size_t n = a.size();
  return make_result<T>(std::move(shape), a.values(), {pa},
      [pa, n](Node<T>& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
      }, "reshape");
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias) {
  if (x.rank() < 1 || w.rank() != 2 || x.shape().back() != w.dim(0))
    throw Error(ErrorKind::Dimension,
                "linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const std::size_t rows = x.size() / w.dim(0);
  auto y = matmul(x.rank() == 2 ? x : reshape(x, {rows, w.dim(0)}), w);
  if (bias) y = add(y, *bias);
  if (x.rank() == 2) return y;
  Shape out = x.shape();
  out.back() = w.dim(1);
  return reshape(y, std::move(out));
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
  const std::size_t n = a.size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
  auto pa = a.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {pa},
      [pa, n](Node<T>& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          if (pa->value[i] > T(0)) g[i] += self.grad[i];
      }, "relu");
}

/// Exact (erf-based) GELU.
template <class T>
Tensor<T> gelu(const Tensor<T>& a) {
  const std::size_t n = a.size();
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = T(0.5) * a[i] * (T(1) + std::erf(a[i] * kInvSqrt2));
  auto pa = a.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {pa},
      [pa, n](Node<T>& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          const T x = pa->value[i];
          const T cdf = T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
          const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * x * x);
          g[i] += self.grad[i] * (cdf + x * pdf);
        }
      }, "gelu");
}

/// Softmax over the last axis, computed with max-subtraction.
template <class T>
Tensor<T> softmax(const Tensor<T>& a) {
  if (a.rank() < 1) throw Error(ErrorKind::Dimension, "softmax needs rank >= 1");
  const std::size_t K = a.shape().back();
  const std::size_t rows = K ? a.size() / K : 0;
  std::vector<T> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a.data().data() + r * K;
    T* y = out.data() + r * K;
    const T mx = *std::max_element(x, x + K);
    T sum = 0;
    for (std::size_t k = 0; k < K; ++k) sum += (y[k] = std::exp(x[k] - mx));
    for (std::size_t k = 0; k < K; ++k) y[k] /= sum;
  }
  auto pa = a.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {pa},
      [pa, rows, K](Node<T>& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const T* y = self.value.data() + r * K;
          const T* dy = self.grad.data() + r * K;
          T dot = 0;
          for (std::size_t k = 0; k < K; ++k) dot += y[k] * dy[k];
          for (std::size_t k = 0; k < K; ++k) g[r * K + k] += y[k] * (dy[k] - dot);
        }
      }, "softmax");
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  auto pa = a.node_ptr();
  const std::size_t n = a.size();
  return make_result<T>({}, {s}, {pa},
      [pa, n](Node<T>& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
      }, "sum");
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), a.size() ? T(1) / static_cast<T>(a.size()) : T(0));
}

/// Mean over axis 1 of a [B x L x D] tensor -> [B x D].
template <class T>
Tensor<T> mean_axis1(const Tensor<T>& a) {
  if (a.rank() != 3) throw Error(ErrorKind::Dimension, "mean_axis1 expects rank 3, got " + shape_str(a.shape()));
  const std::size_t B = a.dim(0), L = a.dim(1), D = a.dim(2);
  std::vector<T> out(B * D, T(0));
  const T inv = T(1) / static_cast<T>(L);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t d = 0; d < D; ++d) out[b * D + d] += a[(b * L + l) * D + d];
  for (auto& v : out) v *= inv;
  auto pa = a.node_ptr();
  return make_result<T>({B, D}, std::move(out), {pa},
      [pa, B, L, D, inv](Node<T>& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t l = 0; l < L; ++l)
            for (std::size_t d = 0; d < D; ++d) g[(b * L + l) * D + d] += self.grad[b * D + d] * inv;
      }, "mean_axis1");
}

/// Rows of a [N x D] matrix selected by index -> [M x D].
template <class T>
Tensor<T> gather_rows(const Tensor<T>& a, std::vector<std::size_t> rows) {
  if (a.rank() != 2) throw Error(ErrorKind::Dimension, "gather_rows expects a matrix");
  const std::size_t N = a.dim(0), D = a.dim(1);
  std::vector<T> out(rows.size() * D);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= N)
      throw Error(ErrorKind::Dimension, "gather_rows: index " + std::to_string(rows[i]) +
                                            " out of range for " + std::to_string(N) + " rows");
    std::copy_n(a.data().data() + rows[i] * D, D, out.data() + i * D);
  }
  auto pa = a.node_ptr();
  const std::size_t M = rows.size();
  return make_result<T>({M, D}, std::move(out), {pa},
      [pa, rows = std::move(rows), D](Node<T>& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t d = 0; d < D; ++d) g[rows[i] * D + d] += self.grad[i * D + d];
      }, "gather_rows");
}

/// Replaces the rows of a [N x D] matrix flagged in `mask` with the vector
/// `fill` [D]; gradients of replaced rows flow into `fill`.
template <class T>
Tensor<T> mask_rows(const Tensor<T>& a, const Tensor<T>& fill, std::vector<bool> mask) {
  if (a.rank() != 2 || fill.size() != a.dim(1) || mask.size() != a.dim(0))
    throw Error(ErrorKind::Dimension, "mask_rows: incompatible operands " + shape_str(a.shape()) +
                                          " / " + shape_str(fill.shape()));
  const std::size_t N = a.dim(0), D = a.dim(1);
  std::vector<T> out(a.values());
  for (std::size_t i = 0; i < N; ++i)
    if (mask[i]) std::copy_n(fill.data().data(), D, out.data() + i * D);
  auto pa = a.node_ptr(), pf = fill.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {pa, pf},
      [pa, pf, mask = std::move(mask), N, D](Node<T>& self) {
        for (std::size_t i = 0; i < N; ++i) {
          Node<T>* dst = mask[i] ? pf.get() : pa.get();
          if (!dst->requires_grad) continue;
          auto& g = dst->ensure_grad();
          const std::size_t off = mask[i] ? 0 : i * D;
          for (std::size_t d = 0; d < D; ++d) g[off + d] += self.grad[i * D + d];
        }
      }, "mask_rows");
}

/// Concatenation along the last axis of two tensors with equal leading dims.
template <class T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank() || a.rank() == 0 ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin()))
    throw Error(ErrorKind::Dimension,
                "concat_last: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t ca = a.shape().back(), cb = b.shape().back();
  const std::size_t rows = ca ? a.size() / ca : b.size() / cb;
  std::vector<T> out(rows * (ca + cb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(b.data().data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  Shape s = a.shape();
  s.back() = ca + cb;
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_result<T>(std::move(s), std::move(out), {pa, pb},
      [pa, pb, rows, ca, cb](Node<T>& self) {
        const std::size_t c = ca + cb;
        if (pa->requires_grad) {
          auto& g = pa->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < ca; ++k) g[r * ca + k] += self.grad[r * c + k];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < cb; ++k) g[r * cb + k] += self.grad[r * c + ca + k];
        }
      }, "concat_last");
}

}  // namespace hsx::tensor
