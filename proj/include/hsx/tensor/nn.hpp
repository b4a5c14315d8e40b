#pragma once

// Normalisation, regularisation, attention and loss primitives.

#include <cmath>
#include <cstdint>
#include <limits>

#include "hsx/core/rng.hpp"
#include "hsx/tensor/ops.hpp"

namespace hsx::tensor {

/// Layer normalisation over the last axis with learned gain and shift.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
  const std::size_t D = x.shape().back();
  if (gamma.size() != D || beta.size() != D)
    throw Error(ErrorKind::Dimension, "layer_norm: parameter size does not match " + shape_str(x.shape()));
  const std::size_t rows = x.size() / D;
  std::vector<T> out(x.size()), xhat(x.size()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * D;
    T mu = 0;
    for (std::size_t d = 0; d < D; ++d) mu += xr[d];
    mu /= static_cast<T>(D);
    T var = 0;
    for (std::size_t d = 0; d < D; ++d) var += (xr[d] - mu) * (xr[d] - mu);
    var /= static_cast<T>(D);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t d = 0; d < D; ++d) {
      xhat[r * D + d] = (xr[d] - mu) * is;
      out[r * D + d] = xhat[r * D + d] * gamma[d] + beta[d];
    }
  }
  auto px = x.node_ptr(), pg = gamma.node_ptr(), pb = beta.node_ptr();
  return make_result<T>(x.shape(), std::move(out), {px, pg, pb},
      [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, D](Node<T>& self) {
        const T* dy = self.grad.data();
        if (pg->requires_grad) {
          auto& g = pg->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t d = 0; d < D; ++d) g[d] += dy[r * D + d] * xhat[r * D + d];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t d = 0; d < D; ++d) g[d] += dy[r * D + d];
        }
        if (px->requires_grad) {
          auto& g = px->ensure_grad();
          const T invD = T(1) / static_cast<T>(D);
          for (std::size_t r = 0; r < rows; ++r) {
            T s1 = 0, s2 = 0;
            for (std::size_t d = 0; d < D; ++d) {
              const T dxh = dy[r * D + d] * pg->value[d];
              s1 += dxh;
              s2 += dxh * xhat[r * D + d];
            }
            for (std::size_t d = 0; d < D; ++d) {
              const T dxh = dy[r * D + d] * pg->value[d];
              g[r * D + d] += inv_std[r] * (dxh - invD * s1 - xhat[r * D + d] * invD * s2);
            }
          }
        }
      }, "layer_norm");
}

/// Running statistics of a batch-norm layer (not trained by gradient).
template <class T>
struct BatchNormStats {
  std::vector<T> mean;
  std::vector<T> var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BatchNormStats(std::size_t channels = 0) : mean(channels, T(0)), var(channels, T(1)) {}
};

/// Batch normalisation over the last (channel) axis. Train mode normalises
/// with the batch statistics and updates the running ones; eval mode is a
/// fixed affine map using the running statistics.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormStats<T>& stats, bool train) {
  const std::size_t C = x.shape().back();
  if (gamma.size() != C || beta.size() != C || stats.mean.size() != C)
    throw Error(ErrorKind::Dimension, "batch_norm: channel count mismatch for " + shape_str(x.shape()));
  const std::size_t rows = x.size() / C;
  std::vector<T> mu(C, T(0)), var(C, T(0));
  if (train) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < C; ++c) mu[c] += x[r * C + c];
    for (auto& m : mu) m /= static_cast<T>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const T d = x[r * C + c] - mu[c];
        var[c] += d * d;
      }
    for (auto& v : var) v /= static_cast<T>(rows);
    const T unbias = rows > 1 ? static_cast<T>(rows) / static_cast<T>(rows - 1) : T(1);
    for (std::size_t c = 0; c < C; ++c) {
      stats.mean[c] = (T(1) - stats.momentum) * stats.mean[c] + stats.momentum * mu[c];
      stats.var[c] = (T(1) - stats.momentum) * stats.var[c] + stats.momentum * var[c] * unbias;
    }
  } else {
    mu = stats.mean;
    var = stats.var;
  }
  std::vector<T> inv_std(C), xhat(x.size()), out(x.size());
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + stats.eps);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t i = r * C + c;
      xhat[i] = (x[i] - mu[c]) * inv_std[c];
      out[i] = xhat[i] * gamma[c] + beta[c];
    }
  auto px = x.node_ptr(), pg = gamma.node_ptr(), pb = beta.node_ptr();
  return make_result<T>(x.shape(), std::move(out), {px, pg, pb},
      [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, C, train](Node<T>& self) {
        const T* dy = self.grad.data();
        std::vector<T> sdy(C, T(0)), sdyx(C, T(0));
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < C; ++c) {
            sdy[c] += dy[r * C + c];
            sdyx[c] += dy[r * C + c] * xhat[r * C + c];
          }
        if (pg->requires_grad) {
          auto& g = pg->ensure_grad();
          for (std::size_t c = 0; c < C; ++c) g[c] += sdyx[c];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t c = 0; c < C; ++c) g[c] += sdy[c];
        }
        if (px->requires_grad) {
          auto& g = px->ensure_grad();
          const T invN = T(1) / static_cast<T>(rows);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t i = r * C + c;
              const T k = pg->value[c] * inv_std[c];
              if (train)
                g[i] += k * (dy[i] - invN * sdy[c] - xhat[i] * invN * sdyx[c]);
              else
                g[i] += k * dy[i];
            }
        }
      }, "batch_norm");
}

/// Inverted dropout. Eval mode (or p == 0) returns the input handle itself.
/// The keep mask is drawn from (seed, stream), so repeated calls with the same
/// stream reproduce the same mask.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, T p, bool train, std::uint64_t seed, StreamId stream_id) {
  if (p < T(0) || p >= T(1))
    throw Error(ErrorKind::Config, "dropout probability must lie in [0, 1)");
  if (!train || p == T(0)) return x;
  CounterRng rng(seed, stream_id);
  const T keep_scale = T(1) / (T(1) - p);
  std::vector<T> mask(x.size()), out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.uniform() >= static_cast<double>(p) ? keep_scale : T(0);
    out[i] = x[i] * mask[i];
  }
  auto px = x.node_ptr();
  return make_result<T>(x.shape(), std::move(out), {px},
      [px, mask = std::move(mask)](Node<T>& self) {
        auto& g = px->ensure_grad();
        for (std::size_t i = 0; i < mask.size(); ++i) g[i] += self.grad[i] * mask[i];
      }, "dropout");
}

/// Multi-head scaled dot-product self-attention over B independent sequences.
/// `qkv` is [B*L x 3D] holding the query, key and value projections side by
/// side; the result is [B*L x D] with heads concatenated.
template <class T>
Tensor<T> self_attention(const Tensor<T>& qkv, std::size_t B, std::size_t L, std::size_t heads) {
  if (qkv.rank() != 2 || qkv.dim(0) != B * L || qkv.dim(1) % 3 != 0)
    throw Error(ErrorKind::Dimension, "self_attention: qkv shape " + shape_str(qkv.shape()));
  const std::size_t D = qkv.dim(1) / 3;
  if (heads == 0 || D % heads != 0)
    throw Error(ErrorKind::Config, "self_attention: model width not divisible by head count");
  const std::size_t dh = D / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));
  using Strided = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
  using StridedMut = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
  const auto l = static_cast<Eigen::Index>(L), e = static_cast<Eigen::Index>(dh);
  std::vector<T> probs(B * heads * L * L);
  std::vector<T> out(B * L * D);
  const T* src = qkv.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      const T* base = src + b * L * 3 * D + h * dh;
      Strided Q(base, l, e, Eigen::OuterStride<>(3 * D));
      Strided K(base + D, l, e, Eigen::OuterStride<>(3 * D));
      Strided V(base + 2 * D, l, e, Eigen::OuterStride<>(3 * D));
      MatMap<T> P(probs.data() + (b * heads + h) * L * L, l, l);
      P.noalias() = (Q * K.transpose()) * sc;
      for (Eigen::Index i = 0; i < l; ++i) {
        const T mx = P.row(i).maxCoeff();
        P.row(i) = (P.row(i).array() - mx).exp();
        P.row(i) /= P.row(i).sum();
      }
      StridedMut O(out.data() + b * L * D + h * dh, l, e, Eigen::OuterStride<>(D));
      O.noalias() = P * V;
    }
  auto pq = qkv.node_ptr();
  return make_result<T>({B * L, D}, std::move(out), {pq},
      [pq, probs = std::move(probs), B, L, D, heads, dh, sc](Node<T>& self) {
        auto& g = pq->ensure_grad();
        const auto l = static_cast<Eigen::Index>(L), e = static_cast<Eigen::Index>(dh);
        RowMat<T> dP(l, l), dS(l, l);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = b * L * 3 * D + h * dh;
            Strided Q(pq->value.data() + off, l, e, Eigen::OuterStride<>(3 * D));
            Strided K(pq->value.data() + off + D, l, e, Eigen::OuterStride<>(3 * D));
            Strided V(pq->value.data() + off + 2 * D, l, e, Eigen::OuterStride<>(3 * D));
            StridedMut dQ(g.data() + off, l, e, Eigen::OuterStride<>(3 * D));
            StridedMut dK(g.data() + off + D, l, e, Eigen::OuterStride<>(3 * D));
            StridedMut dV(g.data() + off + 2 * D, l, e, Eigen::OuterStride<>(3 * D));
            CMatMap<T> P(probs.data() + (b * heads + h) * L * L, l, l);
            Strided dO(self.grad.data() + b * L * D + h * dh, l, e, Eigen::OuterStride<>(D));
            dV.noalias() += P.transpose() * dO;
            dP.noalias() = dO * V.transpose();
            for (Eigen::Index i = 0; i < l; ++i) {
              const T dot = P.row(i).dot(dP.row(i));
              dS.row(i) = P.row(i).array() * (dP.row(i).array() - dot);
            }
            dS *= sc;
            dQ.noalias() += dS * K;
            dK.noalias() += dS.transpose() * Q;
          }
      }, "self_attention");
}

/// Mean negative log-likelihood of integer targets under softmax(logits).
/// Samples whose target equals `ignore_index` contribute nothing; if every
/// sample is ignored the loss is 0 with zero gradient.
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::uint32_t> targets,
                        std::uint32_t ignore_index) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size())
    throw Error(ErrorKind::Dimension, "cross_entropy: logits " + shape_str(logits.shape()) +
                                          " vs " + std::to_string(targets.size()) + " targets");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  std::vector<T> probs(N * K);
  std::vector<std::uint32_t> tgt(targets.begin(), targets.end());
  T loss = 0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (tgt[i] == ignore_index) continue;
    if (tgt[i] >= K)
      throw Error(ErrorKind::Data, "cross_entropy: target " + std::to_string(tgt[i]) +
                                       " outside [0, " + std::to_string(K) + ")");
    const T* x = logits.data().data() + i * K;
    T* p = probs.data() + i * K;
    const T mx = *std::max_element(x, x + K);
    T s = 0;
    for (std::size_t k = 0; k < K; ++k) s += (p[k] = std::exp(x[k] - mx));
    for (std::size_t k = 0; k < K; ++k) p[k] /= s;
    loss += -(x[tgt[i]] - mx - std::log(s));
    ++counted;
  }
  const T inv = counted ? T(1) / static_cast<T>(counted) : T(0);
  auto pl = logits.node_ptr();
  return make_result<T>({}, {loss * inv}, {pl},
      [pl, probs = std::move(probs), tgt = std::move(tgt), N, K, inv, ignore_index](Node<T>& self) {
        auto& g = pl->ensure_grad();
        const T gs = self.grad[0] * inv;
        for (std::size_t i = 0; i < N; ++i) {
          if (tgt[i] == ignore_index) continue;
          for (std::size_t k = 0; k < K; ++k)
            g[i * K + k] += gs * (probs[i * K + k] - (k == tgt[i] ? T(1) : T(0)));
        }
      }, "cross_entropy");
}

/// Mean squared error over the entries where `mask` is set (all entries when
/// the mask is empty). Returns 0 with zero gradient if nothing is selected.
template <class T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target, std::vector<bool> mask = {}) {
  if (pred.size() != target.size() || (!mask.empty() && mask.size() != pred.size()))
    throw Error(ErrorKind::Dimension, "mse: operand sizes differ " + shape_str(pred.shape()) +
                                          " vs " + shape_str(target.shape()));
  const std::size_t n = pred.size();
  T s = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const T d = pred[i] - target[i];
    s += d * d;
    ++count;
  }
  const T inv = count ? T(1) / static_cast<T>(count) : T(0);
  auto pp = pred.node_ptr(), pt = target.node_ptr();
  return make_result<T>({}, {s * inv}, {pp, pt},
      [pp, pt, mask = std::move(mask), n, inv](Node<T>& self) {
        const T gs = T(2) * self.grad[0] * inv;
        for (std::size_t i = 0; i < n; ++i) {
          if (!mask.empty() && !mask[i]) continue;
          const T d = pp->value[i] - pt->value[i];
          if (pp->requires_grad) pp->ensure_grad()[i] += gs * d;
          if (pt->requires_grad) pt->ensure_grad()[i] -= gs * d;
        }
      }, "mse");
}

}  // namespace hsx::tensor
