#pragma once

// Convolutions, pooling and upsampling on channels-last tensors.
// Image tensors are [N x H x W x C]; sequences are [N x L x C].

#include <limits>

#include "hsx/tensor/ops.hpp"

namespace hsx::tensor {

/// Zero-padded ("same") stride-1 cross-correlation.
/// x: [N x H x W x Cin], k: [kh x kw x Cin x Cout], optional bias [Cout].
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>* bias = nullptr) {
  if (k.rank() != 4) throw Error(ErrorKind::Dimension, "conv2d: kernel must be rank 4");
  const std::size_t kh = k.dim(0), kw = k.dim(1), Cin = k.dim(2), Cout = k.dim(3);
  if (kh % 2 == 0 || kw % 2 == 0)
    throw Error(ErrorKind::Config, "conv2d: kernel extents must be odd, got " + shape_str(k.shape()));
  if (x.rank() != 4 || x.dim(3) != Cin)
    throw Error(ErrorKind::Dimension,
                "conv2d: input " + shape_str(x.shape()) + " vs kernel " + shape_str(k.shape()));
  if (bias && bias->size() != Cout) throw Error(ErrorKind::Dimension, "conv2d: bias size mismatch");
  const std::size_t N = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t ph = kh / 2, pw = kw / 2, patch = kh * kw * Cin, P = N * H * W;

  std::vector<T> col;
  const T* colp = x.data().data();
  if (kh > 1 || kw > 1) {
    col.assign(P * patch, T(0));
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          T* dst = col.data() + ((n * H + i) * W + j) * patch;
          for (std::size_t di = 0; di < kh; ++di) {
            const long ii = static_cast<long>(i + di) - static_cast<long>(ph);
            if (ii < 0 || ii >= static_cast<long>(H)) continue;
            for (std::size_t dj = 0; dj < kw; ++dj) {
              const long jj = static_cast<long>(j + dj) - static_cast<long>(pw);
              if (jj < 0 || jj >= static_cast<long>(W)) continue;
              std::copy_n(x.data().data() + ((n * H + ii) * W + jj) * Cin, Cin,
                          dst + (di * kw + dj) * Cin);
            }
          }
        }
    colp = col.data();
  }
  const auto rows = static_cast<Eigen::Index>(P), inner = static_cast<Eigen::Index>(patch),
             cols = static_cast<Eigen::Index>(Cout);
  std::vector<T> out(P * Cout);
  MatMap<T>(out.data(), rows, cols).noalias() = CMatMap<T>(colp, rows, inner) * CMatMap<T>(k.data().data(), inner, cols);
  if (bias)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t c = 0; c < Cout; ++c) out[p * Cout + c] += (*bias)[c];

  auto px = x.node_ptr(), pk = k.node_ptr();
  auto pb = bias ? bias->node_ptr() : nullptr;
  return make_result<T>({N, H, W, Cout}, std::move(out), {px, pk, pb},
      [px, pk, pb, col = std::move(col), N, H, W, Cin, Cout, kh, kw, ph, pw, patch, P](Node<T>& self) {
        const auto rows = static_cast<Eigen::Index>(P), inner = static_cast<Eigen::Index>(patch),
                   cols = static_cast<Eigen::Index>(Cout);
        CMatMap<T> dY(self.grad.data(), rows, cols);
        const T* colp = col.empty() ? px->value.data() : col.data();
        if (pk->requires_grad)
          MatMap<T>(pk->ensure_grad().data(), inner, cols).noalias() += CMatMap<T>(colp, rows, inner).transpose() * dY;
        if (pb && pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t p = 0; p < P; ++p)
            for (std::size_t c = 0; c < Cout; ++c) g[c] += self.grad[p * Cout + c];
        }
        if (px->requires_grad) {
          auto& g = px->ensure_grad();
          if (col.empty()) {
            MatMap<T>(g.data(), rows, inner).noalias() += dY * CMatMap<T>(pk->value.data(), inner, cols).transpose();
            return;
          }
          RowMat<T> dcol = dY * CMatMap<T>(pk->value.data(), inner, cols).transpose();
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t i = 0; i < H; ++i)
              for (std::size_t j = 0; j < W; ++j) {
                const T* src = dcol.data() + ((n * H + i) * W + j) * patch;
                for (std::size_t di = 0; di < kh; ++di) {
                  const long ii = static_cast<long>(i + di) - static_cast<long>(ph);
                  if (ii < 0 || ii >= static_cast<long>(H)) continue;
                  for (std::size_t dj = 0; dj < kw; ++dj) {
                    const long jj = static_cast<long>(j + dj) - static_cast<long>(pw);
                    if (jj < 0 || jj >= static_cast<long>(W)) continue;
                    T* dst = g.data() + ((n * H + ii) * W + jj) * Cin;
                    const T* s = src + (di * kw + dj) * Cin;
                    for (std::size_t c = 0; c < Cin; ++c) dst[c] += s[c];
                  }
                }
              }
        }
      }, "conv2d");
}

/// Stride-1 1D cross-correlation with `pad_left` zeros before the sequence and
/// enough zeros after it to keep the output length equal to the input length.
/// x: [N x L x Cin], k: [ks x Cin x Cout], optional bias [Cout].
template <class T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>* bias, std::size_t pad_left) {
  if (k.rank() != 3 || x.rank() != 3 || x.dim(2) != k.dim(1))
    throw Error(ErrorKind::Dimension,
                "conv1d: input " + shape_str(x.shape()) + " vs kernel " + shape_str(k.shape()));
  const std::size_t N = x.dim(0), L = x.dim(1), Cin = k.dim(1), ks = k.dim(0), Cout = k.dim(2);
  if (pad_left >= ks) throw Error(ErrorKind::Config, "conv1d: left padding must be smaller than the kernel");
  if (bias && bias->size() != Cout) throw Error(ErrorKind::Dimension, "conv1d: bias size mismatch");
  const std::size_t patch = ks * Cin, P = N * L;
  std::vector<T> col(P * patch, T(0));
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t d = 0; d < ks; ++d) {
        const long s = static_cast<long>(t + d) - static_cast<long>(pad_left);
        if (s < 0 || s >= static_cast<long>(L)) continue;
        std::copy_n(x.data().data() + (n * L + s) * Cin, Cin, col.data() + (n * L + t) * patch + d * Cin);
      }
  const auto rows = static_cast<Eigen::Index>(P), inner = static_cast<Eigen::Index>(patch),
             cols = static_cast<Eigen::Index>(Cout);
  std::vector<T> out(P * Cout);
  MatMap<T>(out.data(), rows, cols).noalias() = CMatMap<T>(col.data(), rows, inner) * CMatMap<T>(k.data().data(), inner, cols);
  if (bias)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t c = 0; c < Cout; ++c) out[p * Cout + c] += (*bias)[c];
  auto px = x.node_ptr(), pk = k.node_ptr();
  auto pb = bias ? bias->node_ptr() : nullptr;
  return make_result<T>({N, L, Cout}, std::move(out), {px, pk, pb},
      [px, pk, pb, col = std::move(col), N, L, Cin, Cout, ks, pad_left, patch, P](Node<T>& self) {
        const auto rows = static_cast<Eigen::Index>(P), inner = static_cast<Eigen::Index>(patch),
                   cols = static_cast<Eigen::Index>(Cout);
        CMatMap<T> dY(self.grad.data(), rows, cols);
        if (pk->requires_grad)
          MatMap<T>(pk->ensure_grad().data(), inner, cols).noalias() += CMatMap<T>(col.data(), rows, inner).transpose() * dY;
        if (pb && pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t p = 0; p < P; ++p)
            for (std::size_t c = 0; c < Cout; ++c) g[c] += self.grad[p * Cout + c];
        }
        if (px->requires_grad) {
          auto& g = px->ensure_grad();
          RowMat<T> dcol = dY * CMatMap<T>(pk->value.data(), inner, cols).transpose();
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t < L; ++t)
              for (std::size_t d = 0; d < ks; ++d) {
                const long s = static_cast<long>(t + d) - static_cast<long>(pad_left);
                if (s < 0 || s >= static_cast<long>(L)) continue;
                const T* src = dcol.data() + (n * L + t) * patch + d * Cin;
                T* dst = g.data() + (n * L + s) * Cin;
                for (std::size_t c = 0; c < Cin; ++c) dst[c] += src[c];
              }
        }
      }, "conv1d");
}

/// 2x2 max pooling with stride 2. H and W must be even.
template <class T>
Tensor<T> maxpool2d(const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(1) % 2 || x.dim(2) % 2)
    throw Error(ErrorKind::Shape, "maxpool2d: needs [N x H x W x C] with even H, W; got " + shape_str(x.shape()));
  const std::size_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t Ho = H / 2, Wo = W / 2;
  std::vector<T> out(N * Ho * Wo * C);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j)
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t best = ((n * H + 2 * i) * W + 2 * j) * C + c;
          for (std::size_t di = 0; di < 2; ++di)
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t idx = ((n * H + 2 * i + di) * W + 2 * j + dj) * C + c;
              if (x[idx] > x[best]) best = idx;
            }
          const std::size_t o = ((n * Ho + i) * Wo + j) * C + c;
          out[o] = x[best];
          arg[o] = best;
        }
  auto px = x.node_ptr();
  return make_result<T>({N, Ho, Wo, C}, std::move(out), {px},
      [px, arg = std::move(arg)](Node<T>& self) {
        auto& g = px->ensure_grad();
        for (std::size_t o = 0; o < arg.size(); ++o) g[arg[o]] += self.grad[o];
      }, "maxpool2d");
}

/// Width-2 max pooling with stride 2 over [N x L x C]; a trailing odd element is dropped.
template <class T>
Tensor<T> maxpool1d(const Tensor<T>& x) {
  if (x.rank() != 3 || x.dim(1) < 2)
    throw Error(ErrorKind::Shape, "maxpool1d: needs [N x L x C] with L >= 2; got " + shape_str(x.shape()));
  const std::size_t N = x.dim(0), L = x.dim(1), C = x.dim(2), Lo = L / 2;
  std::vector<T> out(N * Lo * C);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t t = 0; t < Lo; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t a = (n * L + 2 * t) * C + c, b = a + C;
        const std::size_t o = (n * Lo + t) * C + c;
        arg[o] = x[b] > x[a] ? b : a;
        out[o] = x[arg[o]];
      }
  auto px = x.node_ptr();
  return make_result<T>({N, Lo, C}, std::move(out), {px},
      [px, arg = std::move(arg)](Node<T>& self) {
        auto& g = px->ensure_grad();
        for (std::size_t o = 0; o < arg.size(); ++o) g[arg[o]] += self.grad[o];
      }, "maxpool1d");
}

/// Nearest-neighbour 2x upsampling of [N x H x W x C].
template <class T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  if (x.rank() != 4) throw Error(ErrorKind::Shape, "upsample2x: needs [N x H x W x C]");
  const std::size_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t Ho = 2 * H, Wo = 2 * W;
  std::vector<T> out(N * Ho * Wo * C);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j)
        std::copy_n(x.data().data() + ((n * H + i / 2) * W + j / 2) * C, C,
                    out.data() + ((n * Ho + i) * Wo + j) * C);
  auto px = x.node_ptr();
  return make_result<T>({N, Ho, Wo, C}, std::move(out), {px},
      [px, N, H, W, C, Ho, Wo](Node<T>& self) {
        auto& g = px->ensure_grad();
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t i = 0; i < Ho; ++i)
            for (std::size_t j = 0; j < Wo; ++j) {
              T* dst = g.data() + ((n * H + i / 2) * W + j / 2) * C;
              const T* src = self.grad.data() + ((n * Ho + i) * Wo + j) * C;
              for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
            }
      }, "upsample2x");
}

/// Single-channel dilated cross-correlation used by the random-kernel feature
/// transforms (not differentiated). The input is zero-extended on both sides so
/// the output has the input's length; each output is `sum - bias`.
inline std::vector<double> conv1d_dilated(std::span<const double> x, std::span<const double> weights,
                                          std::size_t dilation, double bias = 0.0) {
  if (dilation < 1) throw Error(ErrorKind::Config, "conv1d_dilated: dilation must be >= 1");
  if (weights.empty()) throw Error(ErrorKind::Config, "conv1d_dilated: empty kernel");
  const long L = static_cast<long>(x.size());
  const long half = static_cast<long>((weights.size() - 1) / 2 * dilation);
  std::vector<double> out(x.size());
  for (long t = 0; t < L; ++t) {
    double s = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const long idx = t - half + static_cast<long>(k * dilation);
      if (idx >= 0 && idx < L) s += weights[k] * x[static_cast<std::size_t>(idx)];
    }
    out[static_cast<std::size_t>(t)] = s - bias;
  }
  return out;
}

}  // namespace hsx::tensor
