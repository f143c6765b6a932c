#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "df/tensor/gemm.hpp"
#include "df/tensor/tensor.hpp"

namespace df::tensor {

template <class T>
using NodeT = typename Tensor<T>::Node;

namespace detail {

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
}

template <class T>
void accumulate(NodeT<T>& p, const std::vector<T>& g) {
  p.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  auto out = Tensor<T>::make_op(a.shape(), {a, b}, [](NodeT<T>& self) {
    for (int s = 0; s < 2; ++s) {
      auto& p = *self.parents[s];
      if (p.requires_grad) detail::accumulate(p, self.grad);
    }
  });
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  auto out = Tensor<T>::make_op(a.shape(), {a, b}, [](NodeT<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) detail::accumulate(pa, self.grad);
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  auto out = Tensor<T>::make_op(a.shape(), {a, b}, [](NodeT<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.val[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.val[i];
    }
  });
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  auto out = Tensor<T>::make_op(a.shape(), {a}, [c](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += c * self.grad[i];
  });
  const auto& av = a.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = c * av[i];
  return out;
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  auto out = Tensor<T>::make_op(a.shape(), {a}, [](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (p.requires_grad) detail::accumulate(p, self.grad);
  });
  const auto& av = a.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + c;
  return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.size())
    throw ValidationError("reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
                          shape_str(shape));
  auto out = Tensor<T>::make_op(std::move(shape), {a}, [](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (p.requires_grad) detail::accumulate(p, self.grad);
  });
  out.data() = a.data();
  return out;
}

// [B,M,N] -> [B,N,M]
template <class T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
  if (a.ndim() < 2) throw ValidationError("transpose_last2 needs >=2 dims");
  Shape s = a.shape();
  const int M = s[s.size() - 2], N = s.back();
  std::swap(s[s.size() - 2], s.back());
  const std::size_t batch = a.size() / (static_cast<std::size_t>(M) * N);
  auto out = Tensor<T>::make_op(s, {a}, [M, N, batch](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t b = 0; b < batch; ++b) {
      const T* g = self.grad.data() + b * static_cast<std::size_t>(M) * N;
      T* pg = p.grad.data() + b * static_cast<std::size_t>(M) * N;
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) pg[static_cast<std::size_t>(i) * N + j] += g[static_cast<std::size_t>(j) * M + i];
    }
  });
  const T* av = a.data().data();
  T* ov = out.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const T* src = av + b * static_cast<std::size_t>(M) * N;
    T* dst = ov + b * static_cast<std::size_t>(M) * N;
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) dst[static_cast<std::size_t>(j) * M + i] = src[static_cast<std::size_t>(i) * N + j];
  }
  return out;
}

// [M,K] x [K,N] -> [M,N]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ValidationError("matmul: incompatible " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
  const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
  auto out = Tensor<T>::make_op({M, N}, {a, b}, [M, K, N](NodeT<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      gemm_nt(M, K, N, self.grad.data(), pb.val.data(), pa.grad.data());
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      gemm_tn(K, N, M, pa.val.data(), self.grad.data(), pb.grad.data());
    }
  });
  gemm_nn(M, N, K, a.data().data(), b.data().data(), out.data().data());
  return out;
}

// [B,M,K] x [B,K,N] -> [B,M,N]
template <class T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
    throw ValidationError("bmm: incompatible " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
  const int B = a.dim(0), M = a.dim(1), K = a.dim(2), N = b.dim(2);
  auto out = Tensor<T>::make_op({B, M, N}, {a, b}, [B, M, K, N](NodeT<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (int i = 0; i < B; ++i) {
      const T* g = self.grad.data() + static_cast<std::size_t>(i) * M * N;
      if (pa.requires_grad)
        gemm_nt(M, K, N, g, pb.val.data() + static_cast<std::size_t>(i) * K * N,
                pa.grad.data() + static_cast<std::size_t>(i) * M * K);
      if (pb.requires_grad)
        gemm_tn(K, N, M, pa.val.data() + static_cast<std::size_t>(i) * M * K, g,
                pb.grad.data() + static_cast<std::size_t>(i) * K * N);
    }
  });
  for (int i = 0; i < B; ++i)
    gemm_nn(M, N, K, a.data().data() + static_cast<std::size_t>(i) * M * K,
            b.data().data() + static_cast<std::size_t>(i) * K * N,
            out.data().data() + static_cast<std::size_t>(i) * M * N);
  return out;
}

// Concatenate two NCHW maps along channels.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 4 || b.ndim() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
      a.dim(3) != b.dim(3))
    throw ValidationError("concat_channels: incompatible " + shape_str(a.shape()) + " + " +
                          shape_str(b.shape()));
  const int B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), HW = a.dim(2) * a.dim(3);
  auto out = Tensor<T>::make_op({B, Ca + Cb, a.dim(2), a.dim(3)}, {a, b},
                                [B, Ca, Cb, HW](NodeT<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (int i = 0; i < B; ++i) {
      const T* g = self.grad.data() + static_cast<std::size_t>(i) * (Ca + Cb) * HW;
      if (pa.requires_grad) {
        T* pg = pa.grad.data() + static_cast<std::size_t>(i) * Ca * HW;
        for (std::size_t j = 0; j < static_cast<std::size_t>(Ca) * HW; ++j) pg[j] += g[j];
      }
      if (pb.requires_grad) {
        T* pg = pb.grad.data() + static_cast<std::size_t>(i) * Cb * HW;
        const T* gb = g + static_cast<std::size_t>(Ca) * HW;
        for (std::size_t j = 0; j < static_cast<std::size_t>(Cb) * HW; ++j) pg[j] += gb[j];
      }
    }
  });
  for (int i = 0; i < B; ++i) {
    T* dst = out.data().data() + static_cast<std::size_t>(i) * (Ca + Cb) * HW;
    std::copy_n(a.data().data() + static_cast<std::size_t>(i) * Ca * HW,
                static_cast<std::size_t>(Ca) * HW, dst);
    std::copy_n(b.data().data() + static_cast<std::size_t>(i) * Cb * HW,
                static_cast<std::size_t>(Cb) * HW, dst + static_cast<std::size_t>(Ca) * HW);
  }
  return out;
}

namespace detail {

template <class T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
            int Wo, T* col) {
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        T* dst = col + (static_cast<std::size_t>(c) * kh * kw + static_cast<std::size_t>(i) * kw + j) *
                           (static_cast<std::size_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          const int y = oy * stride + i - pad;
          T* row = dst + static_cast<std::size_t>(oy) * Wo;
          if (y < 0 || y >= H) {
            std::fill_n(row, Wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * H + y) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int xx = ox * stride + j - pad;
            row[ox] = (xx >= 0 && xx < W) ? src[xx] : T(0);
          }
        }
      }
}

template <class T>
void col2im_add(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
                int Wo, T* dx) {
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        const T* src = col + (static_cast<std::size_t>(c) * kh * kw + static_cast<std::size_t>(i) * kw + j) *
                                 (static_cast<std::size_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          const int y = oy * stride + i - pad;
          if (y < 0 || y >= H) continue;
          T* dst = dx + (static_cast<std::size_t>(c) * H + y) * W;
          const T* row = src + static_cast<std::size_t>(oy) * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int xx = ox * stride + j - pad;
            if (xx >= 0 && xx < W) dst[xx] += row[ox];
          }
        }
      }
}

}  // namespace detail

// x[B,C,H,W] * w[F,C,kh,kw] + b[F], zero padding. im2col + matrix product per
// batch item; the backward pass rebuilds the column buffer instead of keeping
// it alive, trading a second im2col for memory.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1,
                 int pad = 0) {
  if (x.ndim() != 4 || w.ndim() != 4 || b.ndim() != 1)
    throw ValidationError("conv2d: expected x[B,C,H,W] w[F,C,kh,kw] b[F]");
  if (x.dim(1) != w.dim(1) || w.dim(0) != b.dim(0))
    throw ValidationError("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " +
                          shape_str(w.shape()));
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (Ho <= 0 || Wo <= 0) throw ValidationError("conv2d: kernel larger than padded input");
  const int CKK = C * kh * kw;
  const std::size_t HoWo = static_cast<std::size_t>(Ho) * Wo;
  const std::size_t xstr = static_cast<std::size_t>(C) * H * W;
  const std::size_t ostr = static_cast<std::size_t>(F) * HoWo;

  auto out = Tensor<T>::make_op(
      {B, F, Ho, Wo}, {x, w, b},
      [B, C, H, W, F, kh, kw, stride, pad, Ho, Wo, CKK, HoWo, xstr, ostr](NodeT<T>& self) {
        auto& xp = *self.parents[0];
        auto& wp = *self.parents[1];
        auto& bp = *self.parents[2];
        std::vector<T> col(static_cast<std::size_t>(CKK) * HoWo);
        if (xp.requires_grad) xp.ensure_grad();
        if (wp.requires_grad) wp.ensure_grad();
        for (int i = 0; i < B; ++i) {
          const T* g = self.grad.data() + static_cast<std::size_t>(i) * ostr;
          if (wp.requires_grad) {
            detail::im2col(xp.val.data() + static_cast<std::size_t>(i) * xstr, C, H, W, kh, kw,
                           stride, pad, Ho, Wo, col.data());
            gemm_nt(F, CKK, static_cast<int>(HoWo), g, col.data(), wp.grad.data());
          }
          if (xp.requires_grad) {
            std::fill(col.begin(), col.end(), T(0));
            gemm_tn(CKK, static_cast<int>(HoWo), F, wp.val.data(), g, col.data());
            detail::col2im_add(col.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                               xp.grad.data() + static_cast<std::size_t>(i) * xstr);
          }
        }
        if (bp.requires_grad) {
          bp.ensure_grad();
          for (int i = 0; i < B; ++i) {
            const T* g = self.grad.data() + static_cast<std::size_t>(i) * ostr;
            for (int f = 0; f < F; ++f) {
              T s = T(0);
              const T* gf = g + static_cast<std::size_t>(f) * HoWo;
              for (std::size_t p = 0; p < HoWo; ++p) s += gf[p];
              bp.grad[f] += s;
            }
          }
        }
      });

  std::vector<T> col(static_cast<std::size_t>(CKK) * HoWo);
  for (int i = 0; i < B; ++i) {
    detail::im2col(x.data().data() + static_cast<std::size_t>(i) * xstr, C, H, W, kh, kw, stride,
                   pad, Ho, Wo, col.data());
    T* ob = out.data().data() + static_cast<std::size_t>(i) * ostr;
    gemm_nn(F, static_cast<int>(HoWo), CKK, w.data().data(), col.data(), ob);
    for (int f = 0; f < F; ++f) {
      const T bias = b.data()[f];
      T* of = ob + static_cast<std::size_t>(f) * HoWo;
      for (std::size_t p = 0; p < HoWo; ++p) of[p] += bias;
    }
  }
  return out;
}

// Normalizes x[B,C,H,W] over channel groups; gamma/beta are per channel.
template <class T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     int groups, T eps = T(1e-5)) {
  if (x.ndim() != 4) throw ValidationError("group_norm: expected x[B,C,H,W]");
  const int B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (C % groups != 0) throw ValidationError("group_norm: channels not divisible by groups");
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C})
    throw ValidationError("group_norm: gamma/beta must be [C]");
  const int CG = C / groups;
  const std::size_t m = static_cast<std::size_t>(CG) * HW;

  auto out = Tensor<T>::make_op(x.shape(), {x, gamma, beta},
                                [B, C, HW, groups, CG, m, eps](NodeT<T>& self) {
    auto& xp = *self.parents[0];
    auto& gp = *self.parents[1];
    auto& bp = *self.parents[2];
    if (xp.requires_grad) xp.ensure_grad();
    if (gp.requires_grad) gp.ensure_grad();
    if (bp.requires_grad) bp.ensure_grad();
    std::vector<T> xhat(m);
    for (int bi = 0; bi < B; ++bi)
      for (int g = 0; g < groups; ++g) {
        const std::size_t base = (static_cast<std::size_t>(bi) * C + static_cast<std::size_t>(g) * CG) * HW;
        const T* xv = xp.val.data() + base;
        const T* dy = self.grad.data() + base;
        T mean = T(0);
        for (std::size_t i = 0; i < m; ++i) mean += xv[i];
        mean /= static_cast<T>(m);
        T var = T(0);
        for (std::size_t i = 0; i < m; ++i) var += (xv[i] - mean) * (xv[i] - mean);
        var /= static_cast<T>(m);
        const T inv = T(1) / std::sqrt(var + eps);
        for (std::size_t i = 0; i < m; ++i) xhat[i] = (xv[i] - mean) * inv;
        // dx = inv * (dy*gamma - mean(dy*gamma) - xhat * mean(dy*gamma*xhat))
        T s1 = T(0), s2 = T(0);
        for (int c = 0; c < CG; ++c) {
          const T gc = gp.val[static_cast<std::size_t>(g) * CG + c];
          for (int p = 0; p < HW; ++p) {
            const std::size_t i = static_cast<std::size_t>(c) * HW + p;
            s1 += dy[i] * gc;
            s2 += dy[i] * gc * xhat[i];
          }
        }
        s1 /= static_cast<T>(m);
        s2 /= static_cast<T>(m);
        for (int c = 0; c < CG; ++c) {
          const int ch = g * CG + c;
          const T gc = gp.val[ch];
          T dgamma = T(0), dbeta = T(0);
          for (int p = 0; p < HW; ++p) {
            const std::size_t i = static_cast<std::size_t>(c) * HW + p;
            if (xp.requires_grad)
              xp.grad[base + i] += inv * (dy[i] * gc - s1 - xhat[i] * s2);
            dgamma += dy[i] * xhat[i];
            dbeta += dy[i];
          }
          if (gp.requires_grad) gp.grad[ch] += dgamma;
          if (bp.requires_grad) bp.grad[ch] += dbeta;
        }
      }
  });

  const T* xv = x.data().data();
  T* ov = out.data().data();
  for (int bi = 0; bi < B; ++bi)
    for (int g = 0; g < groups; ++g) {
      const std::size_t base = (static_cast<std::size_t>(bi) * C + static_cast<std::size_t>(g) * CG) * HW;
      T mean = T(0);
      for (std::size_t i = 0; i < m; ++i) mean += xv[base + i];
      mean /= static_cast<T>(m);
      T var = T(0);
      for (std::size_t i = 0; i < m; ++i) var += (xv[base + i] - mean) * (xv[base + i] - mean);
      var /= static_cast<T>(m);
      const T inv = T(1) / std::sqrt(var + eps);
      for (int c = 0; c < CG; ++c) {
        const int ch = g * CG + c;
        const T gc = gamma.data()[ch], bc = beta.data()[ch];
        for (int p = 0; p < HW; ++p) {
          const std::size_t i = base + static_cast<std::size_t>(c) * HW + p;
          ov[i] = gc * (xv[i] - mean) * inv + bc;
        }
      }
    }
  return out;
}

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
  auto out = Tensor<T>::make_op(x.shape(), {x}, [](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T s = T(1) / (T(1) + std::exp(-p.val[i]));
      p.grad[i] += self.grad[i] * s * (T(1) + p.val[i] * (T(1) - s));
    }
  });
  const auto& xv = x.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] / (T(1) + std::exp(-xv[i]));
  return out;
}

template <class T>
Tensor<T> tanh_op(const Tensor<T>& x) {
  auto out = Tensor<T>::make_op(x.shape(), {x}, [](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] * (T(1) - self.val[i] * self.val[i]);
  });
  const auto& xv = x.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(xv[i]);
  return out;
}

// Row-wise softmax over the last dimension, max-shifted for stability.
template <class T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  const int N = x.shape().back();
  const std::size_t rows = x.size() / N;
  auto out = Tensor<T>::make_op(x.shape(), {x}, [N, rows](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.val.data() + r * N;
      const T* dy = self.grad.data() + r * N;
      T dot = T(0);
      for (int j = 0; j < N; ++j) dot += dy[j] * y[j];
      T* pg = p.grad.data() + r * N;
      for (int j = 0; j < N; ++j) pg[j] += y[j] * (dy[j] - dot);
    }
  });
  const T* xv = x.data().data();
  T* ov = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = xv + r * N;
    T* dst = ov + r * N;
    T mx = src[0];
    for (int j = 1; j < N; ++j) mx = std::max(mx, src[j]);
    T sum = T(0);
    for (int j = 0; j < N; ++j) {
      dst[j] = std::exp(src[j] - mx);
      sum += dst[j];
    }
    for (int j = 0; j < N; ++j) dst[j] /= sum;
  }
  return out;
}

// x[B,In] * w[In,Out] + b[Out]
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1 || x.dim(1) != w.dim(0) ||
      w.dim(1) != b.dim(0))
    throw ValidationError("linear: incompatible " + shape_str(x.shape()) + " x " +
                          shape_str(w.shape()));
  const int B = x.dim(0), In = x.dim(1), Out = w.dim(1);
  auto t = Tensor<T>::make_op({B, Out}, {x, w, b}, [B, In, Out](NodeT<T>& self) {
    auto& xp = *self.parents[0];
    auto& wp = *self.parents[1];
    auto& bp = *self.parents[2];
    if (xp.requires_grad) {
      xp.ensure_grad();
      gemm_nt(B, In, Out, self.grad.data(), wp.val.data(), xp.grad.data());
    }
    if (wp.requires_grad) {
      wp.ensure_grad();
      gemm_tn(In, Out, B, xp.val.data(), self.grad.data(), wp.grad.data());
    }
    if (bp.requires_grad) {
      bp.ensure_grad();
      for (int i = 0; i < B; ++i)
        for (int j = 0; j < Out; ++j) bp.grad[j] += self.grad[static_cast<std::size_t>(i) * Out + j];
    }
  });
  gemm_nn(B, Out, In, x.data().data(), w.data().data(), t.data().data());
  auto& ov = t.data();
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < Out; ++j) ov[static_cast<std::size_t>(i) * Out + j] += b.data()[j];
  return t;
}

// x[B,C,H,W] + bias[B,C] broadcast over the spatial grid. Carries per-sample
// conditioning (e.g. a projected timestep embedding) into a feature map.
template <class T>
Tensor<T> add_sample_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.ndim() != 4 || bias.ndim() != 2 || x.dim(0) != bias.dim(0) || x.dim(1) != bias.dim(1))
    throw ValidationError("add_sample_channel_bias: incompatible " + shape_str(x.shape()) +
                          " + " + shape_str(bias.shape()));
  const int B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  auto out = Tensor<T>::make_op(x.shape(), {x, bias}, [B, C, HW](NodeT<T>& self) {
    auto& xp = *self.parents[0];
    auto& bp = *self.parents[1];
    if (xp.requires_grad) detail::accumulate(xp, self.grad);
    if (bp.requires_grad) {
      bp.ensure_grad();
      for (int i = 0; i < B; ++i)
        for (int c = 0; c < C; ++c) {
          const T* g = self.grad.data() + (static_cast<std::size_t>(i) * C + c) * HW;
          T s = T(0);
          for (int p = 0; p < HW; ++p) s += g[p];
          bp.grad[static_cast<std::size_t>(i) * C + c] += s;
        }
    }
  });
  const T* xv = x.data().data();
  T* ov = out.data().data();
  for (int i = 0; i < B; ++i)
    for (int c = 0; c < C; ++c) {
      const T bv = bias.data()[static_cast<std::size_t>(i) * C + c];
      const std::size_t base = (static_cast<std::size_t>(i) * C + c) * HW;
      for (int p = 0; p < HW; ++p) ov[base + p] = xv[base + p] + bv;
    }
  return out;
}

// [B,C,H,W] -> [B,C,2H,2W], each cell copied to a 2x2 block.
template <class T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  if (x.ndim() != 4) throw ValidationError("upsample_nearest2x: expected x[B,C,H,W]");
  const int BC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  auto out = Tensor<T>::make_op({x.dim(0), x.dim(1), 2 * H, 2 * W}, {x},
                                [BC, H, W](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int bc = 0; bc < BC; ++bc)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          const std::size_t o = ((static_cast<std::size_t>(bc) * 2 * H + 2 * y) * 2 * W) + 2 * xx;
          p.grad[(static_cast<std::size_t>(bc) * H + y) * W + xx] +=
              self.grad[o] + self.grad[o + 1] + self.grad[o + 2 * W] + self.grad[o + 2 * W + 1];
        }
  });
  const T* xv = x.data().data();
  T* ov = out.data().data();
  for (int bc = 0; bc < BC; ++bc)
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        const T v = xv[(static_cast<std::size_t>(bc) * H + y) * W + xx];
        const std::size_t o = ((static_cast<std::size_t>(bc) * 2 * H + 2 * y) * 2 * W) + 2 * xx;
        ov[o] = v;
        ov[o + 1] = v;
        ov[o + 2 * W] = v;
        ov[o + 2 * W + 1] = v;
      }
  return out;
}

// [B,C,H,W] -> [B,C]
template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.ndim() != 4) throw ValidationError("global_avg_pool: expected x[B,C,H,W]");
  const int BC = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
  auto out = Tensor<T>::make_op({x.dim(0), x.dim(1)}, {x}, [BC, HW](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int bc = 0; bc < BC; ++bc) {
      const T g = self.grad[bc] / static_cast<T>(HW);
      T* pg = p.grad.data() + static_cast<std::size_t>(bc) * HW;
      for (int i = 0; i < HW; ++i) pg[i] += g;
    }
  });
  const T* xv = x.data().data();
  for (int bc = 0; bc < BC; ++bc) {
    T s = T(0);
    const T* src = xv + static_cast<std::size_t>(bc) * HW;
    for (int i = 0; i < HW; ++i) s += src[i];
    out.data()[bc] = s / static_cast<T>(HW);
  }
  return out;
}

// [B,C,H,W] -> [B,C]; ties resolve to the first maximum in scan order.
template <class T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
  if (x.ndim() != 4) throw ValidationError("global_max_pool: expected x[B,C,H,W]");
  const int BC = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
  auto out = Tensor<T>::make_op({x.dim(0), x.dim(1)}, {x}, [BC, HW](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int bc = 0; bc < BC; ++bc) {
      const T* src = p.val.data() + static_cast<std::size_t>(bc) * HW;
      int arg = 0;
      for (int i = 1; i < HW; ++i)
        if (src[i] > src[arg]) arg = i;
      p.grad[static_cast<std::size_t>(bc) * HW + arg] += self.grad[bc];
    }
  });
  const T* xv = x.data().data();
  for (int bc = 0; bc < BC; ++bc) {
    const T* src = xv + static_cast<std::size_t>(bc) * HW;
    T mx = src[0];
    for (int i = 1; i < HW; ++i) mx = std::max(mx, src[i]);
    out.data()[bc] = mx;
  }
  return out;
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
  const std::size_t n = x.size();
  auto out = Tensor<T>::make_op({1}, {x}, [n](NodeT<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const T g = self.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) p.grad[i] += g;
  });
  T s = T(0);
  for (T v : x.data()) s += v;
  out.data()[0] = s / static_cast<T>(n);
  return out;
}

template <class T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::check_same_shape(pred, target, "mse_loss");
  const std::size_t n = pred.size();
  auto out = Tensor<T>::make_op({1}, {pred, target}, [n](NodeT<T>& self) {
    auto& pp = *self.parents[0];
    auto& tp = *self.parents[1];
    const T g = self.grad[0] * T(2) / static_cast<T>(n);
    if (pp.requires_grad) {
      pp.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) pp.grad[i] += g * (pp.val[i] - tp.val[i]);
    }
    if (tp.requires_grad) {
      tp.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) tp.grad[i] -= g * (pp.val[i] - tp.val[i]);
    }
  });
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred.data()[i] - target.data()[i];
    s += d * d;
  }
  out.data()[0] = s / static_cast<T>(n);
  return out;
}

// Sin/cos positional features for integer timesteps: half the dims are
// sin(k * f_i), half cos(k * f_i), with f_i log-spaced from 1 to 1/10000.
template <class T>
Tensor<T> sinusoidal_embedding(const std::vector<int>& steps, int dim) {
  if (dim < 2 || dim % 2 != 0) throw ValidationError("sinusoidal_embedding: dim must be even");
  const int half = dim / 2;
  const int B = static_cast<int>(steps.size());
  auto out = Tensor<T>::zeros({B, dim});
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < half; ++j) {
      const double f = std::exp(-std::log(10000.0) * j / (half - 1));
      out.data()[static_cast<std::size_t>(i) * dim + j] = static_cast<T>(std::sin(steps[i] * f));
      out.data()[static_cast<std::size_t>(i) * dim + half + j] =
          static_cast<T>(std::cos(steps[i] * f));
    }
  return out;
}

}  // namespace df::tensor
