#pragma once

// Forward ops and their adjoints for the fixed operation set the network
// needs: conv (incl. depthwise/strided), pixel shuffle, pooling, attention,
// norm, elementwise, matmul, concat, slice. Anything else is composed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hfur/tensor.hpp"

namespace hfur {

enum class PadMode { kZero, kReflect };

struct PadSpec {
  std::int64_t amount = 0;
  PadMode mode = PadMode::kZero;
};

inline constexpr std::int64_t kDefaultTokenLimit = 4096;

namespace detail {

inline void check_rank(const Tensor& t, int rank, const char* op, const char* name) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + name + " must be rank " + std::to_string(rank) +
                     ", got shape " + shape_str(t.shape()));
  }
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Symmetric reflection with edge duplication: -1 -> 0, n -> n-1.
inline std::int64_t reflect_idx(std::int64_t i, std::int64_t n) {
  if (i < 0) i = -i - 1;
  if (i >= n) i = 2 * n - 1 - i;
  return i;
}

// ----- accumulating matmul kernels (row-major) -----

// C += A(MxK) * B(KxN)
inline void mm_nn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
                  std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C += A(MxK) * B(NxK)^T
inline void mm_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
                  std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C += A(KxM)^T * B(KxN)
inline void mm_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
                  std::int64_t n) {
  for (std::int64_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const double av = ap[i];
      double* ci = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.numel());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record([ai, bi, oi] {
      const auto& g = detail::grad_of(oi);
      if (ai->requires_grad) {
        auto& ga = detail::grad_of(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bi->requires_grad) {
        auto& gb = detail::grad_of(bi);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.numel());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record([ai, bi, oi] {
      const auto& g = detail::grad_of(oi);
      if (ai->requires_grad) {
        auto& ga = detail::grad_of(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bi->requires_grad) {
        auto& gb = detail::grad_of(bi);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.numel());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record([ai, bi, oi] {
      const auto& g = detail::grad_of(oi);
      if (ai->requires_grad) {
        auto& ga = detail::grad_of(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bi->data[i];
      }
      if (bi->requires_grad) {
        auto& gb = detail::grad_of(bi);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ai->data[i];
      }
    });
  }
  return out;
}

inline Tensor add_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.numel());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + s;
  if (detail::track({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    detail::record([ai, oi] {
      const auto& g = detail::grad_of(oi);
      auto& ga = detail::grad_of(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

inline Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.numel());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;
  if (detail::track({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    detail::record([ai, oi, s] {
      const auto& g = detail::grad_of(oi);
      auto& ga = detail::grad_of(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

inline Tensor tanh(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.numel());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(a.data()[i]);
  if (detail::track({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    detail::record([ai, oi] {
      const auto& g = detail::grad_of(oi);
      auto& ga = detail::grad_of(ai);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = oi->data[i];
        ga[i] += g[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

inline Tensor sqrt(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.numel());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::sqrt(a.data()[i]);
  if (detail::track({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    detail::record([ai, oi] {
      const auto& g = detail::grad_of(oi);
      auto& ga = detail::grad_of(ai);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = oi->data[i];
        if (y > 0.0) ga[i] += g[i] * 0.5 / y;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (detail::track({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    detail::record([ai, oi] {
      const double g = detail::grad_of(oi)[0];
      auto& ga = detail::grad_of(ai);
      for (auto& v : ga) v += g;
    });
  }
  return out;
}

inline Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor out = Tensor::scalar(acc * inv);
  if (detail::track({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    detail::record([ai, oi, inv] {
      const double g = detail::grad_of(oi)[0] * inv;
      auto& ga = detail::grad_of(ai);
      for (auto& v : ga) v += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (detail::numel_of(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + detail::shape_str(a.shape()) + " as " +
                     detail::shape_str(shape));
  }
  Tensor out = Tensor::from_data(std::move(shape), a.data());
  if (detail::track({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    detail::record([ai, oi] {
      const auto& g = detail::grad_of(oi);
      auto& ga = detail::grad_of(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const int rank = parts[0].rank();
  if (axis < 0 || axis >= rank) throw ShapeError("concat: axis " + std::to_string(axis) + " out of range");
  Shape out_shape = parts[0].shape();
  std::int64_t axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != axis && p.dim(d) != out_shape[static_cast<std::size_t>(d)]) {
        throw ShapeError("concat: axis " + std::to_string(d) + " mismatch " +
                         detail::shape_str(p.shape()) + " vs " + detail::shape_str(out_shape));
      }
    }
    axis_total += p.dim(axis);
  }
  out_shape[static_cast<std::size_t>(axis)] = axis_total;
  Tensor out = Tensor::zeros(out_shape);

  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[static_cast<std::size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= out_shape[static_cast<std::size_t>(d)];

  std::int64_t offset = 0;
  std::vector<std::int64_t> offsets(parts.size());
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    offsets[pi] = offset;
    const auto& p = parts[pi];
    const std::int64_t pa = p.dim(axis);
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = p.data().data() + o * pa * inner;
      double* dst = out.data().data() + (o * axis_total + offset) * inner;
      std::copy(src, src + pa * inner, dst);
    }
    offset += pa;
  }

  bool any = false;
  for (const auto& p : parts)
    if (p.requires_grad()) any = true;
  if (grad_enabled() && any) {
    out.set_requires_grad(true);
    std::vector<detail::ImplPtr> impls;
    std::vector<std::int64_t> axes;
    for (const auto& p : parts) {
      impls.push_back(p.impl());
      axes.push_back(p.dim(axis));
    }
    auto oi = out.impl();
    detail::record([impls, axes, offsets, oi, outer, inner, axis_total] {
      const auto& g = detail::grad_of(oi);
      for (std::size_t pi = 0; pi < impls.size(); ++pi) {
        if (!impls[pi]->requires_grad) continue;
        auto& gp = detail::grad_of(impls[pi]);
        const std::int64_t pa = axes[pi];
        for (std::int64_t o = 0; o < outer; ++o) {
          const double* src = g.data() + (o * axis_total + offsets[pi]) * inner;
          double* dst = gp.data() + o * pa * inner;
          for (std::int64_t i = 0; i < pa * inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

inline Tensor slice_channels(const Tensor& x, std::int64_t c0, std::int64_t c1) {
  detail::check_rank(x, 4, "slice_channels", "input");
  const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (c0 < 0 || c1 > C || c0 >= c1) {
    throw ShapeError("slice_channels: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                     ") invalid for " + std::to_string(C) + " channels");
  }
  const std::int64_t Cs = c1 - c0;
  Tensor out = Tensor::zeros({B, Cs, x.dim(2), x.dim(3)});
  for (std::int64_t b = 0; b < B; ++b) {
    const double* src = x.data().data() + (b * C + c0) * HW;
    double* dst = out.data().data() + b * Cs * HW;
    std::copy(src, src + Cs * HW, dst);
  }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    detail::record([xi, oi, B, C, Cs, c0, HW] {
      const auto& g = detail::grad_of(oi);
      auto& gx = detail::grad_of(xi);
      for (std::int64_t b = 0; b < B; ++b) {
        const double* src = g.data() + b * Cs * HW;
        double* dst = gx.data() + (b * C + c0) * HW;
        for (std::int64_t i = 0; i < Cs * HW; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

inline Tensor transpose_last2(const Tensor& x) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("transpose_last2: rank 2 or 3 expected, got " + detail::shape_str(x.shape()));
  }
  const std::int64_t B = x.rank() == 3 ? x.dim(0) : 1;
  const std::int64_t M = x.dim(x.rank() - 2), N = x.dim(x.rank() - 1);
  Shape os = x.shape();
  std::swap(os[os.size() - 2], os[os.size() - 1]);
  Tensor out = Tensor::zeros(os);
  for (std::int64_t b = 0; b < B; ++b) {
    const double* src = x.data().data() + b * M * N;
    double* dst = out.data().data() + b * M * N;
    for (std::int64_t i = 0; i < M; ++i)
      for (std::int64_t j = 0; j < N; ++j) dst[j * M + i] = src[i * N + j];
  }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    detail::record([xi, oi, B, M, N] {
      const auto& g = detail::grad_of(oi);
      auto& gx = detail::grad_of(xi);
      for (std::int64_t b = 0; b < B; ++b) {
        const double* src = g.data() + b * M * N;
        double* dst = gx.data() + b * M * N;
        for (std::int64_t i = 0; i < M; ++i)
          for (std::int64_t j = 0; j < N; ++j) dst[i * N + j] += src[j * M + i];
      }
    });
  }
  return out;
}

inline Tensor depth_to_space(const Tensor& x, std::int64_t r) {
  detail::check_rank(x, 4, "depth_to_space", "input");
  if (r < 1) throw ConfigError("depth_to_space: r must be >= 1");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (C % (r * r) != 0) {
    throw ConfigError("depth_to_space: " + std::to_string(C) + " channels not divisible by r^2=" +
                      std::to_string(r * r));
  }
  const std::int64_t Co = C / (r * r), Ho = H * r, Wo = W * r;
  Tensor out = Tensor::zeros({B, Co, Ho, Wo});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < Co; ++c)
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < r; ++j) {
          const double* src = x.data().data() + ((b * C + c * r * r + i * r + j) * H) * W;
          for (std::int64_t h = 0; h < H; ++h) {
            double* dst = out.data().data() + ((b * Co + c) * Ho + h * r + i) * Wo + j;
            for (std::int64_t w = 0; w < W; ++w) dst[w * r] = src[h * W + w];
          }
        }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    detail::record([xi, oi, B, C, Co, H, W, Ho, Wo, r] {
      const auto& g = detail::grad_of(oi);
      auto& gx = detail::grad_of(xi);
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < Co; ++c)
          for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < r; ++j) {
              double* dst = gx.data() + ((b * C + c * r * r + i * r + j) * H) * W;
              for (std::int64_t h = 0; h < H; ++h) {
                const double* src = g.data() + ((b * Co + c) * Ho + h * r + i) * Wo + j;
                for (std::int64_t w = 0; w < W; ++w) dst[h * W + w] += src[w * r];
              }
            }
    });
  }
  return out;
}

inline Tensor space_to_depth(const Tensor& x, std::int64_t r) {
  detail::check_rank(x, 4, "space_to_depth", "input");
  if (r < 1) throw ConfigError("space_to_depth: r must be >= 1");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % r != 0 || W % r != 0) {
    throw ShapeError("space_to_depth: spatial dims " + std::to_string(H) + "x" + std::to_string(W) +
                     " not divisible by r=" + std::to_string(r));
  }
  const std::int64_t Co = C * r * r, Ho = H / r, Wo = W / r;
  Tensor out = Tensor::zeros({B, Co, Ho, Wo});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < r; ++j) {
          double* dst = out.data().data() + ((b * Co + c * r * r + i * r + j) * Ho) * Wo;
          for (std::int64_t h = 0; h < Ho; ++h) {
            const double* src = x.data().data() + ((b * C + c) * H + h * r + i) * W + j;
            for (std::int64_t w = 0; w < Wo; ++w) dst[h * Wo + w] = src[w * r];
          }
        }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    detail::record([xi, oi, B, C, Co, H, W, Ho, Wo, r] {
      const auto& g = detail::grad_of(oi);
      auto& gx = detail::grad_of(xi);
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < r; ++j) {
              const double* src = g.data() + ((b * Co + c * r * r + i * r + j) * Ho) * Wo;
              for (std::int64_t h = 0; h < Ho; ++h) {
                double* dst = gx.data() + ((b * C + c) * H + h * r + i) * W + j;
                for (std::int64_t w = 0; w < Wo; ++w) dst[w * r] += src[h * Wo + w];
              }
            }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matmul
// ---------------------------------------------------------------------------

// Supports (M,K)x(K,N), (B,M,K)x(K,N) and (B,M,K)x(B,K,N).
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const int ra = a.rank(), rb = b.rank();
  std::int64_t B = 1, M = 0, K = 0, N = 0;
  bool batched_b = false;
  if (ra == 2 && rb == 2) {
    M = a.dim(0), K = a.dim(1), N = b.dim(1);
    if (b.dim(0) != K) throw ShapeError("matmul: inner dims " + std::to_string(K) + " vs " + std::to_string(b.dim(0)));
  } else if (ra == 3 && rb == 2) {
    B = a.dim(0), M = a.dim(1), K = a.dim(2), N = b.dim(1);
    if (b.dim(0) != K) throw ShapeError("matmul: inner dims " + std::to_string(K) + " vs " + std::to_string(b.dim(0)));
  } else if (ra == 3 && rb == 3) {
    B = a.dim(0), M = a.dim(1), K = a.dim(2), N = b.dim(2);
    if (b.dim(0) != B || b.dim(1) != K) {
      throw ShapeError("matmul: batch shapes " + detail::shape_str(a.shape()) + " vs " +
                       detail::shape_str(b.shape()));
    }
    batched_b = true;
  } else {
    throw ShapeError("matmul: unsupported ranks " + std::to_string(ra) + "," + std::to_string(rb));
  }

  Shape os = ra == 2 ? Shape{M, N} : Shape{B, M, N};
  Tensor out = Tensor::zeros(os);
  for (std::int64_t bb = 0; bb < B; ++bb) {
    detail::mm_nn(a.data().data() + bb * M * K, b.data().data() + (batched_b ? bb * K * N : 0),
                  out.data().data() + bb * M * N, M, K, N);
  }
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record([ai, bi, oi, B, M, K, N, batched_b] {
      const auto& g = detail::grad_of(oi);
      for (std::int64_t bb = 0; bb < B; ++bb) {
        const double* gb = g.data() + bb * M * N;
        const double* ad = ai->data.data() + bb * M * K;
        const double* bd = bi->data.data() + (batched_b ? bb * K * N : 0);
        if (ai->requires_grad) {
          detail::mm_nt(gb, bd, detail::grad_of(ai).data() + bb * M * K, M, N, K);
        }
        if (bi->requires_grad) {
          detail::mm_tn(ad, gb, detail::grad_of(bi).data() + (batched_b ? bb * K * N : 0), K, M, N);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution (im2col + matmul; zero or reflect padding)
// ---------------------------------------------------------------------------

namespace detail {

struct ConvDims {
  std::int64_t B, Cin, H, W, Cout, CinG, kH, kW, OH, OW, G;
  std::int64_t stride, pad;
  PadMode mode;
};

// col is (CinG*kH*kW) x (OH*OW); x points at one batch slab [Cin,H,W].
inline void im2col(const double* x, std::int64_t c0, const ConvDims& d, double* col) {
  const std::int64_t OHW = d.OH * d.OW;
  for (std::int64_t c = 0; c < d.CinG; ++c) {
    const double* xc = x + (c0 + c) * d.H * d.W;
    for (std::int64_t kh = 0; kh < d.kH; ++kh)
      for (std::int64_t kw = 0; kw < d.kW; ++kw) {
        double* row = col + ((c * d.kH + kh) * d.kW + kw) * OHW;
        for (std::int64_t oh = 0; oh < d.OH; ++oh) {
          std::int64_t ih = oh * d.stride - d.pad + kh;
          bool row_ok = true;
          if (ih < 0 || ih >= d.H) {
            if (d.mode == PadMode::kReflect) ih = reflect_idx(ih, d.H);
            else row_ok = false;
          }
          double* dst = row + oh * d.OW;
          if (!row_ok) {
            std::fill(dst, dst + d.OW, 0.0);
            continue;
          }
          const double* xr = xc + ih * d.W;
          for (std::int64_t ow = 0; ow < d.OW; ++ow) {
            std::int64_t iw = ow * d.stride - d.pad + kw;
            if (iw < 0 || iw >= d.W) {
              if (d.mode == PadMode::kReflect) iw = reflect_idx(iw, d.W);
              else { dst[ow] = 0.0; continue; }
            }
            dst[ow] = xr[iw];
          }
        }
      }
  }
}

// Scatter-add of dcol back into dx (transpose of im2col).
inline void col2im_acc(const double* col, std::int64_t c0, const ConvDims& d, double* dx) {
  const std::int64_t OHW = d.OH * d.OW;
  for (std::int64_t c = 0; c < d.CinG; ++c) {
    double* xc = dx + (c0 + c) * d.H * d.W;
    for (std::int64_t kh = 0; kh < d.kH; ++kh)
      for (std::int64_t kw = 0; kw < d.kW; ++kw) {
        const double* row = col + ((c * d.kH + kh) * d.kW + kw) * OHW;
        for (std::int64_t oh = 0; oh < d.OH; ++oh) {
          std::int64_t ih = oh * d.stride - d.pad + kh;
          if (ih < 0 || ih >= d.H) {
            if (d.mode == PadMode::kReflect) ih = reflect_idx(ih, d.H);
            else continue;
          }
          const double* src = row + oh * d.OW;
          double* xr = xc + ih * d.W;
          for (std::int64_t ow = 0; ow < d.OW; ++ow) {
            std::int64_t iw = ow * d.stride - d.pad + kw;
            if (iw < 0 || iw >= d.W) {
              if (d.mode == PadMode::kReflect) iw = reflect_idx(iw, d.W);
              else continue;
            }
            xr[iw] += src[ow];
          }
        }
      }
  }
}

}  // namespace detail

inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::int64_t stride,
                     PadSpec pad, std::int64_t groups = 1) {
  detail::check_rank(x, 4, "conv2d", "input");
  detail::check_rank(w, 4, "conv2d", "weight");
  detail::ConvDims d;
  d.B = x.dim(0); d.Cin = x.dim(1); d.H = x.dim(2); d.W = x.dim(3);
  d.Cout = w.dim(0); d.CinG = w.dim(1); d.kH = w.dim(2); d.kW = w.dim(3);
  d.G = groups; d.stride = stride; d.pad = pad.amount; d.mode = pad.mode;
  if (groups < 1 || d.Cin % groups != 0 || d.Cout % groups != 0) {
    throw ShapeError("conv2d: channels in=" + std::to_string(d.Cin) + " out=" + std::to_string(d.Cout) +
                     " not divisible by groups=" + std::to_string(groups));
  }
  if (w.dim(1) != d.Cin / groups) {
    throw ShapeError("conv2d: weight expects " + std::to_string(w.dim(1) * groups) +
                     " input channels, input has " + std::to_string(d.Cin));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != d.Cout)) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(d.Cout) + "]");
  }
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (d.pad < 0) throw ConfigError("conv2d: negative padding");
  if (d.mode == PadMode::kReflect && (d.pad >= d.H || d.pad >= d.W)) {
    throw ShapeError("conv2d: reflect pad " + std::to_string(d.pad) + " needs spatial dims > pad, got " +
                     std::to_string(d.H) + "x" + std::to_string(d.W));
  }
  d.OH = (d.H + 2 * d.pad - d.kH) / stride + 1;
  d.OW = (d.W + 2 * d.pad - d.kW) / stride + 1;
  if (d.H + 2 * d.pad < d.kH || d.W + 2 * d.pad < d.kW) {
    throw ShapeError("conv2d: kernel " + std::to_string(d.kH) + "x" + std::to_string(d.kW) +
                     " larger than padded input " + std::to_string(d.H + 2 * d.pad) + "x" +
                     std::to_string(d.W + 2 * d.pad));
  }

  const std::int64_t CoutG = d.Cout / d.G;
  const std::int64_t ck = d.CinG * d.kH * d.kW;
  const std::int64_t OHW = d.OH * d.OW;
  Tensor out = Tensor::zeros({d.B, d.Cout, d.OH, d.OW});
  std::vector<double> col(static_cast<std::size_t>(ck * OHW));
  for (std::int64_t b = 0; b < d.B; ++b) {
    const double* xb = x.data().data() + b * d.Cin * d.H * d.W;
    for (std::int64_t g = 0; g < d.G; ++g) {
      detail::im2col(xb, g * d.CinG, d, col.data());
      detail::mm_nn(w.data().data() + g * CoutG * ck, col.data(),
                    out.data().data() + (b * d.Cout + g * CoutG) * OHW, CoutG, ck, OHW);
    }
  }
  if (bias.defined()) {
    for (std::int64_t b = 0; b < d.B; ++b)
      for (std::int64_t c = 0; c < d.Cout; ++c) {
        double* o = out.data().data() + (b * d.Cout + c) * OHW;
        const double bv = bias.data()[static_cast<std::size_t>(c)];
        for (std::int64_t i = 0; i < OHW; ++i) o[i] += bv;
      }
  }

  const Tensor* bias_ptr = bias.defined() ? &bias : nullptr;
  if (detail::track({&x, &w, bias_ptr})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), wi = w.impl(), oi = out.impl();
    auto bi = bias.defined() ? bias.impl() : detail::ImplPtr{};
    detail::record([xi, wi, bi, oi, d, CoutG, ck, OHW] {
      const auto& g = detail::grad_of(oi);
      std::vector<double> col(static_cast<std::size_t>(ck * OHW));
      std::vector<double> dcol(static_cast<std::size_t>(ck * OHW));
      for (std::int64_t b = 0; b < d.B; ++b) {
        const double* xb = xi->data.data() + b * d.Cin * d.H * d.W;
        for (std::int64_t gg = 0; gg < d.G; ++gg) {
          const double* gout = g.data() + (b * d.Cout + gg * CoutG) * OHW;
          if (wi->requires_grad) {
            detail::im2col(xb, gg * d.CinG, d, col.data());
            detail::mm_nt(gout, col.data(), detail::grad_of(wi).data() + gg * CoutG * ck, CoutG, OHW, ck);
          }
          if (xi->requires_grad) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            detail::mm_tn(wi->data.data() + gg * CoutG * ck, gout, dcol.data(), ck, CoutG, OHW);
            detail::col2im_acc(dcol.data(), gg * d.CinG, d,
                               detail::grad_of(xi).data() + b * d.Cin * d.H * d.W);
          }
        }
      }
      if (bi && bi->requires_grad) {
        auto& gb = detail::grad_of(bi);
        for (std::int64_t b = 0; b < d.B; ++b)
          for (std::int64_t c = 0; c < d.Cout; ++c) {
            const double* go = g.data() + (b * d.Cout + c) * OHW;
            double acc = 0.0;
            for (std::int64_t i = 0; i < OHW; ++i) acc += go[i];
            gb[static_cast<std::size_t>(c)] += acc;
          }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooling / filtering / resampling
// ---------------------------------------------------------------------------

inline Tensor avg_pool2(const Tensor& x) {
  detail::check_rank(x, 4, "avg_pool2", "input");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw ShapeError("avg_pool2: spatial dims " + std::to_string(H) + "x" + std::to_string(W) +
                     " must be even");
  }
  const std::int64_t Ho = H / 2, Wo = W / 2;
  Tensor out = Tensor::zeros({B, C, Ho, Wo});
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    const double* src = x.data().data() + bc * H * W;
    double* dst = out.data().data() + bc * Ho * Wo;
    for (std::int64_t h = 0; h < Ho; ++h)
      for (std::int64_t w = 0; w < Wo; ++w) {
        const double* p = src + (2 * h) * W + 2 * w;
        dst[h * Wo + w] = 0.25 * (p[0] + p[1] + p[W] + p[W + 1]);
      }
  }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    detail::record([xi, oi, B, C, H, W, Ho, Wo] {
      const auto& g = detail::grad_of(oi);
      auto& gx = detail::grad_of(xi);
      for (std::int64_t bc = 0; bc < B * C; ++bc) {
        const double* src = g.data() + bc * Ho * Wo;
        double* dst = gx.data() + bc * H * W;
        for (std::int64_t h = 0; h < Ho; ++h)
          for (std::int64_t w = 0; w < Wo; ++w) {
            const double q = 0.25 * src[h * Wo + w];
            double* p = dst + (2 * h) * W + 2 * w;
            p[0] += q; p[1] += q; p[W] += q; p[W + 1] += q;
          }
      }
    });
  }
  return out;
}

/// 3x3 mean filter with reflect padding.
inline Tensor box_filter3(const Tensor& x) {
  detail::check_rank(x, 4, "box_filter3", "input");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H < 2 || W < 2) {
    throw ShapeError("box_filter3: spatial dims must be >= 2, got " + std::to_string(H) + "x" +
                     std::to_string(W));
  }
  Tensor out = Tensor::zeros({B, C, H, W});
  constexpr double kInv9 = 1.0 / 9.0;
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    const double* src = x.data().data() + bc * H * W;
    double* dst = out.data().data() + bc * H * W;
    for (std::int64_t h = 0; h < H; ++h) {
      const std::int64_t hm = detail::reflect_idx(h - 1, H), hp = detail::reflect_idx(h + 1, H);
      for (std::int64_t w = 0; w < W; ++w) {
        const std::int64_t wm = detail::reflect_idx(w - 1, W), wp = detail::reflect_idx(w + 1, W);
        dst[h * W + w] =
            kInv9 * (src[hm * W + wm] + src[hm * W + w] + src[hm * W + wp] +
                     src[h * W + wm] + src[h * W + w] + src[h * W + wp] +
                     src[hp * W + wm] + src[hp * W + w] + src[hp * W + wp]);
      }
    }
  }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    detail::record([xi, oi, B, C, H, W] {
      const auto& g = detail::grad_of(oi);
      auto& gx = detail::grad_of(xi);
      constexpr double kInv9 = 1.0 / 9.0;
      for (std::int64_t bc = 0; bc < B * C; ++bc) {
        const double* src = g.data() + bc * H * W;
        double* dst = gx.data() + bc * H * W;
        for (std::int64_t h = 0; h < H; ++h) {
          const std::int64_t hm = detail::reflect_idx(h - 1, H), hp = detail::reflect_idx(h + 1, H);
          for (std::int64_t w = 0; w < W; ++w) {
            const std::int64_t wm = detail::reflect_idx(w - 1, W), wp = detail::reflect_idx(w + 1, W);
            const double q = kInv9 * src[h * W + w];
            dst[hm * W + wm] += q; dst[hm * W + w] += q; dst[hm * W + wp] += q;
            dst[h * W + wm] += q; dst[h * W + w] += q; dst[h * W + wp] += q;
            dst[hp * W + wm] += q; dst[hp * W + w] += q; dst[hp * W + wp] += q;
          }
        }
      }
    });
  }
  return out;
}

inline Tensor nearest_upsample2(const Tensor& x) {
  detail::check_rank(x, 4, "nearest_upsample2", "input");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out = Tensor::zeros({B, C, 2 * H, 2 * W});
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    const double* src = x.data().data() + bc * H * W;
    double* dst = out.data().data() + bc * 4 * H * W;
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t w = 0; w < W; ++w) {
        const double v = src[h * W + w];
        double* p = dst + (2 * h) * (2 * W) + 2 * w;
        p[0] = v; p[1] = v; p[2 * W] = v; p[2 * W + 1] = v;
      }
  }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    detail::record([xi, oi, B, C, H, W] {
      const auto& g = detail::grad_of(oi);
      auto& gx = detail::grad_of(xi);
      for (std::int64_t bc = 0; bc < B * C; ++bc) {
        const double* src = g.data() + bc * 4 * H * W;
        double* dst = gx.data() + bc * H * W;
        for (std::int64_t h = 0; h < H; ++h)
          for (std::int64_t w = 0; w < W; ++w) {
            const double* p = src + (2 * h) * (2 * W) + 2 * w;
            dst[h * W + w] += p[0] + p[1] + p[2 * W] + p[2 * W + 1];
          }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization / attention
// ---------------------------------------------------------------------------

/// Per-position channel normalization: mean 0 / variance 1 over C, then affine.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6) {
  detail::check_rank(x, 4, "layer_norm", "input");
  const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (gamma.numel() != C || beta.numel() != C) {
    throw ShapeError("layer_norm: gamma/beta must have " + std::to_string(C) + " entries");
  }
  Tensor out = Tensor::zeros(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.data().size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(B * HW));
  const double invC = 1.0 / static_cast<double>(C);
  for (std::int64_t b = 0; b < B; ++b) {
    const double* xb = x.data().data() + b * C * HW;
    double* ob = out.data().data() + b * C * HW;
    for (std::int64_t p = 0; p < HW; ++p) {
      double mu = 0.0;
      for (std::int64_t c = 0; c < C; ++c) mu += xb[c * HW + p];
      mu *= invC;
      double var = 0.0;
      for (std::int64_t c = 0; c < C; ++c) {
        const double dv = xb[c * HW + p] - mu;
        var += dv * dv;
      }
      var *= invC;
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[static_cast<std::size_t>(b * HW + p)] = is;
      for (std::int64_t c = 0; c < C; ++c) {
        const double xh = (xb[c * HW + p] - mu) * is;
        (*xhat)[static_cast<std::size_t>((b * C + c) * HW + p)] = xh;
        ob[c * HW + p] = gamma.data()[static_cast<std::size_t>(c)] * xh +
                         beta.data()[static_cast<std::size_t>(c)];
      }
    }
  }
  if (detail::track({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    detail::record([xi, gi, bi, oi, xhat, inv_std, B, C, HW, invC] {
      const auto& g = detail::grad_of(oi);
      if (gi->requires_grad || bi->requires_grad) {
        auto& gg = detail::grad_of(gi);
        auto& gb = detail::grad_of(bi);
        for (std::int64_t b = 0; b < B; ++b)
          for (std::int64_t c = 0; c < C; ++c) {
            const double* gp = g.data() + (b * C + c) * HW;
            const double* xh = xhat->data() + (b * C + c) * HW;
            double sg = 0.0, sb = 0.0;
            for (std::int64_t p = 0; p < HW; ++p) {
              sg += gp[p] * xh[p];
              sb += gp[p];
            }
            if (gi->requires_grad) gg[static_cast<std::size_t>(c)] += sg;
            if (bi->requires_grad) gb[static_cast<std::size_t>(c)] += sb;
          }
      }
      if (xi->requires_grad) {
        auto& gx = detail::grad_of(xi);
        for (std::int64_t b = 0; b < B; ++b)
          for (std::int64_t p = 0; p < HW; ++p) {
            double m1 = 0.0, m2 = 0.0;
            for (std::int64_t c = 0; c < C; ++c) {
              const std::size_t idx = static_cast<std::size_t>((b * C + c) * HW + p);
              const double dxh = g[idx] * gi->data[static_cast<std::size_t>(c)];
              m1 += dxh;
              m2 += dxh * (*xhat)[idx];
            }
            m1 *= invC;
            m2 *= invC;
            const double is = (*inv_std)[static_cast<std::size_t>(b * HW + p)];
            for (std::int64_t c = 0; c < C; ++c) {
              const std::size_t idx = static_cast<std::size_t>((b * C + c) * HW + p);
              const double dxh = g[idx] * gi->data[static_cast<std::size_t>(c)];
              gx[idx] += is * (dxh - m1 - (*xhat)[idx] * m2);
            }
          }
      }
    });
  }
  return out;
}

inline Tensor softmax_lastdim(const Tensor& x) {
  const std::int64_t N = x.dim(x.rank() - 1);
  const std::int64_t R = x.numel() / N;
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t r = 0; r < R; ++r) {
    const double* src = x.data().data() + r * N;
    double* dst = out.data().data() + r * N;
    double m = src[0];
    for (std::int64_t i = 1; i < N; ++i) m = std::max(m, src[i]);
    double s = 0.0;
    for (std::int64_t i = 0; i < N; ++i) {
      dst[i] = std::exp(src[i] - m);
      s += dst[i];
    }
    const double inv = 1.0 / s;
    for (std::int64_t i = 0; i < N; ++i) dst[i] *= inv;
  }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    detail::record([xi, oi, R, N] {
      const auto& g = detail::grad_of(oi);
      auto& gx = detail::grad_of(xi);
      for (std::int64_t r = 0; r < R; ++r) {
        const double* y = oi->data.data() + r * N;
        const double* gr = g.data() + r * N;
        double dot = 0.0;
        for (std::int64_t i = 0; i < N; ++i) dot += gr[i] * y[i];
        double* gd = gx.data() + r * N;
        for (std::int64_t i = 0; i < N; ++i) gd[i] += y[i] * (gr[i] - dot);
      }
    });
  }
  return out;
}

namespace detail {

// [B,C,H,W] -> [B,H*W,C]
inline Tensor to_tokens(const Tensor& x) {
  const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor out = Tensor::zeros({B, HW, C});
  for (std::int64_t b = 0; b < B; ++b) {
    const double* src = x.data().data() + b * C * HW;
    double* dst = out.data().data() + b * C * HW;
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t p = 0; p < HW; ++p) dst[p * C + c] = src[c * HW + p];
  }
  if (track({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    record([xi, oi, B, C, HW] {
      const auto& g = grad_of(oi);
      auto& gx = grad_of(xi);
      for (std::int64_t b = 0; b < B; ++b) {
        const double* src = g.data() + b * C * HW;
        double* dst = gx.data() + b * C * HW;
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t p = 0; p < HW; ++p) dst[c * HW + p] += src[p * C + c];
      }
    });
  }
  return out;
}

// [B,H*W,C] -> [B,C,H,W]
inline Tensor from_tokens(const Tensor& t, std::int64_t H, std::int64_t W) {
  const std::int64_t B = t.dim(0), HW = t.dim(1), C = t.dim(2);
  Tensor out = Tensor::zeros({B, C, H, W});
  for (std::int64_t b = 0; b < B; ++b) {
    const double* src = t.data().data() + b * C * HW;
    double* dst = out.data().data() + b * C * HW;
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t p = 0; p < HW; ++p) dst[c * HW + p] = src[p * C + c];
  }
  if (track({&t})) {
    out.set_requires_grad(true);
    auto ti = t.impl(), oi = out.impl();
    record([ti, oi, B, C, HW] {
      const auto& g = grad_of(oi);
      auto& gt = grad_of(ti);
      for (std::int64_t b = 0; b < B; ++b) {
        const double* src = g.data() + b * C * HW;
        double* dst = gt.data() + b * C * HW;
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t p = 0; p < HW; ++p) dst[p * C + c] += src[c * HW + p];
      }
    });
  }
  return out;
}

}  // namespace detail

/// Scaled dot-product self-attention over the flattened spatial positions.
inline Tensor self_attention(const Tensor& x, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                             std::int64_t token_limit = kDefaultTokenLimit) {
  detail::check_rank(x, 4, "self_attention", "input");
  const std::int64_t C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t N = H * W;
  if (N > token_limit) {
    throw ResourceError("self_attention: " + std::to_string(N) + " tokens exceed limit " +
                        std::to_string(token_limit) + "; tile the input spatially or raise the limit");
  }
  for (const Tensor* m : {&wq, &wk, &wv}) {
    if (m->rank() != 2 || m->dim(0) != C || m->dim(1) != C) {
      throw ShapeError("self_attention: projection must be [" + std::to_string(C) + "," +
                       std::to_string(C) + "], got " + detail::shape_str(m->shape()));
    }
  }
  Tensor tok = detail::to_tokens(x);
  Tensor q = matmul(tok, wq);
  Tensor k = matmul(tok, wk);
  Tensor v = matmul(tok, wv);
  Tensor scores = mul_scalar(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(C)));
  Tensor attn = softmax_lastdim(scores);
  Tensor o = matmul(attn, v);
  return detail::from_tokens(o, H, W);
}

/// 1-D index gather with scatter-add adjoint.
inline Tensor gather(const Tensor& t, const std::vector<std::int64_t>& idx) {
  if (t.rank() != 1) throw ShapeError("gather: rank-1 tensor expected, got " + detail::shape_str(t.shape()));
  const std::int64_t n = t.numel();
  Tensor out = Tensor::zeros({static_cast<std::int64_t>(idx.size())});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n) {
      throw ShapeError("gather: index " + std::to_string(idx[i]) + " outside [0," + std::to_string(n) + ")");
    }
    out.data()[i] = t.data()[static_cast<std::size_t>(idx[i])];
  }
  if (detail::track({&t})) {
    out.set_requires_grad(true);
    auto ti = t.impl(), oi = out.impl();
    detail::record([ti, oi, idx] {
      const auto& g = detail::grad_of(oi);
      auto& gt = detail::grad_of(ti);
      for (std::size_t i = 0; i < idx.size(); ++i) gt[static_cast<std::size_t>(idx[i])] += g[i];
    });
  }
  return out;
}

/// Per-channel affine-of-table scaling: y[b,c,...] = x * (alpha[c]*table[c] + beta[c]).
inline Tensor scale_channels(const Tensor& x, const Tensor& alpha, const Tensor& beta,
                             const std::vector<double>& table) {
  detail::check_rank(x, 4, "scale_channels", "input");
  const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (alpha.numel() != C || beta.numel() != C || static_cast<std::int64_t>(table.size()) != C) {
    throw ShapeError("scale_channels: alpha/beta/table must have " + std::to_string(C) + " entries");
  }
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c) {
      const double s = alpha.data()[static_cast<std::size_t>(c)] * table[static_cast<std::size_t>(c)] +
                       beta.data()[static_cast<std::size_t>(c)];
      const double* src = x.data().data() + (b * C + c) * HW;
      double* dst = out.data().data() + (b * C + c) * HW;
      for (std::int64_t p = 0; p < HW; ++p) dst[p] = src[p] * s;
    }
  if (detail::track({&x, &alpha, &beta})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), ai = alpha.impl(), bi = beta.impl(), oi = out.impl();
    detail::record([xi, ai, bi, oi, table, B, C, HW] {
      const auto& g = detail::grad_of(oi);
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c) {
          const std::size_t cs = static_cast<std::size_t>(c);
          const double s = ai->data[cs] * table[cs] + bi->data[cs];
          const double* gp = g.data() + (b * C + c) * HW;
          const double* xp = xi->data.data() + (b * C + c) * HW;
          if (xi->requires_grad) {
            double* gx = detail::grad_of(xi).data() + (b * C + c) * HW;
            for (std::int64_t p = 0; p < HW; ++p) gx[p] += gp[p] * s;
          }
          if (ai->requires_grad || bi->requires_grad) {
            double acc = 0.0;
            for (std::int64_t p = 0; p < HW; ++p) acc += gp[p] * xp[p];
            if (ai->requires_grad) detail::grad_of(ai)[cs] += acc * table[cs];
            if (bi->requires_grad) detail::grad_of(bi)[cs] += acc;
          }
        }
    });
  }
  return out;
}

/// Inference-only range clamp; rejects tracked inputs so training never
/// saturates gradients through it.
inline Tensor clamp01(const Tensor& x) {
  if (grad_enabled() && x.requires_grad()) {
    throw ContractError("clamp01: inference-only op called on a gradient-tracked tensor");
  }
  Tensor out = Tensor::zeros(x.shape());
  const auto n = static_cast<std::size_t>(x.numel());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::clamp(x.data()[i], 0.0, 1.0);
  return out;
}

}  // namespace hfur
