#pragma once

// Hierarchical and iterative refinement: a detail branch at full resolution
// and a smooth branch at half resolution, each refined by the same residual
// family (local DR, global NR), exchanging information every iteration.

#include <cstdint>
#include <string>

#include "hfur/ops.hpp"
#include "hfur/tensor.hpp"

namespace hfur {

/// DR and NR share this structure; NR simply attends over the half-resolution
/// token set for a global receptive field.
struct RefineParams {
  Tensor conv_in_w, conv_in_b;    // 1x1, Cb -> Cb
  Tensor wq, wk, wv;              // Cb x Cb attention projections
  Tensor dw_w, dw_b;              // depthwise 3x3
  Tensor conv_out_w, conv_out_b;  // 1x1, Cb -> Cb
};

struct HirParams {
  Tensor split_w, split_b;  // 3x3, C -> 2*Cb
  RefineParams dr, nr;
  Tensor d2l_w, d2l_b;    // 3x3, Cb -> Cb, followed by avg-pool
  Tensor l2d_w, l2d_b;    // 3x3, Cb -> 4*Cb, followed by pixel shuffle
  Tensor merge_w, merge_b;  // 3x3, 2*Cb -> C
  std::int64_t iterations = 2;
};

/// detail = x - 3x3 mean, smooth = 2x2 average pool.
inline std::pair<Tensor, Tensor> freq_split(const Tensor& x) {
  return {sub(x, box_filter3(x)), avg_pool2(x)};
}

/// F' = x + SA(Conv1x1(x)); F'' = Conv1x1(F' + DWConv3x3(F')); out = x + F''.
inline Tensor refine_forward(const Tensor& x, const RefineParams& p,
                             std::int64_t token_limit = kDefaultTokenLimit) {
  const std::int64_t cb = x.dim(1);
  Tensor pre = conv2d(x, p.conv_in_w, p.conv_in_b, 1, PadSpec{});
  Tensor f1 = add(x, self_attention(pre, p.wq, p.wk, p.wv, token_limit));
  Tensor dw = conv2d(f1, p.dw_w, p.dw_b, 1, PadSpec{1, PadMode::kReflect}, cb);
  Tensor f2 = conv2d(add(f1, dw), p.conv_out_w, p.conv_out_b, 1, PadSpec{});
  return add(x, f2);
}

inline Tensor hir_forward(const Tensor& x, const HirParams& p,
                          std::int64_t token_limit = kDefaultTokenLimit) {
  if (x.dim(1) % 2 != 0) {
    throw ShapeError("hir_forward: channel count " + std::to_string(x.dim(1)) + " must be even");
  }
  if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw ShapeError("hir_forward: spatial dims " + std::to_string(x.dim(2)) + "x" +
                     std::to_string(x.dim(3)) + " must be even");
  }
  const std::int64_t cb = p.split_w.dim(0) / 2;
  Tensor s = conv2d(x, p.split_w, p.split_b, 1, PadSpec{1, PadMode::kReflect});
  Tensor d = freq_split(slice_channels(s, 0, cb)).first;
  Tensor l = freq_split(slice_channels(s, cb, 2 * cb)).second;

  for (std::int64_t it = 0; it < p.iterations; ++it) {
    Tensor up = depth_to_space(conv2d(l, p.l2d_w, p.l2d_b, 1, PadSpec{1, PadMode::kReflect}), 2);
    d = refine_forward(add(d, up), p.dr, token_limit);
    Tensor down = avg_pool2(conv2d(d, p.d2l_w, p.d2l_b, 1, PadSpec{1, PadMode::kReflect}));
    l = refine_forward(add(l, down), p.nr, token_limit);
  }

  Tensor up = depth_to_space(conv2d(l, p.l2d_w, p.l2d_b, 1, PadSpec{1, PadMode::kReflect}), 2);
  Tensor merged = conv2d(concat({d, up}, 1), p.merge_w, p.merge_b, 1, PadSpec{1, PadMode::kReflect});
  return add(x, merged);
}

}  // namespace hfur
