#pragma once

// Implicit frequency upsampling: transformer-style feature blocks feeding a
// pixel-domain branch and a DCT-domain branch. The DCT branch estimates the
// bounded relative quantization loss, applies the learnable quantization
// prior, and reconstructs pixels through a fixed (fractional) IDCT matrix.

#include <cstdint>
#include <string>
#include <vector>

#include "hfur/dct.hpp"
#include "hfur/ops.hpp"
#include "hfur/tensor.hpp"

namespace hfur {

/// Where the 256-length table scaling acts in the x2 path. The x1 path always
/// scales per-frequency before the transform.
enum class QamPlacement { kAfterIdct, kBeforeIdct };

struct TfBlockParams {
  Tensor n1_gamma, n1_beta, n2_gamma, n2_beta;
  Tensor wq, wk, wv, wo;                  // C x C projections
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;  // 3x3 convs, C -> 2C -> C
};

struct LearnableAffine {
  Tensor scale;  // alpha
  Tensor shift;  // beta
};

struct ImpFreqUpParams {
  std::int64_t factor = 2;  // 1 or 2
  std::vector<TfBlockParams> tf_pre;    // N1 blocks
  std::vector<TfBlockParams> tf_pixel;  // N2 blocks
  Tensor pixel_w, pixel_b;              // 3x3 conv: C -> 4C (x2) or C -> C (x1)
  Tensor delta_luma_w, delta_luma_b;    // 3x3 conv: C -> 1
  Tensor delta_chroma_w, delta_chroma_b;  // 3x3 conv: C -> 2 (Cb, Cr)
  LearnableAffine qam_luma, qam_chroma;   // length 64 (x1) or 256 (x2)
  Tensor irm_weight;  // fixed 1x1 conv [(8*factor)^2, 64, 1, 1]; never trained
  Tensor fuse_w, fuse_b;  // 3x3 conv: 3 -> C
  QamPlacement placement = QamPlacement::kAfterIdct;
};

namespace detail {

inline Tensor project_channels(const Tensor& x, const Tensor& w2d) {
  // 1x1 conv from a [Cout, Cin] matrix.
  return conv2d(x, reshape(w2d, {w2d.dim(0), w2d.dim(1), 1, 1}), Tensor{}, 1, PadSpec{});
}

inline constexpr double kLayerNormEps = 1e-6;

}  // namespace detail

/// Builds the fixed IRM weight tensor from the fractional IDCT matrix: output
/// channel = fine spatial sample, input channel = frequency index.
inline Tensor make_irm_weight(const FractionalIdctMatrix& m) {
  Tensor w = Tensor::from_data({m.rows(), m.cols(), 1, 1}, m.matrix);
  w.set_requires_grad(false);
  return w;
}

/// Pre-norm residual transformer block: x + Wo*SA(LN(x)), then + MLP(LN(.)).
inline Tensor tfblock_forward(const Tensor& x, const TfBlockParams& p,
                              std::int64_t token_limit = kDefaultTokenLimit) {
  Tensor a = layer_norm(x, p.n1_gamma, p.n1_beta, detail::kLayerNormEps);
  a = self_attention(a, p.wq, p.wk, p.wv, token_limit);
  Tensor y = add(x, detail::project_channels(a, p.wo));
  Tensor m = layer_norm(y, p.n2_gamma, p.n2_beta, detail::kLayerNormEps);
  m = conv2d(m, p.mlp_w1, p.mlp_b1, 1, PadSpec{1, PadMode::kReflect});
  m = tanh(m);
  m = conv2d(m, p.mlp_w2, p.mlp_b2, 1, PadSpec{1, PadMode::kReflect});
  return add(y, m);
}

/// Relative-loss estimate per 8x8 block: conv to `out_planes` channels,
/// block-to-channel rearrangement, then the 0.5*tanh bound. Every output is
/// strictly inside (-0.5, 0.5).
inline Tensor estimate_delta(const Tensor& features, const Tensor& conv_w, const Tensor& conv_b) {
  if (features.dim(2) % 8 != 0 || features.dim(3) % 8 != 0) {
    throw ShapeError("estimate_delta: spatial dims " + std::to_string(features.dim(2)) + "x" +
                     std::to_string(features.dim(3)) + " must be multiples of 8");
  }
  Tensor z = conv2d(features, conv_w, conv_b, 1, PadSpec{1, PadMode::kReflect});
  z = space_to_depth(z, 8);
  return mul_scalar(tanh(z), 0.5);
}

/// Applies the quantization prior and the fixed IDCT reconstruction to a
/// 64-channel delta map. Returns one spatial channel at factor*8 upsampling.
inline Tensor qam_irm_apply(const Tensor& delta, const QuantizationPrior& prior,
                            const LearnableAffine& affine, const Tensor& irm_weight,
                            std::int64_t factor, QamPlacement placement = QamPlacement::kAfterIdct) {
  if (delta.rank() != 4 || delta.dim(1) != 64) {
    throw ShapeError("qam_irm_apply: delta must be [B,64,h,w], got " + detail::shape_str(delta.shape()));
  }
  const std::int64_t expected_affine = factor == 1 ? 64 : 256;
  if (affine.scale.numel() != expected_affine || affine.shift.numel() != expected_affine) {
    throw ConfigError("qam_irm_apply: affine length " + std::to_string(affine.scale.numel()) +
                      " does not match factor " + std::to_string(factor) + " (want " +
                      std::to_string(expected_affine) + ")");
  }
  if (irm_weight.dim(0) != factor * factor * 64 || irm_weight.dim(1) != 64) {
    throw ConfigError("qam_irm_apply: IRM weight shape " + detail::shape_str(irm_weight.shape()) +
                      " does not match factor " + std::to_string(factor));
  }

  if (factor == 1) {
    // xi = delta (*) (alpha*T_base + beta) per frequency, then 64->64 IDCT.
    std::vector<double> table(prior.t_base.begin(), prior.t_base.end());
    Tensor xi = scale_channels(delta, affine.scale, affine.shift, table);
    Tensor y = conv2d(xi, irm_weight, Tensor{}, 1, PadSpec{});
    return depth_to_space(y, 8);
  }

  std::vector<double> table(prior.t_up.begin(), prior.t_up.end());
  if (placement == QamPlacement::kAfterIdct) {
    // Paper-literal: the 256-length scaling acts on the fine-sample axis.
    Tensor y = conv2d(delta, irm_weight, Tensor{}, 1, PadSpec{});
    y = scale_channels(y, affine.scale, affine.shift, table);
    return depth_to_space(y, 16);
  }

  // Per-frequency alternative: subsample the 256-length affine and table at
  // the 2x2 group representatives (t_up(2u,2v) == t_base(u,v)).
  std::vector<std::int64_t> rep(64);
  std::vector<double> table64(64);
  for (std::int64_t u = 0; u < 8; ++u)
    for (std::int64_t v = 0; v < 8; ++v) {
      rep[static_cast<std::size_t>(u * 8 + v)] = (2 * u) * 16 + 2 * v;
      table64[static_cast<std::size_t>(u * 8 + v)] = table[static_cast<std::size_t>((2 * u) * 16 + 2 * v)];
    }
  Tensor xi = scale_channels(delta, gather(affine.scale, rep), gather(affine.shift, rep), table64);
  Tensor y = conv2d(xi, irm_weight, Tensor{}, 1, PadSpec{});
  return depth_to_space(y, 16);
}

struct PriorPair {
  QuantizationPrior luma;
  QuantizationPrior chroma;
};

/// Full module: tf_pre feature extraction, then pixel branch (sub-pixel conv
/// for x2, plain conv for x1) plus the DCT branch (luma + two chroma
/// channels), merged additively through the fuse conv.
inline Tensor impfrequp_forward(const Tensor& features, const ImpFreqUpParams& p,
                                const PriorPair& priors,
                                std::int64_t token_limit = kDefaultTokenLimit) {
  if (features.dim(2) % 8 != 0 || features.dim(3) % 8 != 0) {
    throw ShapeError("impfrequp_forward: spatial dims " + std::to_string(features.dim(2)) + "x" +
                     std::to_string(features.dim(3)) + " must be multiples of 8");
  }
  Tensor f0 = features;
  for (const auto& blk : p.tf_pre) f0 = tfblock_forward(f0, blk, token_limit);

  Tensor t = f0;
  for (const auto& blk : p.tf_pixel) t = tfblock_forward(t, blk, token_limit);
  Tensor pixel = conv2d(t, p.pixel_w, p.pixel_b, 1, PadSpec{1, PadMode::kReflect});
  if (p.factor == 2) pixel = depth_to_space(pixel, 2);

  Tensor delta_l = estimate_delta(f0, p.delta_luma_w, p.delta_luma_b);
  Tensor out_l = qam_irm_apply(delta_l, priors.luma, p.qam_luma, p.irm_weight, p.factor, p.placement);
  Tensor delta_c = estimate_delta(f0, p.delta_chroma_w, p.delta_chroma_b);  // [B,128,h,w]
  Tensor out_cb = qam_irm_apply(slice_channels(delta_c, 0, 64), priors.chroma, p.qam_chroma,
                                p.irm_weight, p.factor, p.placement);
  Tensor out_cr = qam_irm_apply(slice_channels(delta_c, 64, 128), priors.chroma, p.qam_chroma,
                                p.irm_weight, p.factor, p.placement);
  Tensor dct = concat({out_l, out_cb, out_cr}, 1);
  return add(pixel, conv2d(dct, p.fuse_w, p.fuse_b, 1, PadSpec{1, PadMode::kReflect}));
}

}  // namespace hfur
