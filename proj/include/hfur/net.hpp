#pragma once

// Full multi-scale network: temporal fusion, strided encoder, three
// upsample+refine stages (x2, x2, x1) with additive skips, and a residual
// output head. Identity at initialization by construction.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hfur/codec_sim.hpp"
#include "hfur/frame.hpp"
#include "hfur/hir.hpp"
#include "hfur/impfrequp.hpp"
#include "hfur/ops.hpp"

namespace hfur {

enum class UpsamplerKind { kImpFreq, kSubpixel, kNearest };

inline std::string upsampler_name(UpsamplerKind k) {
  switch (k) {
    case UpsamplerKind::kImpFreq: return "impfreq";
    case UpsamplerKind::kSubpixel: return "subpixel";
    case UpsamplerKind::kNearest: return "nearest";
  }
  return "?";
}

inline UpsamplerKind upsampler_from_name(const std::string& s) {
  if (s == "impfreq") return UpsamplerKind::kImpFreq;
  if (s == "subpixel") return UpsamplerKind::kSubpixel;
  if (s == "nearest") return UpsamplerKind::kNearest;
  throw ConfigError("unknown upsampler '" + s + "'");
}

struct NetworkConfig {
  std::int64_t channels = 64;
  std::int64_t n1 = 4, n2 = 4;
  std::int64_t hir_iterations = 2;
  std::int64_t temporal_window = 5;
  std::int64_t planes = 1;
  UpsamplerKind upsampler = UpsamplerKind::kImpFreq;
  bool use_hir = true;
  QamPlacement qam_placement = QamPlacement::kAfterIdct;
  std::int64_t attention_token_limit = 4096;

  std::int64_t hir_branch_channels() const { return channels / 2; }

  void validate() const {
    if (channels < 2 || channels % 2 != 0) {
      throw ConfigError("NetworkConfig: channels must be even and >= 2, got " + std::to_string(channels));
    }
    if (n1 < 1 || n2 < 1) throw ConfigError("NetworkConfig: n1/n2 must be >= 1");
    if (hir_iterations < 1) throw ConfigError("NetworkConfig: hir_iterations must be >= 1");
    if (temporal_window < 1 || temporal_window % 2 == 0) {
      throw ConfigError("NetworkConfig: temporal_window must be odd (center frame), got " +
                        std::to_string(temporal_window));
    }
    if (planes != 1 && planes != 3) throw ConfigError("NetworkConfig: planes must be 1 or 3");
  }

  static NetworkConfig paper_profile() {
    NetworkConfig c;
    c.channels = 64;
    c.n1 = c.n2 = 4;
    c.temporal_window = 5;
    c.planes = 3;
    return c;
  }

  static NetworkConfig test_profile() {
    NetworkConfig c;
    c.channels = 16;
    c.n1 = c.n2 = 1;
    c.temporal_window = 3;
    c.planes = 1;
    return c;
  }
};

struct TrainConfig {
  double lr_init = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t batch = 8;
  std::int64_t crop = 96;
  bool augment = true;
  double charbonnier_eps = 1e-3;
  std::int64_t steps = 2000;
  std::uint64_t seed = 0;
  std::int64_t val_interval = 250;

  double lr_min() const { return lr_init / 100.0; }

  void validate() const {
    if (batch < 1) throw ConfigError("TrainConfig: batch must be >= 1");
    if (steps < 1) throw ConfigError("TrainConfig: steps must be >= 1");
    if (crop < 32 || crop % 32 != 0) {
      throw ConfigError("TrainConfig: crop must be a positive multiple of 32 (deepest scale needs "
                        "8-divisible blocks), got " + std::to_string(crop));
    }
    if (!(lr_init > 0.0)) throw ConfigError("TrainConfig: lr_init must be positive");
  }
};

struct StageParams {
  std::int64_t factor = 2;
  std::optional<ImpFreqUpParams> impfreq;
  Tensor plain_w, plain_b;  // subpixel / nearest upsampler conv
  std::optional<HirParams> hir;
};

struct HfurParams {
  NetworkConfig cfg;
  Tensor fuse1_w, fuse1_b, fuse2_w, fuse2_b;
  Tensor enc1_w, enc1_b, enc2_w, enc2_b;
  StageParams stages[3];  // 0 = deepest (quarter res), 2 = full res (x1)
  Tensor skip1_w, skip1_b, skip0_w, skip0_b;
  Tensor out_w, out_b;
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {

struct InitRng {
  std::mt19937_64 eng;
  explicit InitRng(std::uint64_t seed) : eng(seed) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(eng() >> 11) / 9007199254740992.0;  // [0,1)
    return lo + (hi - lo) * u;
  }
};

inline Tensor fanin_tensor(Shape shape, std::int64_t fan_in, InitRng& rng) {
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  const std::int64_t n = numel_of(shape);
  std::vector<double> data(static_cast<std::size_t>(n));
  for (auto& v : data) v = rng.uniform(-a, a);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

inline Tensor conv_init(std::int64_t cout, std::int64_t cin, std::int64_t k, InitRng& rng) {
  return fanin_tensor({cout, cin, k, k}, cin * k * k, rng);
}

inline Tensor mat_init(std::int64_t rows, std::int64_t cols, InitRng& rng) {
  return fanin_tensor({rows, cols}, rows, rng);
}

inline Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

inline TfBlockParams tfblock_init(std::int64_t c, InitRng& rng) {
  TfBlockParams p;
  p.n1_gamma = Tensor::full({c}, 1.0, true);
  p.n1_beta = zeros_param({c});
  p.n2_gamma = Tensor::full({c}, 1.0, true);
  p.n2_beta = zeros_param({c});
  p.wq = mat_init(c, c, rng);
  p.wk = mat_init(c, c, rng);
  p.wv = mat_init(c, c, rng);
  p.wo = zeros_param({c, c});  // residual-branch output: zero
  p.mlp_w1 = conv_init(2 * c, c, 3, rng);
  p.mlp_b1 = zeros_param({2 * c});
  p.mlp_w2 = zeros_param({c, 2 * c, 3, 3});  // residual-branch output: zero
  p.mlp_b2 = zeros_param({c});
  return p;
}

inline ImpFreqUpParams impfrequp_init(std::int64_t c, std::int64_t factor, std::int64_t n1,
                                      std::int64_t n2, QamPlacement placement, InitRng& rng) {
  ImpFreqUpParams p;
  p.factor = factor;
  p.placement = placement;
  for (std::int64_t i = 0; i < n1; ++i) p.tf_pre.push_back(tfblock_init(c, rng));
  for (std::int64_t i = 0; i < n2; ++i) p.tf_pixel.push_back(tfblock_init(c, rng));
  const std::int64_t pixel_out = factor == 2 ? 4 * c : c;
  p.pixel_w = conv_init(pixel_out, c, 3, rng);
  p.pixel_b = zeros_param({pixel_out});
  p.delta_luma_w = conv_init(1, c, 3, rng);
  p.delta_luma_b = zeros_param({1});
  p.delta_chroma_w = conv_init(2, c, 3, rng);
  p.delta_chroma_b = zeros_param({2});
  const std::int64_t alen = factor == 2 ? 256 : 64;
  p.qam_luma.scale = Tensor::full({alen}, 1.0, true);
  p.qam_luma.shift = zeros_param({alen});
  p.qam_chroma.scale = Tensor::full({alen}, 1.0, true);
  p.qam_chroma.shift = zeros_param({alen});
  p.irm_weight = make_irm_weight(make_fractional_idct(8, factor));
  p.fuse_w = zeros_param({c, 3, 3, 3});  // residual-branch output: zero
  p.fuse_b = zeros_param({c});
  return p;
}

inline RefineParams refine_init(std::int64_t cb, InitRng& rng) {
  RefineParams p;
  p.conv_in_w = conv_init(cb, cb, 1, rng);
  p.conv_in_b = zeros_param({cb});
  p.wq = mat_init(cb, cb, rng);
  p.wk = mat_init(cb, cb, rng);
  p.wv = mat_init(cb, cb, rng);
  p.dw_w = fanin_tensor({cb, 1, 3, 3}, 9, rng);
  p.dw_b = zeros_param({cb});
  p.conv_out_w = zeros_param({cb, cb, 1, 1});  // residual-branch output: zero
  p.conv_out_b = zeros_param({cb});
  return p;
}

inline HirParams hir_init(std::int64_t c, std::int64_t iterations, InitRng& rng) {
  const std::int64_t cb = c / 2;
  HirParams p;
  p.iterations = iterations;
  p.split_w = conv_init(2 * cb, c, 3, rng);
  p.split_b = zeros_param({2 * cb});
  p.dr = refine_init(cb, rng);
  p.nr = refine_init(cb, rng);
  p.d2l_w = conv_init(cb, cb, 3, rng);
  p.d2l_b = zeros_param({cb});
  p.l2d_w = conv_init(4 * cb, cb, 3, rng);
  p.l2d_b = zeros_param({4 * cb});
  p.merge_w = zeros_param({c, 2 * cb, 3, 3});  // outer residual: zero
  p.merge_b = zeros_param({c});
  return p;
}

}  // namespace detail

/// Fresh parameter set: fan-in-scaled uniform convs/projections, zero for the
/// output head and every residual-branch output projection, so the network
/// maps any input to its center frame exactly.
inline HfurParams init_params(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  detail::InitRng rng(seed);
  const std::int64_t c = cfg.channels;
  HfurParams p;
  p.cfg = cfg;
  p.fuse1_w = detail::conv_init(c, cfg.temporal_window * cfg.planes, 3, rng);
  p.fuse1_b = detail::zeros_param({c});
  p.fuse2_w = detail::conv_init(c, c, 3, rng);
  p.fuse2_b = detail::zeros_param({c});
  p.enc1_w = detail::conv_init(c, c, 3, rng);
  p.enc1_b = detail::zeros_param({c});
  p.enc2_w = detail::conv_init(c, c, 3, rng);
  p.enc2_b = detail::zeros_param({c});
  for (int s = 0; s < 3; ++s) {
    StageParams& st = p.stages[s];
    st.factor = s == 2 ? 1 : 2;
    if (cfg.upsampler == UpsamplerKind::kImpFreq) {
      st.impfreq = detail::impfrequp_init(c, st.factor, cfg.n1, cfg.n2, cfg.qam_placement, rng);
    } else {
      const std::int64_t out = (cfg.upsampler == UpsamplerKind::kSubpixel && st.factor == 2) ? 4 * c : c;
      st.plain_w = detail::conv_init(out, c, 3, rng);
      st.plain_b = detail::zeros_param({out});
    }
    if (cfg.use_hir) st.hir = detail::hir_init(c, cfg.hir_iterations, rng);
  }
  p.skip1_w = detail::conv_init(c, c, 3, rng);
  p.skip1_b = detail::zeros_param({c});
  p.skip0_w = detail::conv_init(c, c, 3, rng);
  p.skip0_b = detail::zeros_param({c});
  p.out_w = detail::zeros_param({cfg.planes, c, 3, 3});  // identity at init
  p.out_b = detail::zeros_param({cfg.planes});
  return p;
}

// ---------------------------------------------------------------------------
// Parameter registry (checkpointing, optimizer, counting)
// ---------------------------------------------------------------------------

namespace detail {

using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

inline void visit_tfblock(const std::string& pre, TfBlockParams& p, const ParamVisitor& f) {
  f(pre + ".n1.gamma", p.n1_gamma);
  f(pre + ".n1.beta", p.n1_beta);
  f(pre + ".n2.gamma", p.n2_gamma);
  f(pre + ".n2.beta", p.n2_beta);
  f(pre + ".attn.wq", p.wq);
  f(pre + ".attn.wk", p.wk);
  f(pre + ".attn.wv", p.wv);
  f(pre + ".attn.wo", p.wo);
  f(pre + ".mlp.w1", p.mlp_w1);
  f(pre + ".mlp.b1", p.mlp_b1);
  f(pre + ".mlp.w2", p.mlp_w2);
  f(pre + ".mlp.b2", p.mlp_b2);
}

inline void visit_refine(const std::string& pre, RefineParams& p, const ParamVisitor& f) {
  f(pre + ".conv_in.w", p.conv_in_w);
  f(pre + ".conv_in.b", p.conv_in_b);
  f(pre + ".attn.wq", p.wq);
  f(pre + ".attn.wk", p.wk);
  f(pre + ".attn.wv", p.wv);
  f(pre + ".dw.w", p.dw_w);
  f(pre + ".dw.b", p.dw_b);
  f(pre + ".conv_out.w", p.conv_out_w);
  f(pre + ".conv_out.b", p.conv_out_b);
}

// Trainable parameters only; the fixed IRM weight is intentionally absent.
inline void visit_params(HfurParams& p, const ParamVisitor& f) {
  f("fuse.conv1.w", p.fuse1_w);
  f("fuse.conv1.b", p.fuse1_b);
  f("fuse.conv2.w", p.fuse2_w);
  f("fuse.conv2.b", p.fuse2_b);
  f("enc1.w", p.enc1_w);
  f("enc1.b", p.enc1_b);
  f("enc2.w", p.enc2_w);
  f("enc2.b", p.enc2_b);
  for (int s = 0; s < 3; ++s) {
    const std::string pre = "stage" + std::to_string(s);
    StageParams& st = p.stages[s];
    if (st.impfreq) {
      ImpFreqUpParams& ip = *st.impfreq;
      for (std::size_t i = 0; i < ip.tf_pre.size(); ++i)
        visit_tfblock(pre + ".impfreq.tf_pre." + std::to_string(i), ip.tf_pre[i], f);
      for (std::size_t i = 0; i < ip.tf_pixel.size(); ++i)
        visit_tfblock(pre + ".impfreq.tf_pixel." + std::to_string(i), ip.tf_pixel[i], f);
      f(pre + ".impfreq.pixel.w", ip.pixel_w);
      f(pre + ".impfreq.pixel.b", ip.pixel_b);
      f(pre + ".impfreq.delta_luma.w", ip.delta_luma_w);
      f(pre + ".impfreq.delta_luma.b", ip.delta_luma_b);
      f(pre + ".impfreq.delta_chroma.w", ip.delta_chroma_w);
      f(pre + ".impfreq.delta_chroma.b", ip.delta_chroma_b);
      f(pre + ".impfreq.qam_luma.scale", ip.qam_luma.scale);
      f(pre + ".impfreq.qam_luma.shift", ip.qam_luma.shift);
      f(pre + ".impfreq.qam_chroma.scale", ip.qam_chroma.scale);
      f(pre + ".impfreq.qam_chroma.shift", ip.qam_chroma.shift);
      f(pre + ".impfreq.fuse.w", ip.fuse_w);
      f(pre + ".impfreq.fuse.b", ip.fuse_b);
    }
    if (st.plain_w.defined()) {
      f(pre + ".plain.w", st.plain_w);
      f(pre + ".plain.b", st.plain_b);
    }
    if (st.hir) {
      HirParams& h = *st.hir;
      f(pre + ".hir.split.w", h.split_w);
      f(pre + ".hir.split.b", h.split_b);
      visit_refine(pre + ".hir.dr", h.dr, f);
      visit_refine(pre + ".hir.nr", h.nr, f);
      f(pre + ".hir.d2l.w", h.d2l_w);
      f(pre + ".hir.d2l.b", h.d2l_b);
      f(pre + ".hir.l2d.w", h.l2d_w);
      f(pre + ".hir.l2d.b", h.l2d_b);
      f(pre + ".hir.merge.w", h.merge_w);
      f(pre + ".hir.merge.b", h.merge_b);
    }
  }
  f("skip1.w", p.skip1_w);
  f("skip1.b", p.skip1_b);
  f("skip0.w", p.skip0_w);
  f("skip0.b", p.skip0_b);
  f("out.w", p.out_w);
  f("out.b", p.out_b);
}

}  // namespace detail

inline std::vector<std::pair<std::string, Tensor>> named_params(HfurParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  detail::visit_params(p, [&](const std::string& n, Tensor& t) { out.emplace_back(n, t); });
  return out;
}

inline std::int64_t count_params(HfurParams& p) {
  std::int64_t n = 0;
  detail::visit_params(p, [&](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

/// Name-matched warm start: tensors present in `loaded` with matching shape
/// are copied in, everything else keeps its fresh initialization.
inline std::int64_t load_matching_params(HfurParams& p, const std::map<std::string, Tensor>& loaded) {
  std::int64_t hits = 0;
  detail::visit_params(p, [&](const std::string& n, Tensor& t) {
    auto it = loaded.find(n);
    if (it == loaded.end()) return;
    if (it->second.shape() != t.shape()) return;
    t.data() = it->second.data();
    ++hits;
  });
  return hits;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

/// Concat-and-conv fusion of the temporal window into C feature channels.
inline Tensor temporal_fuse(const Tensor& frames, const HfurParams& p) {
  if (frames.rank() != 5) {
    throw ShapeError("temporal_fuse: input must be [B,T,P,H,W], got " +
                     detail::shape_str(frames.shape()));
  }
  const std::int64_t T = frames.dim(1), P = frames.dim(2);
  if (T != p.cfg.temporal_window || P != p.cfg.planes) {
    throw ShapeError("temporal_fuse: window/planes " + std::to_string(T) + "/" + std::to_string(P) +
                     " do not match config " + std::to_string(p.cfg.temporal_window) + "/" +
                     std::to_string(p.cfg.planes));
  }
  Tensor x = reshape(frames, {frames.dim(0), T * P, frames.dim(3), frames.dim(4)});
  x = tanh(conv2d(x, p.fuse1_w, p.fuse1_b, 1, PadSpec{1, PadMode::kReflect}));
  return tanh(conv2d(x, p.fuse2_w, p.fuse2_b, 1, PadSpec{1, PadMode::kReflect}));
}

namespace detail {

inline Tensor stage_forward(const StageParams& st, const Tensor& x, const PriorPair& priors,
                            const NetworkConfig& cfg) {
  Tensor up;
  if (st.impfreq) {
    up = impfrequp_forward(x, *st.impfreq, priors, cfg.attention_token_limit);
  } else if (cfg.upsampler == UpsamplerKind::kSubpixel) {
    Tensor c = conv2d(x, st.plain_w, st.plain_b, 1, PadSpec{1, PadMode::kReflect});
    up = st.factor == 2 ? depth_to_space(c, 2) : c;
  } else {
    Tensor n = st.factor == 2 ? nearest_upsample2(x) : x;
    up = conv2d(n, st.plain_w, st.plain_b, 1, PadSpec{1, PadMode::kReflect});
  }
  if (st.hir) up = hir_forward(up, *st.hir, cfg.attention_token_limit);
  return up;
}

}  // namespace detail

/// frames: [B,T,P,H,W] with H, W multiples of 32 (callers reflect-pad and
/// crop back). Returns center frame + residual; clamped only at inference.
inline Tensor hfur_forward(const Tensor& frames, const HfurParams& p, const PriorPair& priors,
                           bool training) {
  if (frames.rank() != 5) {
    throw ShapeError("hfur_forward: input must be [B,T,P,H,W], got " +
                     detail::shape_str(frames.shape()));
  }
  const std::int64_t B = frames.dim(0), T = frames.dim(1), P = frames.dim(2);
  const std::int64_t H = frames.dim(3), W = frames.dim(4);
  if (H % 32 != 0 || W % 32 != 0) {
    throw ContractError("hfur_forward: spatial dims " + std::to_string(H) + "x" + std::to_string(W) +
                        " must be multiples of 32 (reflect-pad first)");
  }
  Tensor f0 = temporal_fuse(frames, p);
  Tensor e1 = tanh(conv2d(f0, p.enc1_w, p.enc1_b, 2, PadSpec{1, PadMode::kReflect}));
  Tensor e2 = tanh(conv2d(e1, p.enc2_w, p.enc2_b, 2, PadSpec{1, PadMode::kReflect}));

  Tensor u2 = detail::stage_forward(p.stages[0], e2, priors, p.cfg);
  Tensor x1 = add(u2, conv2d(e1, p.skip1_w, p.skip1_b, 1, PadSpec{1, PadMode::kReflect}));
  Tensor u1 = detail::stage_forward(p.stages[1], x1, priors, p.cfg);
  Tensor x0 = add(u1, conv2d(f0, p.skip0_w, p.skip0_b, 1, PadSpec{1, PadMode::kReflect}));
  Tensor u0 = detail::stage_forward(p.stages[2], x0, priors, p.cfg);

  Tensor res = conv2d(u0, p.out_w, p.out_b, 1, PadSpec{1, PadMode::kReflect});
  Tensor flat = reshape(frames, {B, T * P, H, W});
  Tensor center = slice_channels(flat, (T / 2) * P, (T / 2 + 1) * P);
  Tensor out = add(center, res);
  return training ? out : clamp01(out);
}

/// Smooth L1 surrogate: mean of sqrt((pred-target)^2 + eps^2).
inline Tensor charbonnier_loss(const Tensor& pred, const Tensor& target, double eps) {
  detail::check_same_shape(pred, target, "charbonnier_loss");
  Tensor d = sub(pred, target);
  return mean(sqrt(add_scalar(mul(d, d), eps * eps)));
}

// ---------------------------------------------------------------------------
// Frame <-> tensor plumbing and whole-clip inference
// ---------------------------------------------------------------------------

namespace detail {

inline void copy_plane_into(const Plane& pl, double* dst) {
  std::copy(pl.v.begin(), pl.v.end(), dst);
}

}  // namespace detail

/// [1,T,P,H,W] window around `center`, replicating edge frames.
inline Tensor window_tensor(const std::vector<Frame>& frames, std::int64_t center, std::int64_t window) {
  const std::int64_t n = static_cast<std::int64_t>(frames.size());
  const std::int64_t P = static_cast<std::int64_t>(frames[0].planes.size());
  const std::int64_t H = frames[0].planes[0].h, W = frames[0].planes[0].w;
  Tensor t = Tensor::zeros({1, window, P, H, W});
  for (std::int64_t i = 0; i < window; ++i) {
    std::int64_t idx = center - window / 2 + i;
    idx = std::min(n - 1, std::max<std::int64_t>(0, idx));
    for (std::int64_t pl = 0; pl < P; ++pl) {
      detail::copy_plane_into(frames[static_cast<std::size_t>(idx)].planes[static_cast<std::size_t>(pl)],
                              t.data().data() + ((i * P) + pl) * H * W);
    }
  }
  return t;
}

/// Reflect-pads a frame's planes on the bottom/right to multiples of `m`.
inline Frame pad_frame_to_multiple(const Frame& f, std::int64_t m) {
  Frame out = f;
  bool changed = false;
  for (Plane& p : out.planes) {
    const std::int64_t nh = (p.h + m - 1) / m * m;
    const std::int64_t nw = (p.w + m - 1) / m * m;
    if (nh == p.h && nw == p.w) continue;
    changed = true;
    Plane q(nw, nh);
    for (std::int64_t y = 0; y < nh; ++y) {
      const std::int64_t sy = y < p.h ? y : 2 * p.h - 1 - y;
      for (std::int64_t x = 0; x < nw; ++x) {
        const std::int64_t sx = x < p.w ? x : 2 * p.w - 1 - x;
        q.at(y, x) = p.at(sy, sx);
      }
    }
    p = std::move(q);
  }
  if (changed) {
    out.width = out.planes[0].w;
    out.height = out.planes[0].h;
  }
  return out;
}

/// Enhances a whole clip at inference settings (no gradients, clamped).
inline std::vector<Frame> enhance_frames(HfurParams& p, const PriorPair& priors,
                                         const std::vector<Frame>& degraded) {
  NoGradGuard ng;
  std::vector<Frame> out;
  if (degraded.empty()) return out;
  if (static_cast<std::int64_t>(degraded[0].planes.size()) != p.cfg.planes) {
    throw ContractError("enhance_frames: clip has " + std::to_string(degraded[0].planes.size()) +
                        " planes, network expects " + std::to_string(p.cfg.planes));
  }
  for (const Plane& pl : degraded[0].planes) {
    if (pl.w != degraded[0].planes[0].w || pl.h != degraded[0].planes[0].h) {
      throw ContractError("enhance_frames: planes must share dimensions (no 4:2:0 here)");
    }
  }
  const std::int64_t H = degraded[0].planes[0].h, W = degraded[0].planes[0].w;
  std::vector<Frame> padded;
  padded.reserve(degraded.size());
  for (const Frame& f : degraded) padded.push_back(pad_frame_to_multiple(f, 32));

  for (std::size_t i = 0; i < padded.size(); ++i) {
    Tensor in = window_tensor(padded, static_cast<std::int64_t>(i), p.cfg.temporal_window);
    Tensor y = hfur_forward(in, p, priors, /*training=*/false);
    Frame f = degraded[i];
    const std::int64_t PH = padded[0].planes[0].h, PW = padded[0].planes[0].w;
    for (std::size_t pl = 0; pl < f.planes.size(); ++pl) {
      for (std::int64_t r = 0; r < H; ++r)
        for (std::int64_t c = 0; c < W; ++c)
          f.planes[pl].at(r, c) = y.data()[(pl * PH + r) * PW + c];
    }
    out.push_back(std::move(f));
  }
  return out;
}

/// Mean per-frame delta-PSNR of enhanced vs degraded, both against source.
inline double clip_dpsnr(HfurParams& p, const PriorPair& priors, const DegradedClip& clip) {
  std::vector<Frame> enhanced = enhance_frames(p, priors, clip.degraded);
  double acc = 0.0;
  for (std::size_t i = 0; i < enhanced.size(); ++i) {
    acc += delta_psnr(clip.source[i], clip.degraded[i], enhanced[i]);
  }
  return acc / static_cast<double>(enhanced.size());
}

}  // namespace hfur
