#pragma once

// Block-DCT quantization simulator with exact ground truth (Theta, Theta*,
// xi, delta), plus deterministic synthetic clips. No prediction or entropy
// coding: artifacts come from transform quantization only, which keeps the
// coefficient loss exactly recoverable.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hfur/dct.hpp"
#include "hfur/frame.hpp"

namespace hfur {

/// 8x8 coefficient blocks over a plane's block grid (row-major).
struct BlockArray {
  std::int64_t bh = 0, bw = 0;
  std::vector<std::array<double, 64>> blocks;

  std::array<double, 64>& at(std::int64_t by, std::int64_t bx) {
    return blocks[static_cast<std::size_t>(by * bw + bx)];
  }
  const std::array<double, 64>& at(std::int64_t by, std::int64_t bx) const {
    return blocks[static_cast<std::size_t>(by * bw + bx)];
  }
};

struct DegradedClip {
  std::vector<Frame> source;
  std::vector<Frame> degraded;           // clamped to [0,1]
  std::vector<Frame> degraded_preclamp;  // ground truth for the pixel-loss identity
  // Indexed [frame][plane].
  std::vector<std::vector<BlockArray>> theta, theta_q, xi, delta;
  std::vector<std::vector<std::vector<int>>> block_qp;  // [frame][plane][block]
  int qp = 0;
  QuantizationPrior prior_luma, prior_chroma;
};

namespace detail {

// Per-coefficient effective quantization step. Planes live in [0,1] but HEVC
// steps are defined against 8-bit sample amplitudes, hence the 1/255.
inline double effective_step(int qp, double table_entry) {
  return qp_step(qp) * table_entry / 16.0 / 255.0;
}

inline const DctBasis& basis8() {
  static const DctBasis b = make_dct_basis(8);
  return b;
}

}  // namespace detail

/// Quantizes every 8x8 block of every plane; retains all coefficient ground
/// truth. Plane dims must be multiples of 8. cbr_jitter > 0 draws a per-block
/// QP offset in [-j, j] (seeded), mimicking spatially varying QP.
inline DegradedClip degrade(const std::vector<Frame>& frames, int qp, const QuantizationPrior& prior_luma,
                            const QuantizationPrior& prior_chroma, int cbr_jitter = 0,
                            std::uint64_t seed = 0) {
  if (qp < 0 || qp > 51) throw ConfigError("degrade: qp " + std::to_string(qp) + " outside [0,51]");
  if (cbr_jitter < 0 || cbr_jitter > 10) {
    throw ConfigError("degrade: cbr_jitter " + std::to_string(cbr_jitter) + " outside [0,10]");
  }
  const DctBasis& basis = detail::basis8();
  DegradedClip clip;
  clip.qp = qp;
  clip.prior_luma = prior_luma;
  clip.prior_chroma = prior_chroma;
  clip.source = frames;
  std::mt19937_64 rng(seed);

  for (const Frame& f : frames) {
    Frame deg = f, pre = f;
    std::vector<BlockArray> th, thq, x, dl;
    std::vector<std::vector<int>> bqp;
    for (std::size_t pi = 0; pi < f.planes.size(); ++pi) {
      const Plane& plane = f.planes[pi];
      if (plane.w % 8 != 0 || plane.h % 8 != 0) {
        throw ContractError("degrade: plane " + std::to_string(pi) + " dims " + std::to_string(plane.w) +
                            "x" + std::to_string(plane.h) + " must be multiples of 8 (pad first)");
      }
      const QuantizationPrior& prior = pi == 0 ? prior_luma : prior_chroma;
      BlockArray a;
      a.bh = plane.h / 8;
      a.bw = plane.w / 8;
      a.blocks.resize(static_cast<std::size_t>(a.bh * a.bw));
      BlockArray aq = a, ax = a, ad = a;
      std::vector<int> qps(a.blocks.size(), qp);

      for (std::int64_t by = 0; by < a.bh; ++by)
        for (std::int64_t bx = 0; bx < a.bw; ++bx) {
          std::array<double, 64> pix{};
          for (std::int64_t x8 = 0; x8 < 8; ++x8)
            for (std::int64_t y8 = 0; y8 < 8; ++y8)
              pix[static_cast<std::size_t>(x8 * 8 + y8)] = plane.at(by * 8 + x8, bx * 8 + y8);

          std::array<double, 64>& coef = a.at(by, bx);
          for (std::int64_t r = 0; r < 64; ++r) {
            double acc = 0.0;
            for (std::int64_t c = 0; c < 64; ++c) acc += basis.fwd(r, c) * pix[static_cast<std::size_t>(c)];
            coef[static_cast<std::size_t>(r)] = acc;
          }

          int block_qp = qp;
          if (cbr_jitter > 0) {
            const int span = 2 * cbr_jitter + 1;
            block_qp = qp - cbr_jitter + static_cast<int>(rng() % static_cast<std::uint64_t>(span));
            block_qp = std::min(51, std::max(0, block_qp));
          }
          qps[static_cast<std::size_t>(by * a.bw + bx)] = block_qp;

          std::array<double, 64>& cq = aq.at(by, bx);
          std::array<double, 64>& cx = ax.at(by, bx);
          std::array<double, 64>& cd = ad.at(by, bx);
          for (std::int64_t u = 0; u < 8; ++u)
            for (std::int64_t v = 0; v < 8; ++v) {
              const std::size_t k = static_cast<std::size_t>(u * 8 + v);
              const double step = detail::effective_step(block_qp, prior.base(u, v));
              cq[k] = std::round(coef[k] / step) * step;  // ties away from zero
              cx[k] = coef[k] - cq[k];
              cd[k] = cx[k] / step;
            }

          std::array<double, 64> rec{};
          for (std::int64_t r = 0; r < 64; ++r) {
            double acc = 0.0;
            for (std::int64_t c = 0; c < 64; ++c) acc += basis.inv(r, c) * cq[static_cast<std::size_t>(c)];
            rec[static_cast<std::size_t>(r)] = acc;
          }
          for (std::int64_t x8 = 0; x8 < 8; ++x8)
            for (std::int64_t y8 = 0; y8 < 8; ++y8) {
              const double rv = rec[static_cast<std::size_t>(x8 * 8 + y8)];
              pre.planes[pi].at(by * 8 + x8, bx * 8 + y8) = rv;
              deg.planes[pi].at(by * 8 + x8, bx * 8 + y8) = std::min(1.0, std::max(0.0, rv));
            }
        }

      th.push_back(std::move(a));
      thq.push_back(std::move(aq));
      x.push_back(std::move(ax));
      dl.push_back(std::move(ad));
      bqp.push_back(std::move(qps));
    }
    clip.degraded.push_back(std::move(deg));
    clip.degraded_preclamp.push_back(std::move(pre));
    clip.theta.push_back(std::move(th));
    clip.theta_q.push_back(std::move(thq));
    clip.xi.push_back(std::move(x));
    clip.delta.push_back(std::move(dl));
    clip.block_qp.push_back(std::move(bqp));
  }
  return clip;
}

enum class SynthKind { kGradient, kChecker, kMovingEdge, kNoiseTexture };

inline SynthKind synth_kind_from_name(const std::string& name) {
  if (name == "gradient") return SynthKind::kGradient;
  if (name == "checker") return SynthKind::kChecker;
  if (name == "moving_edge") return SynthKind::kMovingEdge;
  if (name == "noise_texture") return SynthKind::kNoiseTexture;
  throw ConfigError("unknown synthetic clip kind '" + name + "'");
}

/// Deterministic luma clips; moving kinds translate 1 px/frame.
inline std::vector<Frame> synth_clip(SynthKind kind, int frames, std::int64_t w, std::int64_t h,
                                     std::uint64_t seed) {
  if (w % 8 != 0 || h % 8 != 0) {
    throw ContractError("synth_clip: dims " + std::to_string(w) + "x" + std::to_string(h) +
                        " must be multiples of 8");
  }
  if (frames < 1) throw ConfigError("synth_clip: need at least 1 frame");
  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(frames));

  switch (kind) {
    case SynthKind::kGradient: {
      Frame f = Frame::luma(w, h);
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          f.planes[0].at(y, x) = static_cast<double>(x + y) / static_cast<double>(w - 1 + h - 1);
      out.assign(static_cast<std::size_t>(frames), f);
      break;
    }
    case SynthKind::kChecker: {
      Frame f = Frame::luma(w, h);
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          f.planes[0].at(y, x) = ((x / 8 + y / 8) % 2 == 0) ? 0.2 : 0.8;
      out.assign(static_cast<std::size_t>(frames), f);
      break;
    }
    case SynthKind::kMovingEdge: {
      for (int t = 0; t < frames; ++t) {
        Frame f = Frame::luma(w, h);
        const std::int64_t edge = w / 3 + t;
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < w; ++x) f.planes[0].at(y, x) = x < edge ? 0.25 : 0.85;
        out.push_back(std::move(f));
      }
      break;
    }
    case SynthKind::kNoiseTexture: {
      // Wide shared field, cropped with a 1 px/frame horizontal shift so
      // frames are exact translations of one another.
      const std::int64_t fw = w + frames + 2;
      std::vector<double> field(static_cast<std::size_t>(fw * h));
      std::mt19937_64 rng(seed);
      for (auto& v : field) v = static_cast<double>(rng() >> 11) / 9007199254740992.0;  // [0,1)
      // Two smoothing passes keep some block-compressible structure.
      for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> sm = field;
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < fw; ++x) {
            double acc = 0.0;
            int cnt = 0;
            for (std::int64_t dy = -1; dy <= 1; ++dy)
              for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const std::int64_t yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= fw) continue;
                acc += field[static_cast<std::size_t>(yy * fw + xx)];
                ++cnt;
              }
            sm[static_cast<std::size_t>(y * fw + x)] = acc / cnt;
          }
        field.swap(sm);
      }
      for (int t = 0; t < frames; ++t) {
        Frame f = Frame::luma(w, h);
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < w; ++x)
            f.planes[0].at(y, x) = field[static_cast<std::size_t>(y * fw + x + t)];
        out.push_back(std::move(f));
      }
      break;
    }
  }
  return out;
}

}  // namespace hfur
