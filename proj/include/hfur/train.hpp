#pragma once

// Training loop: random crops with rotation/flip augmentation, Charbonnier
// objective, Adam with cosine-annealed learning rate. Deterministic for a
// fixed seed (single RNG, fixed draw order, single-threaded).

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hfur/net.hpp"

namespace hfur {

/// Cosine annealing from lr_init (step 0) to lr_min (final step).
inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_init, double lr_min) {
  if (total_steps <= 1) return lr_init;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(detail::kPi * t));
}

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<std::pair<std::string, Tensor>> params, double beta1, double beta2,
                double eps)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].second.data().size(), 0.0);
      v_[i].assign(params_[i].second.data().size(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i].second;
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      auto& d = p.data();
      for (std::size_t k = 0; k < d.size(); ++k) {
        m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
        v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
        d[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
      }
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

struct TrainLogRow {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double val_dpsnr = 0.0;
  bool has_val = false;
};

namespace detail {

inline std::uint64_t rand_below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

// Rotation k * 90deg then optional flips, applied to a square patch.
struct Augment {
  int rot = 0;
  bool flip_h = false, flip_v = false;
};

inline void apply_augment(const Augment& a, std::int64_t n, std::vector<double>& patch) {
  std::vector<double> tmp(patch.size());
  for (int r = 0; r < a.rot; ++r) {
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t x = 0; x < n; ++x)
        tmp[static_cast<std::size_t>(x * n + (n - 1 - y))] = patch[static_cast<std::size_t>(y * n + x)];
    patch.swap(tmp);
  }
  if (a.flip_h) {
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t x = 0; x < n / 2; ++x)
        std::swap(patch[static_cast<std::size_t>(y * n + x)],
                  patch[static_cast<std::size_t>(y * n + (n - 1 - x))]);
  }
  if (a.flip_v) {
    for (std::int64_t y = 0; y < n / 2; ++y)
      for (std::int64_t x = 0; x < n; ++x)
        std::swap(patch[static_cast<std::size_t>(y * n + x)],
                  patch[static_cast<std::size_t>((n - 1 - y) * n + x)]);
  }
}

inline void crop_plane(const Plane& p, std::int64_t oy, std::int64_t ox, std::int64_t n,
                       std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(n * n));
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) out[static_cast<std::size_t>(y * n + x)] = p.at(oy + y, ox + x);
}

}  // namespace detail

/// Runs the optimizer loop over the given clips; the callback (if any) sees
/// every log row as it is produced.
inline std::vector<TrainLogRow> train(HfurParams& params, const std::vector<DegradedClip>& clips,
                                      const TrainConfig& tc,
                                      const std::function<void(const TrainLogRow&)>& on_row = {}) {
  tc.validate();
  if (clips.empty()) throw ContractError("train: empty dataset");
  const NetworkConfig& cfg = params.cfg;
  const std::int64_t T = cfg.temporal_window;
  const std::int64_t P = cfg.planes;
  for (const DegradedClip& c : clips) {
    if (static_cast<std::int64_t>(c.degraded.size()) < T) {
      throw ContractError("train: clip shorter than temporal window");
    }
    const Plane& pl = c.degraded[0].planes[0];
    if (pl.w < tc.crop || pl.h < tc.crop) {
      throw ContractError("train: crop " + std::to_string(tc.crop) + " larger than frames " +
                          std::to_string(pl.w) + "x" + std::to_string(pl.h));
    }
    if (static_cast<std::int64_t>(c.degraded[0].planes.size()) != P) {
      throw ContractError("train: clip plane count does not match network config");
    }
  }

  std::mt19937_64 rng(tc.seed);
  AdamOptimizer opt(named_params(params), tc.beta1, tc.beta2, tc.adam_eps);
  std::vector<TrainLogRow> log;
  log.reserve(static_cast<std::size_t>(tc.steps));

  std::vector<double> patch;
  for (std::int64_t step = 0; step < tc.steps; ++step) {
    const double lr = cosine_lr(step, tc.steps, tc.lr_init, tc.lr_min());

    const std::int64_t crop = tc.crop;
    // One clip per step so the whole batch shares its quantization priors.
    const DegradedClip& clip = clips[detail::rand_below(rng, clips.size())];
    Tensor input = Tensor::zeros({tc.batch, T, P, crop, crop});
    Tensor target = Tensor::zeros({tc.batch, P, crop, crop});
    for (std::int64_t b = 0; b < tc.batch; ++b) {
      const std::int64_t frames = static_cast<std::int64_t>(clip.degraded.size());
      const std::int64_t center = T / 2 + static_cast<std::int64_t>(detail::rand_below(
                                              rng, static_cast<std::uint64_t>(frames - T + 1)));
      const Plane& pl0 = clip.degraded[0].planes[0];
      // Crop origins on the 8-grid so patches align with the codec blocks.
      const std::int64_t oy = 8 * static_cast<std::int64_t>(detail::rand_below(
                                      rng, static_cast<std::uint64_t>((pl0.h - crop) / 8 + 1)));
      const std::int64_t ox = 8 * static_cast<std::int64_t>(detail::rand_below(
                                      rng, static_cast<std::uint64_t>((pl0.w - crop) / 8 + 1)));
      detail::Augment aug;
      if (tc.augment) {
        aug.rot = static_cast<int>(detail::rand_below(rng, 4));
        aug.flip_h = detail::rand_below(rng, 2) != 0;
        aug.flip_v = detail::rand_below(rng, 2) != 0;
      }
      for (std::int64_t i = 0; i < T; ++i) {
        const Frame& f = clip.degraded[static_cast<std::size_t>(center - T / 2 + i)];
        for (std::int64_t pidx = 0; pidx < P; ++pidx) {
          detail::crop_plane(f.planes[static_cast<std::size_t>(pidx)], oy, ox, crop, patch);
          detail::apply_augment(aug, crop, patch);
          std::copy(patch.begin(), patch.end(),
                    input.data().begin() + (((b * T + i) * P + pidx) * crop) * crop);
        }
      }
      const Frame& src = clip.source[static_cast<std::size_t>(center)];
      for (std::int64_t pidx = 0; pidx < P; ++pidx) {
        detail::crop_plane(src.planes[static_cast<std::size_t>(pidx)], oy, ox, crop, patch);
        detail::apply_augment(aug, crop, patch);
        std::copy(patch.begin(), patch.end(),
                  target.data().begin() + ((b * P + pidx) * crop) * crop);
      }
    }

    PriorPair priors{clip.prior_luma, clip.prior_chroma};
    Tensor pred = hfur_forward(input, params, priors, /*training=*/true);
    Tensor loss = charbonnier_loss(pred, target, tc.charbonnier_eps);
    backward(loss);
    opt.step(lr);
    opt.zero_grad();

    TrainLogRow row;
    row.step = step;
    row.lr = lr;
    row.loss = loss.value();
    if (tc.val_interval > 0 && (step + 1) % tc.val_interval == 0) {
      double acc = 0.0;
      for (const DegradedClip& c : clips) {
        PriorPair cp{c.prior_luma, c.prior_chroma};
        acc += clip_dpsnr(params, cp, c);
      }
      row.val_dpsnr = acc / static_cast<double>(clips.size());
      row.has_val = true;
    }
    log.push_back(row);
    if (on_row) on_row(row);
  }
  return log;
}

}  // namespace hfur
