#pragma once

// Frames (1-plane luma or 3-plane YCbCr, values in [0,1]) and quality metrics.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hfur/errors.hpp"

namespace hfur {

struct Plane {
  std::int64_t w = 0, h = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(std::int64_t width, std::int64_t height, double fill = 0.0)
      : w(width), h(height), v(static_cast<std::size_t>(width * height), fill) {}

  double& at(std::int64_t y, std::int64_t x) { return v[static_cast<std::size_t>(y * w + x)]; }
  double at(std::int64_t y, std::int64_t x) const { return v[static_cast<std::size_t>(y * w + x)]; }
};

struct Frame {
  std::int64_t width = 0, height = 0;
  std::vector<Plane> planes;

  static Frame luma(std::int64_t w, std::int64_t h, double fill = 0.0) {
    Frame f;
    f.width = w;
    f.height = h;
    f.planes.emplace_back(w, h, fill);
    return f;
  }
};

inline constexpr double kPsnrCap = 99.0;

inline double psnr(const Frame& a, const Frame& b, double peak = 1.0) {
  if (a.planes.size() != b.planes.size()) {
    throw ShapeError("psnr: plane counts differ, " + std::to_string(a.planes.size()) + " vs " +
                     std::to_string(b.planes.size()));
  }
  double se = 0.0;
  std::int64_t n = 0;
  for (std::size_t p = 0; p < a.planes.size(); ++p) {
    const Plane& pa = a.planes[p];
    const Plane& pb = b.planes[p];
    if (pa.w != pb.w || pa.h != pb.h) {
      throw ShapeError("psnr: plane " + std::to_string(p) + " dims " + std::to_string(pa.w) + "x" +
                       std::to_string(pa.h) + " vs " + std::to_string(pb.w) + "x" + std::to_string(pb.h));
    }
    for (std::size_t i = 0; i < pa.v.size(); ++i) {
      const double d = pa.v[i] - pb.v[i];
      se += d * d;
    }
    n += pa.w * pa.h;
  }
  const double mse = se / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

inline double delta_psnr(const Frame& source, const Frame& degraded, const Frame& enhanced) {
  return psnr(source, enhanced) - psnr(source, degraded);
}

/// Population standard deviation of per-frame PSNR values.
inline double psnr_sd(const std::vector<double>& per_frame_psnr) {
  if (per_frame_psnr.size() < 2) {
    throw ContractError("psnr_sd: need at least 2 frames, got " + std::to_string(per_frame_psnr.size()));
  }
  double mu = 0.0;
  for (double v : per_frame_psnr) mu += v;
  mu /= static_cast<double>(per_frame_psnr.size());
  double var = 0.0;
  for (double v : per_frame_psnr) var += (v - mu) * (v - mu);
  var /= static_cast<double>(per_frame_psnr.size());
  return std::sqrt(var);
}

}  // namespace hfur
