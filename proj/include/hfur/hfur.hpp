#pragma once

#include "hfur/checkpoint.hpp"
#include "hfur/codec_sim.hpp"
#include "hfur/dct.hpp"
#include "hfur/errors.hpp"
#include "hfur/frame.hpp"
#include "hfur/frame_io.hpp"
#include "hfur/hir.hpp"
#include "hfur/impfrequp.hpp"
#include "hfur/net.hpp"
#include "hfur/ops.hpp"
#include "hfur/tensor.hpp"
#include "hfur/train.hpp"

namespace hfur {

/// Per-sequence target bitrate scaled from a base configuration (30 fps at
/// 960x536) linearly in frame rate and pixel count.
inline double scaled_bitrate(double test_rate_fps, std::int64_t w, std::int64_t h, double base_kbps) {
  if (!(test_rate_fps > 0.0) || w <= 0 || h <= 0 || !(base_kbps > 0.0)) {
    throw ConfigError("scaled_bitrate: all arguments must be positive");
  }
  return test_rate_fps * static_cast<double>(w) * static_cast<double>(h) /
         (30.0 * 960.0 * 536.0) * base_kbps;
}

}  // namespace hfur
