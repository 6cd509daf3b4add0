#pragma once

// Deterministic frequency-domain matrices: orthonormal 2-D block DCT bases,
// standard and fractional-sampling inverse DCT matrices, and quantization
// tables with their nearest-duplicated upsampling.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hfur/errors.hpp"

namespace hfur {

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;

// IDCT cosine kernel evaluated at (possibly fractional) spatial coordinates.
inline double idct_kernel(std::int64_t n, double x, double y, std::int64_t u, std::int64_t v) {
  const double au = u == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
  const double av = v == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
  const double cu = std::cos((2.0 * x + 1.0) * static_cast<double>(u) * kPi / (2.0 * static_cast<double>(n)));
  const double cv = std::cos((2.0 * y + 1.0) * static_cast<double>(v) * kPi / (2.0 * static_cast<double>(n)));
  return au * av * cu * cv;
}

}  // namespace detail

/// Orthonormal 2-D DCT for N_p x N_p blocks, as (N_p^2, N_p^2) matrices over
/// row-major vectorized blocks. Row of `forward` = frequency (u*N_p+v),
/// column = spatial (x*N_p+y); `inverse` is the transpose.
struct DctBasis {
  std::int64_t block_size = 0;
  std::vector<double> forward;
  std::vector<double> inverse;

  double fwd(std::int64_t row, std::int64_t col) const { return forward[row * block_size * block_size + col]; }
  double inv(std::int64_t row, std::int64_t col) const { return inverse[row * block_size * block_size + col]; }
};

inline DctBasis make_dct_basis(std::int64_t n) {
  if (n < 1) throw ConfigError("make_dct_basis: block size must be >= 1, got " + std::to_string(n));
  DctBasis b;
  b.block_size = n;
  const std::int64_t nn = n * n;
  b.inverse.resize(static_cast<std::size_t>(nn * nn));
  b.forward.resize(static_cast<std::size_t>(nn * nn));
  for (std::int64_t x = 0; x < n; ++x)
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t u = 0; u < n; ++u)
        for (std::int64_t v = 0; v < n; ++v) {
          const double e = detail::idct_kernel(n, static_cast<double>(x), static_cast<double>(y), u, v);
          b.inverse[static_cast<std::size_t>((x * n + y) * nn + (u * n + v))] = e;
          b.forward[static_cast<std::size_t>((u * n + v) * nn + (x * n + y))] = e;
        }
  return b;
}

/// IDCT sampled on a `factor`-times finer spatial grid: shape
/// ((factor*N_p)^2, N_p^2). Fine row index is x_f*(factor*N_p)+y_f with
/// x_f = 2x+i interleaving the -0.25 / +0.25 offsets (i = 0 / 1); factor 1
/// reduces bit-exactly to the classic inverse.
struct FractionalIdctMatrix {
  std::int64_t block_size = 0;
  std::int64_t factor = 1;
  std::vector<double> matrix;

  std::int64_t rows() const { return factor * block_size * factor * block_size; }
  std::int64_t cols() const { return block_size * block_size; }
  double at(std::int64_t r, std::int64_t c) const { return matrix[r * cols() + c]; }
};

inline FractionalIdctMatrix make_fractional_idct(std::int64_t n, std::int64_t factor) {
  if (n < 1) throw ConfigError("make_fractional_idct: block size must be >= 1, got " + std::to_string(n));
  if (factor != 1 && factor != 2) {
    throw ConfigError("make_fractional_idct: unsupported factor " + std::to_string(factor) +
                      " (expected 1 or 2)");
  }
  FractionalIdctMatrix m;
  m.block_size = n;
  m.factor = factor;
  const std::int64_t fn = factor * n;
  const std::int64_t nn = n * n;
  m.matrix.resize(static_cast<std::size_t>(fn * fn * nn));
  for (std::int64_t xf = 0; xf < fn; ++xf) {
    const double x = factor == 1 ? static_cast<double>(xf) : 0.5 * static_cast<double>(xf) - 0.25;
    for (std::int64_t yf = 0; yf < fn; ++yf) {
      const double y = factor == 1 ? static_cast<double>(yf) : 0.5 * static_cast<double>(yf) - 0.25;
      for (std::int64_t u = 0; u < n; ++u)
        for (std::int64_t v = 0; v < n; ++v) {
          m.matrix[static_cast<std::size_t>((xf * fn + yf) * nn + (u * n + v))] =
              detail::idct_kernel(n, x, y, u, v);
        }
    }
  }
  return m;
}

/// HEVC quantization step-size growth law: one doubling per +6 QP.
inline double qp_step(int qp) {
  if (qp < 0 || qp > 51) throw ConfigError("qp_step: qp " + std::to_string(qp) + " outside [0,51]");
  return std::pow(2.0, (static_cast<double>(qp) - 4.0) / 6.0);
}

enum class ChannelKind { kLuma, kChroma };

/// 8x8 base quantization table plus its nearest-duplicated 16x16 upsampling.
struct QuantizationPrior {
  std::array<double, 64> t_base{};
  std::array<double, 256> t_up{};
  int qp = 0;
  ChannelKind channel_kind = ChannelKind::kLuma;

  double base(std::int64_t u, std::int64_t v) const { return t_base[static_cast<std::size_t>(u * 8 + v)]; }
  double up(std::int64_t u, std::int64_t v) const { return t_up[static_cast<std::size_t>(u * 16 + v)]; }
};

/// Parses a table file: 64 positive numbers, conventionally 8 lines of 8.
inline std::array<double, 64> load_quant_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_quant_table: cannot open " + path);
  std::array<double, 64> t{};
  std::size_t count = 0;
  double v;
  while (in >> v) {
    if (count < 64) t[count] = v;
    ++count;
  }
  if (count != 64) {
    throw IoError("load_quant_table: " + path + " holds " + std::to_string(count) +
                  " numbers, expected exactly 64");
  }
  for (double e : t) {
    if (!(e > 0.0)) throw IoError("load_quant_table: " + path + " contains non-positive entry");
  }
  return t;
}

inline void save_quant_table(const std::string& path, const std::array<double, 64>& t) {
  std::ofstream out(path);
  if (!out) throw IoError("save_quant_table: cannot write " + path);
  out.precision(17);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) out << (c ? " " : "") << t[static_cast<std::size_t>(r * 8 + c)];
    out << "\n";
  }
}

inline QuantizationPrior make_quant_prior(int qp, ChannelKind kind,
                                          const std::string& table_file = "") {
  if (qp < 0 || qp > 51) throw ConfigError("make_quant_prior: qp " + std::to_string(qp) + " outside [0,51]");
  QuantizationPrior p;
  p.qp = qp;
  p.channel_kind = kind;
  if (table_file.empty()) {
    p.t_base.fill(16.0);  // flat default: HEVC scaling lists disabled
  } else {
    p.t_base = load_quant_table(table_file);
  }
  for (std::int64_t u = 0; u < 8; ++u)
    for (std::int64_t v = 0; v < 8; ++v) {
      const double b = p.t_base[static_cast<std::size_t>(u * 8 + v)];
      for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 2; ++j)
          p.t_up[static_cast<std::size_t>((2 * u + i) * 16 + (2 * v + j))] = b;
    }
  return p;
}

}  // namespace hfur
