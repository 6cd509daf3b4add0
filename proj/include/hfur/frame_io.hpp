#pragma once

// Frame I/O: binary PGM (P5) sequences with zero-padded indices, raw planar
// YUV (I420), and flat f64 dumps for ground-truth sidecars.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hfur/frame.hpp"

namespace hfur {

namespace detail {

inline std::uint8_t to_byte(double v) {
  const double c = std::min(1.0, std::max(0.0, v));
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

inline int pgm_token(std::istream& in) {
  // Skips whitespace and '#' comment lines between header tokens.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) return -1;
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  return value;
}

}  // namespace detail

inline void write_pgm(const std::string& path, const Plane& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm: cannot write " + path);
  out << "P5\n" << p.w << " " << p.h << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(p.w));
  for (std::int64_t y = 0; y < p.h; ++y) {
    for (std::int64_t x = 0; x < p.w; ++x) row[static_cast<std::size_t>(x)] = detail::to_byte(p.at(y, x));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

inline Plane read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_pgm: cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw IoError("read_pgm: " + path + " has bad magic (want P5)");
  const int w = detail::pgm_token(in);
  const int h = detail::pgm_token(in);
  const int maxval = detail::pgm_token(in);
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw IoError("read_pgm: " + path + " has unsupported header (need maxval 255)");
  }
  Plane p(w, h);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw IoError("read_pgm: " + path + " truncated, got " + std::to_string(in.gcount()) +
                  " payload bytes, expected " + std::to_string(buf.size()));
  }
  for (std::size_t i = 0; i < buf.size(); ++i) p.v[i] = static_cast<double>(buf[i]) / 255.0;
  return p;
}

inline std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.pgm", index);
  return buf;
}

inline void write_pgm_sequence(const std::string& dir, const std::vector<Frame>& frames) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].planes.size() != 1) {
      throw ContractError("write_pgm_sequence: PGM stores single-plane frames, frame " +
                          std::to_string(i) + " has " + std::to_string(frames[i].planes.size()));
    }
    write_pgm((std::filesystem::path(dir) / frame_file_name(static_cast<int>(i))).string(),
              frames[i].planes[0]);
  }
}

inline std::vector<Frame> read_pgm_sequence(const std::string& dir) {
  std::vector<std::string> files;
  if (!std::filesystem::is_directory(dir)) throw IoError("read_pgm_sequence: no directory " + dir);
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".pgm") files.push_back(e.path().string());
  }
  if (files.empty()) throw IoError("read_pgm_sequence: no .pgm files in " + dir);
  std::sort(files.begin(), files.end());
  std::vector<Frame> frames;
  for (const auto& f : files) {
    Plane p = read_pgm(f);
    Frame fr;
    fr.width = p.w;
    fr.height = p.h;
    fr.planes.push_back(std::move(p));
    frames.push_back(std::move(fr));
  }
  return frames;
}

/// Raw planar I420: per frame Y (w*h), Cb and Cr (w/2 * h/2), 8-bit.
inline void write_yuv(const std::string& path, const std::vector<Frame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_yuv: cannot write " + path);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    if (f.planes.size() != 3) {
      throw ContractError("write_yuv: frame " + std::to_string(i) + " has " +
                          std::to_string(f.planes.size()) + " planes, I420 needs 3");
    }
    for (const Plane& p : f.planes) {
      std::vector<std::uint8_t> buf(p.v.size());
      for (std::size_t k = 0; k < p.v.size(); ++k) buf[k] = detail::to_byte(p.v[k]);
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
  }
}

inline std::vector<Frame> read_yuv(const std::string& path, std::int64_t w, std::int64_t h) {
  if (w <= 0 || h <= 0 || w % 2 != 0 || h % 2 != 0) {
    throw ConfigError("read_yuv: dims " + std::to_string(w) + "x" + std::to_string(h) +
                      " must be positive and even for I420");
  }
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("read_yuv: cannot open " + path);
  const std::int64_t size = static_cast<std::int64_t>(in.tellg());
  const std::int64_t frame_bytes = w * h * 3 / 2;
  if (size % frame_bytes != 0) {
    throw IoError("read_yuv: " + path + " holds " + std::to_string(size) + " bytes, not a multiple of " +
                  std::to_string(frame_bytes) + " (one " + std::to_string(w) + "x" + std::to_string(h) +
                  " I420 frame)");
  }
  in.seekg(0);
  const std::int64_t n = size / frame_bytes;
  std::vector<Frame> frames;
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(frame_bytes));
  for (std::int64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), frame_bytes);
    Frame f;
    f.width = w;
    f.height = h;
    f.planes = {Plane(w, h), Plane(w / 2, h / 2), Plane(w / 2, h / 2)};
    std::size_t off = 0;
    for (Plane& p : f.planes) {
      for (std::size_t k = 0; k < p.v.size(); ++k) p.v[k] = static_cast<double>(buf[off + k]) / 255.0;
      off += p.v.size();
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

inline void dump_f64(const std::string& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("dump_f64: cannot write " + path);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

inline std::vector<double> load_f64(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("load_f64: cannot open " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(double) != 0) throw IoError("load_f64: " + path + " size not a multiple of 8");
  in.seekg(0);
  std::vector<double> v(bytes / sizeof(double));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  return v;
}

}  // namespace hfur
