#pragma once

// Parameter checkpoints: 8-byte magic "HFURTNS1" followed by length-prefixed
// named-tensor records. Per record: u64 name length, UTF-8 name bytes, u64
// rank, u64 extents[rank], then raw f64 values. All integers and floats are
// little-endian. Round-trips are bit-exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hfur/tensor.hpp"

namespace hfur {

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline constexpr char kCheckpointMagic[8] = {'H', 'F', 'U', 'R', 'T', 'N', 'S', '1'};

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot write " + path);
  out.write(detail::kCheckpointMagic, 8);
  for (const auto& [name, t] : tensors) {
    detail::put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u64(out, static_cast<std::uint64_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) detail::put_u64(out, static_cast<std::uint64_t>(t.dim(d)));
    for (double v : t.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

inline std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) {
    throw IoError("load_checkpoint: " + path + " has bad magic (want HFURTNS1)");
  }
  std::map<std::string, Tensor> out;
  while (true) {
    const std::uint64_t name_len = detail::get_u64(in);
    if (in.eof()) break;
    if (!in || name_len > (1u << 20)) throw IoError("load_checkpoint: corrupt record in " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t rank = detail::get_u64(in);
    if (rank > 8) throw IoError("load_checkpoint: implausible rank in " + path);
    Shape shape(rank);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::int64_t>(detail::get_u64(in));
      numel *= d;
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (auto& v : data) v = std::bit_cast<double>(detail::get_u64(in));
    if (!in) throw IoError("load_checkpoint: truncated record '" + name + "' in " + path);
    out.emplace(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace hfur
