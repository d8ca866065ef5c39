#pragma once

// EMTN1 tensor files: "EMTN", version byte 0x01, u32 LE rank, rank u32 LE
// dims, then row-major f64 LE payload.

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "advm/error.hpp"
#include "advm/tensor.hpp"

namespace advm {

inline constexpr std::array<char, 4> kEmtnMagic{'E', 'M', 'T', 'N'};
inline constexpr std::uint8_t kEmtnVersion = 0x01;

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_emtn(const RawTensor& t) {
  std::size_t count = 1;
  for (auto d : t.dims) count *= d;
  if (count != t.data.size()) throw Error(Errc::shape_mismatch, "EMTN payload does not match dims");
  std::string out(kEmtnMagic.begin(), kEmtnMagic.end());
  out.push_back(static_cast<char>(kEmtnVersion));
  detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_u32(out, d);
  for (double v : t.data) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline RawTensor decode_emtn(const std::string& bytes) {
  if (bytes.size() < 9 || !std::equal(kEmtnMagic.begin(), kEmtnMagic.end(), bytes.begin()))
    throw Error(Errc::corrupt_file, "missing EMTN header");
  if (static_cast<std::uint8_t>(bytes[4]) != kEmtnVersion)
    throw Error(Errc::version_mismatch, "EMTN version " + std::to_string(static_cast<unsigned char>(bytes[4])));
  const auto rank = static_cast<std::size_t>(detail::get_le(bytes, 5, 4));
  std::size_t pos = 9;
  if (rank > 16 || bytes.size() < pos + 4 * rank) throw Error(Errc::corrupt_file, "truncated EMTN dims");
  RawTensor t;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, pos += 4) {
    t.dims.push_back(static_cast<std::uint32_t>(detail::get_le(bytes, pos, 4)));
    count *= t.dims.back();
  }
  if (bytes.size() != pos + 8 * count) throw Error(Errc::corrupt_file, "EMTN payload length mismatch");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i, pos += 8)
    t.data[i] = std::bit_cast<double>(detail::get_le(bytes, pos, 8));
  return t;
}

inline RawTensor to_raw(const Tensor& t) {
  const auto& s = t.shape();
  return {{static_cast<std::uint32_t>(s.height), static_cast<std::uint32_t>(s.width),
           static_cast<std::uint32_t>(s.channels)},
          t.values()};
}

inline Tensor from_raw(RawTensor raw) {
  if (raw.dims.size() != 3) throw Error(Errc::shape_mismatch, "image tensors are rank 3");
  return Tensor(Shape{raw.dims[0], raw.dims[1], raw.dims[2]}, std::move(raw.data));
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "short write to " + path.string());
}

inline void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_bytes(path, encode_emtn(to_raw(t)));
}

inline Tensor load_tensor(const std::filesystem::path& path) {
  return from_raw(decode_emtn(read_file_bytes(path)));
}

}  // namespace advm
