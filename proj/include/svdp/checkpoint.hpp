#pragma once

// Checkpoint layout (little-endian):
//   magic "SVDPCKPT" | u32 version | u32 record_count
//   per record: u32 name_len | name | u8 dtype (0 = f32, 1 = f64) | u32 rank |
//               u32 dims[rank] | row-major payload

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/params.hpp"

namespace svdp {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian hosts");

inline constexpr char kCheckpointMagic[8] = {'S', 'V', 'D', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename V>
void put(std::vector<std::uint8_t>& out, V v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(V));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename V>
  V get() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }

  void read(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
constexpr std::uint8_t dtype_code() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? 0 : 1;
}

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const ParamSet<T>& params) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put(out, kCheckpointVersion);
  detail::put(out, static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& [name, t] : params.tensors()) {
    detail::put(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put(out, detail::dtype_code<T>());
    detail::put(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) detail::put(out, static_cast<std::uint32_t>(d));
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.values.data());
    out.insert(out.end(), p, p + t.values.size() * sizeof(T));
  }
  return out;
}

/// Decodes a checkpoint; payloads stored in the other precision are converted.
template <typename T>
ParamSet<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::Reader r(bytes);
  char magic[8];
  r.read(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw IoError("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  ParamSet<T> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(name_len, '\0');
    r.read(name.data(), name_len);
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw IoError("checkpoint record '" + name + "' has unknown dtype");
    const auto rank = r.get<std::uint32_t>();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.get<std::uint32_t>());
    auto& t = params.add(name, shape);
    if (dtype == detail::dtype_code<T>()) {
      r.read(t.values.data(), t.values.size() * sizeof(T));
    } else if (dtype == 0) {
      for (auto& v : t.values) v = static_cast<T>(r.get<float>());
    } else {
      for (auto& v : t.values) v = static_cast<T>(r.get<double>());
    }
  }
  if (!r.done()) throw IoError("checkpoint has trailing bytes");
  if (!params.all_finite()) throw NumericalError("checkpoint contains non-finite values");
  return params;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

template <typename T>
void save_checkpoint(const ParamSet<T>& params, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(params));
}

template <typename T>
ParamSet<T> load_checkpoint(const std::string& path) {
  return decode_checkpoint<T>(read_file_bytes(path));
}

}  // namespace svdp
