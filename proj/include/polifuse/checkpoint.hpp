#ifndef POLIFUSE_CHECKPOINT_HPP_
#define POLIFUSE_CHECKPOINT_HPP_

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "polifuse/common.hpp"
#include "polifuse/params.hpp"

namespace polifuse {

// Checkpoint container: an 8-byte magic, a little-endian u32 format version, a
// little-endian u64 JSON header length, the header bytes, then the raw tensor
// payloads. Tensors are row-major float32 little-endian at the offsets the
// header declares (relative to the end of the header).
inline constexpr char kCheckpointMagic[8] = {'P', 'F', 'C', 'H', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

inline float get_f32(const std::string& in, std::size_t at) {
  std::uint32_t bits = get_u32(in, at);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace detail

// Serializes all parameters plus a free-form config object. Float64 parameter
// sets are narrowed to float32 on write.
template <typename S>
std::string serialize_checkpoint(const ParameterSet<S>& params,
                                 const nlohmann::json& config = nlohmann::json::object()) {
  nlohmann::json header;
  header["params"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, e] : params.entries()) {
    header["params"].push_back({{"name", name},
                                {"rows", e.value.rows()},
                                {"cols", e.value.cols()},
                                {"offset", offset}});
    offset += static_cast<std::uint64_t>(e.value.size()) * 4;
  }
  header["config"] = config;
  const std::string hbytes = header.dump();

  std::string out;
  out.reserve(8 + 4 + 8 + hbytes.size() + offset);
  out.append(kCheckpointMagic, 8);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, hbytes.size());
  out += hbytes;
  for (const auto& [name, e] : params.entries())
    for (Eigen::Index r = 0; r < e.value.rows(); ++r)
      for (Eigen::Index c = 0; c < e.value.cols(); ++c)
        detail::put_f32(out, static_cast<float>(e.value(r, c)));
  return out;
}

template <typename S>
nlohmann::json deserialize_checkpoint(const std::string& bytes, ParameterSet<S>& params) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw ValidationError("checkpoint: bad magic");
  const std::uint32_t version = detail::get_u32(bytes, 8);
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t hlen = detail::get_u64(bytes, 12);
  if (20 + hlen > bytes.size()) throw ValidationError("checkpoint: truncated header");
  nlohmann::json header = nlohmann::json::parse(bytes.substr(20, hlen), nullptr, false);
  if (header.is_discarded() || !header.contains("params"))
    throw ValidationError("checkpoint: malformed header");
  const std::size_t base = 20 + hlen;
  for (const auto& p : header["params"]) {
    const std::string name = p.at("name").get<std::string>();
    const Eigen::Index rows = p.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = p.at("cols").get<Eigen::Index>();
    const std::uint64_t offset = p.at("offset").get<std::uint64_t>();
    const std::size_t need = base + offset + static_cast<std::size_t>(rows) * cols * 4;
    if (need > bytes.size()) throw ValidationError("checkpoint: truncated payload for " + name);
    auto& m = params.get_or_create(name, rows, cols, [](MatrixX<S>& v) { v.setZero(); });
    std::size_t at = base + offset;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c, at += 4)
        m(r, c) = static_cast<S>(detail::get_f32(bytes, at));
  }
  return header.contains("config") ? header["config"] : nlohmann::json::object();
}

template <typename S>
void save_checkpoint(const std::string& path, const ParameterSet<S>& params,
                     const nlohmann::json& config = nlohmann::json::object()) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("checkpoint: cannot open " + path + " for writing");
  const std::string bytes = serialize_checkpoint(params, config);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: short write to " + path);
}

template <typename S>
nlohmann::json load_checkpoint(const std::string& path, ParameterSet<S>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, params);
}

}  // namespace polifuse

#endif  // POLIFUSE_CHECKPOINT_HPP_
