#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "nvskit/denoiser.hpp"
#include "nvskit/io/json.hpp"

namespace nvskit::io {

// Layout (little-endian):
//   "NVSKCKPT" | u32 version | u64 config length | config JSON bytes
//   | u32 tensor count | per tensor: u32 name length, name, u32 rank,
//     i32 dims[rank], f32 values[prod(dims)]
inline constexpr char kCheckpointMagic[8] = {'N', 'V', 'S', 'K', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Json config;  ///< must contain "arch"; everything else is echoed verbatim
  Denoiser<float> net;
};

namespace detail {

template <class T>
void put(std::ostream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CheckpointError(std::string("truncated checkpoint at ") + what);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& p, const Denoiser<float>& net, Json config) {
  config["arch"] = arch_to_json(net.config());
  config["schema_version"] = kSchemaVersion;
  const std::string cfg = config.dump();
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream o(p, std::ios::binary);
  if (!o) throw CheckpointError("cannot write " + p.string());
  o.write(kCheckpointMagic, 8);
  detail::put(o, kCheckpointVersion);
  detail::put(o, static_cast<std::uint64_t>(cfg.size()));
  o.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  detail::put(o, static_cast<std::uint32_t>(net.params().size()));
  for (const auto& prm : net.params()) {
    detail::put(o, static_cast<std::uint32_t>(prm.name.size()));
    o.write(prm.name.data(), static_cast<std::streamsize>(prm.name.size()));
    detail::put(o, static_cast<std::uint32_t>(prm.shape.size()));
    for (int d : prm.shape) detail::put(o, static_cast<std::int32_t>(d));
    o.write(reinterpret_cast<const char*>(prm.value.data()),
            static_cast<std::streamsize>(prm.value.size() * sizeof(float)));
  }
  if (!o) throw CheckpointError("write failed for " + p.string());
}

/// Rebuilds the network from the stored architecture and checks that every
/// tensor name and shape matches it.
inline Checkpoint load_checkpoint(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + p.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw CheckpointError(p.string() + " is not an nvskit checkpoint");
  const auto version = detail::take<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto len = detail::take<std::uint64_t>(in, "config length");
  if (len > (1u << 26)) throw CheckpointError("implausible config length");
  std::string cfg(len, '\0');
  if (!in.read(cfg.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint config");
  Json config;
  try {
    config = Json::parse(cfg);
  } catch (const Json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  Checkpoint ck{config, Denoiser<float>(arch_from_json(field(config, "arch", "checkpoint")))};
  auto& ps = ck.net.params();
  const auto count = detail::take<std::uint32_t>(in, "tensor count");
  if (count != ps.size()) throw CheckpointError("checkpoint tensor count does not match the architecture");
  for (std::size_t i = 0; i < count; ++i) {
    auto& prm = ps[i];
    const auto nlen = detail::take<std::uint32_t>(in, "name length");
    if (nlen > 4096) throw CheckpointError("implausible tensor name length");
    std::string name(nlen, '\0');
    if (!in.read(name.data(), nlen)) throw CheckpointError("truncated tensor name");
    if (name != prm.name) throw CheckpointError("unexpected tensor '" + name + "', expected '" + prm.name + "'");
    const auto rank = detail::take<std::uint32_t>(in, "rank");
    if (rank != prm.shape.size()) throw CheckpointError("rank mismatch for " + name);
    for (std::uint32_t d = 0; d < rank; ++d)
      if (detail::take<std::int32_t>(in, "dims") != prm.shape[d]) throw CheckpointError("shape mismatch for " + name);
    if (!in.read(reinterpret_cast<char*>(prm.value.data()),
                 static_cast<std::streamsize>(prm.value.size() * sizeof(float))))
      throw CheckpointError("truncated values for " + name);
  }
  return ck;
}

}  // namespace nvskit::io
