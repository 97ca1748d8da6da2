#include "recapdet/checkpoint.hpp"

#include <cstdio>
#include <cstring>

namespace recapdet {

// Checkpoint byte layout, version 1. All integers and floats little-endian.
//
//   offset size  field
//   0      4     magic "RCKP"
//   4      4     u32 version = 1
//   8      8     u64 config hash (FNV-1a over the canonical config JSON)
//   16     4     u32 config JSON length L
//   20     L     config JSON bytes (UTF-8)
//   ...    4     u32 entry count
//   per entry:
//          4     u32 name length N
//          N     name bytes
//          4     u32 rank R
//          4*R   u32 dimensions
//          4*prod(dims) float32 values, row-major
//
// Values are stored at 32 bits regardless of the training precision.

namespace {

constexpr char kMagic[4] = {'R', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::vector<std::uint8_t> buf;
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void f32(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
  }
};

struct Reader {
  const std::uint8_t* p;
  const std::uint8_t* end;
  const std::string& path;
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n) throw IoError("truncated checkpoint " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                      (static_cast<std::uint32_t>(p[2]) << 16) |
                      (static_cast<std::uint32_t>(p[3]) << 24);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    p += 8;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u64(ckpt.config_hash);
  w.u32(static_cast<std::uint32_t>(ckpt.config_json.size()));
  w.bytes(ckpt.config_json.data(), ckpt.config_json.size());
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    std::size_t numel = 1;
    for (int d : e.shape) {
      w.u32(static_cast<std::uint32_t>(d));
      numel *= static_cast<std::size_t>(d);
    }
    if (numel != e.values.size())
      throw IoError("checkpoint entry " + e.name + ": shape/value count mismatch");
    for (float f : e.values) w.f32(f);
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open " + path);
  const bool ok = std::fwrite(w.buf.data(), 1, w.buf.size(), f) == w.buf.size();
  std::fclose(f);
  if (!ok) throw IoError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  const long len = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(len));
  const bool ok = std::fread(buf.data(), 1, buf.size(), f) == buf.size();
  std::fclose(f);
  if (!ok || buf.size() < 20) throw IoError("truncated checkpoint " + path);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw IoError("bad magic in " + path);

  Reader r{buf.data() + 4, buf.data() + buf.size(), path};
  if (r.u32() != kVersion) throw IoError("unsupported checkpoint version in " + path);
  Checkpoint ckpt;
  ckpt.config_hash = r.u64();
  const std::uint32_t json_len = r.u32();
  r.need(json_len);
  ckpt.config_json.assign(reinterpret_cast<const char*>(r.p), json_len);
  r.p += json_len;
  const std::uint32_t n_entries = r.u32();
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    CheckpointEntry e;
    const std::uint32_t name_len = r.u32();
    r.need(name_len);
    e.name.assign(reinterpret_cast<const char*>(r.p), name_len);
    r.p += name_len;
    const std::uint32_t rank = r.u32();
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.shape.push_back(static_cast<int>(r.u32()));
      numel *= static_cast<std::size_t>(e.shape.back());
    }
    e.values.reserve(numel);
    for (std::size_t v = 0; v < numel; ++v) e.values.push_back(r.f32());
    ckpt.entries.push_back(std::move(e));
  }
  if (fnv1a(ckpt.config_json) != ckpt.config_hash)
    throw IoError("checkpoint config hash mismatch in " + path);
  return ckpt;
}

}  // namespace recapdet
