#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <vector>

#include "recapdet/errors.hpp"
#include "recapdet/filterbank.hpp"

namespace recapdet {

// Band file layout (all integers little-endian):
//   bytes 0..3   magic "RBND"
//   bytes 4..7   u32 version (1)
//   bytes 8..11  u32 n (side length)
//   bytes 12..15 u32 k (band threshold)
//   bytes 16..23 u64 source content hash
//   then 3*n*n float32 values, channel-major (low plane, mid plane, high
//   plane), each plane row-major.
// Floats are stored at 32 bits on purpose: an 8-bit image file would quantize
// the mid/high bands to nothing.

namespace {

constexpr char kMagic[4] = {'R', 'B', 'N', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void save_band_image(const BandImage& band, const std::string& path) {
  if (band.channels.size() != 3) throw InputError("save_band_image: expected 3 channels");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(band.n));
  put_u32(out, static_cast<std::uint32_t>(band.k));
  put_u64(out, band.source_hash);
  for (const auto& ch : band.channels)
    for (int y = 0; y < band.n; ++y)
      for (int x = 0; x < band.n; ++x) {
        float f = static_cast<float>(ch(y, x));
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
      }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open " + path);
  const bool ok = std::fwrite(out.data(), 1, out.size(), f) == out.size();
  std::fclose(f);
  if (!ok) throw IoError("short write to " + path);
}

BandImage load_band_image(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  const long len = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(len));
  const bool ok = std::fread(buf.data(), 1, buf.size(), f) == buf.size();
  std::fclose(f);
  if (!ok || buf.size() < 24) throw IoError("truncated band file " + path);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw IoError("bad magic in " + path);
  if (get_u32(buf.data() + 4) != kVersion) throw IoError("unsupported band file version in " + path);
  BandImage band;
  band.n = static_cast<int>(get_u32(buf.data() + 8));
  band.k = static_cast<int>(get_u32(buf.data() + 12));
  band.source_hash = get_u64(buf.data() + 16);
  const std::size_t need = 24 + 3ull * band.n * band.n * 4;
  if (buf.size() != need) throw IoError("band file size mismatch in " + path);
  const std::uint8_t* p = buf.data() + 24;
  for (int c = 0; c < 3; ++c) {
    Eigen::MatrixXd ch(band.n, band.n);
    for (int y = 0; y < band.n; ++y)
      for (int x = 0; x < band.n; ++x) {
        std::uint32_t bits = get_u32(p);
        p += 4;
        float fv;
        std::memcpy(&fv, &bits, 4);
        ch(y, x) = fv;
      }
    band.channels.push_back(std::move(ch));
  }
  return band;
}

// 8-bit visualization: the three bands side by side, each mapped to [0,255]
// by its own min/max span.
void save_band_triptych_png(const BandImage& band, const std::string& path) {
  if (band.channels.size() != 3) throw InputError("save_band_triptych_png: expected 3 channels");
  const int n = band.n;
  ImageU8 img = ImageU8::filled(n, 3 * n, 0, 0, 0);
  for (int c = 0; c < 3; ++c) {
    const auto& ch = band.channels[static_cast<std::size_t>(c)];
    const double lo = ch.minCoeff(), hi = ch.maxCoeff();
    const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double v = (ch(y, x) - lo) / span;
        const auto b = static_cast<std::uint8_t>(std::clamp(v * 255.0 + 0.5, 0.0, 255.0));
        img.at(y, c * n + x, 0) = b;
        img.at(y, c * n + x, 1) = b;
        img.at(y, c * n + x, 2) = b;
      }
  }
  save_png(img, path);
}

}  // namespace recapdet
