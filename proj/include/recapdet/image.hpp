#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace recapdet {

// Interleaved 8-bit RGB image, row-major.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // height*width*3

  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool empty() const { return pixels.empty(); }

  static ImageU8 filled(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    ImageU8 img;
    img.height = h;
    img.width = w;
    img.pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      img.pixels[i] = r;
      img.pixels[i + 1] = g;
      img.pixels[i + 2] = b;
    }
    return img;
  }
};

// FNV-1a over the raw pixel bytes; the provenance hash stored with band files
// and manifest records.
std::uint64_t content_hash(const ImageU8& img);
std::string hash_hex(std::uint64_t h);

// Decoders dispatch on magic bytes, not extension. PNG, JPEG and TIFF are
// supported (TIFF via libtiff, first directory, RGB or grayscale).
ImageU8 load_image(const std::string& path);
void save_png(const ImageU8& img, const std::string& path);
void save_jpeg(const ImageU8& img, const std::string& path, int quality);

// In-memory JPEG round trip used by the cross-quality corpus generator.
std::vector<std::uint8_t> encode_jpeg(const ImageU8& img, int quality);
ImageU8 decode_jpeg(const std::vector<std::uint8_t>& bytes);

}  // namespace recapdet
