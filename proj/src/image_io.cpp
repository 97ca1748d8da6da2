#include "recapdet/image.hpp"

#include <jpeglib.h>
#include <png.h>
#include <tiffio.h>

#include <cstdio>
#include <cstring>
#include <memory>

#include "recapdet/errors.hpp"

namespace recapdet {

std::uint64_t content_hash(const ImageU8& img) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(img.height));
  mix(static_cast<std::uint64_t>(img.width));
  for (std::uint8_t b : img.pixels) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path);
  return f;
}

// ---- PNG ----

ImageU8 load_png_file(std::FILE* f, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw IoError("png init failed for " + path);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png decode failed for " + path);
  }
  png_init_io(png, f);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  ImageU8 img;
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.pixels.resize(static_cast<std::size_t>(img.height) * img.width * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<std::size_t>(y)] = img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// ---- JPEG ----

struct JpegErr {
  jpeg_error_mgr mgr;
  jmp_buf jump;
};

void jpeg_throw(j_common_ptr cinfo) {
  JpegErr* err = reinterpret_cast<JpegErr*>(cinfo->err);
  longjmp(err->jump, 1);
}

ImageU8 decode_jpeg_stream(jpeg_decompress_struct& cinfo, const std::string& what) {
  JpegErr* err = reinterpret_cast<JpegErr*>(cinfo.err);
  if (setjmp(err->jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("jpeg decode failed for " + what);
  }
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  ImageU8 img;
  img.height = static_cast<int>(cinfo.output_height);
  img.width = static_cast<int>(cinfo.output_width);
  img.pixels.resize(static_cast<std::size_t>(img.height) * img.width * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

void encode_jpeg_stream(jpeg_compress_struct& cinfo, const ImageU8& img, int quality,
                        const std::string& what) {
  JpegErr* err = reinterpret_cast<JpegErr*>(cinfo.err);
  if (setjmp(err->jump)) {
    jpeg_destroy_compress(&cinfo);
    throw IoError("jpeg encode failed for " + what);
  }
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(img.pixels.data()) +
                   static_cast<std::size_t>(cinfo.next_scanline) * img.width * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

// ---- TIFF ----

ImageU8 load_tiff_file(const std::string& path) {
  TIFF* tif = TIFFOpen(path.c_str(), "r");
  if (!tif) throw IoError("cannot open tiff " + path);
  std::uint32_t w = 0, h = 0;
  TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &h);
  if (w == 0 || h == 0) {
    TIFFClose(tif);
    throw IoError("tiff without dimensions: " + path);
  }
  std::vector<std::uint32_t> raster(static_cast<std::size_t>(w) * h);
  // RGBA raster in bottom-up order
  if (!TIFFReadRGBAImage(tif, w, h, raster.data(), 0)) {
    TIFFClose(tif);
    throw IoError("tiff decode failed for " + path);
  }
  TIFFClose(tif);
  ImageU8 img;
  img.height = static_cast<int>(h);
  img.width = static_cast<int>(w);
  img.pixels.resize(static_cast<std::size_t>(h) * w * 3);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::uint32_t px = raster[static_cast<std::size_t>(h - 1 - y) * w + x];
      img.at(static_cast<int>(y), static_cast<int>(x), 0) = static_cast<std::uint8_t>(TIFFGetR(px));
      img.at(static_cast<int>(y), static_cast<int>(x), 1) = static_cast<std::uint8_t>(TIFFGetG(px));
      img.at(static_cast<int>(y), static_cast<int>(x), 2) = static_cast<std::uint8_t>(TIFFGetB(px));
    }
  return img;
}

}  // namespace

ImageU8 load_image(const std::string& path) {
  unsigned char magic[4] = {0, 0, 0, 0};
  {
    FilePtr f = open_file(path, "rb");
    if (std::fread(magic, 1, 4, f.get()) != 4) throw IoError("cannot read header of " + path);
  }
  if (magic[0] == 0x89 && magic[1] == 'P') {
    FilePtr f = open_file(path, "rb");
    return load_png_file(f.get(), path);
  }
  if (magic[0] == 0xff && magic[1] == 0xd8) {
    FilePtr f = open_file(path, "rb");
    jpeg_decompress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_throw;
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.get());
    return decode_jpeg_stream(cinfo, path);
  }
  if ((magic[0] == 'I' && magic[1] == 'I') || (magic[0] == 'M' && magic[1] == 'M'))
    return load_tiff_file(path);
  throw IoError("unsupported image format (want PNG/JPEG/TIFF): " + path);
}

void save_png(const ImageU8& img, const std::string& path) {
  if (img.empty()) throw InputError("save_png: empty image");
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw IoError("png init failed for " + path);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode failed for " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_jpeg(const ImageU8& img, const std::string& path, int quality) {
  if (quality < 1 || quality > 100)
    throw ConfigError("save_jpeg: quality must be in [1,100], got " + std::to_string(quality));
  std::vector<std::uint8_t> bytes = encode_jpeg(img, quality);
  FilePtr f = open_file(path, "wb");
  if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
    throw IoError("short write to " + path);
}

std::vector<std::uint8_t> encode_jpeg(const ImageU8& img, int quality) {
  if (img.empty()) throw InputError("encode_jpeg: empty image");
  if (quality < 1 || quality > 100)
    throw ConfigError("encode_jpeg: quality must be in [1,100], got " + std::to_string(quality));
  jpeg_compress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_throw;
  jpeg_create_compress(&cinfo);
  unsigned char* buf = nullptr;
  unsigned long sz = 0;
  jpeg_mem_dest(&cinfo, &buf, &sz);
  encode_jpeg_stream(cinfo, img, quality, "<memory>");
  std::vector<std::uint8_t> out(buf, buf + sz);
  free(buf);
  return out;
}

ImageU8 decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) throw InputError("decode_jpeg: empty buffer");
  jpeg_decompress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_throw;
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, const_cast<unsigned char*>(bytes.data()), static_cast<unsigned long>(bytes.size()));
  return decode_jpeg_stream(cinfo, "<memory>");
}

}  // namespace recapdet
