#include "smad/png.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

namespace smad {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

void png_warning_fn(png_structp, png_const_charp) {}

struct ReadHeader {
  int width = 0, height = 0, channels = 0;
};

// The setjmp frames below hold only trivially destructible state; libpng
// errors longjmp into them and are turned into exceptions by the callers.
bool read_header(png_structp png, png_infop info, std::FILE* file, ReadHeader* out) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, file);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out->width = static_cast<int>(png_get_image_width(png, info));
  out->height = static_cast<int>(png_get_image_height(png, info));
  out->channels = png_get_channels(png, info);
  return true;
}

bool read_body(png_structp png, png_bytep* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  return true;
}

bool write_all(png_structp png, png_infop info, std::FILE* file, const ImageU8* image) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, file);
  png_set_compression_level(png, 1);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_set_IHDR(png, info, image->width(), image->height(), 8,
               image->channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image->width()) * image->channels();
  for (int y = 0; y < image->height(); ++y)
    png_write_row(png, const_cast<png_bytep>(image->data() + y * stride));
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

ImageU8 read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  ReadHeader header;
  if (!read_header(png, info, file.get(), &header)) throw IoError("malformed png: " + path.string());
  ImageU8 img(header.height, header.width, header.channels);
  std::vector<png_bytep> rows(header.height);
  for (int y = 0; y < header.height; ++y)
    rows[y] = img.data() + static_cast<std::size_t>(y) * header.width * header.channels;
  if (!read_body(png, rows.data())) throw IoError("malformed png: " + path.string());
  return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& image) {
  if (image.channels() != 1 && image.channels() != 3)
    throw ContractError("write_png: only 1 or 3 channels supported");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!write_all(png, info, file.get(), &image)) throw IoError("failed writing png: " + path.string());
}

}  // namespace smad
