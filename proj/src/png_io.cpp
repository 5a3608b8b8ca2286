#include "s2cr/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "s2cr/error.hpp"

namespace s2cr {
namespace {

struct ReadCursor {
  const std::string* bytes;
  std::size_t offset;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes->size()) png_error(png, "truncated PNG data");
  std::memcpy(out, cur->bytes->data() + cur->offset, length);
  cur->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void flush_callback(png_structp) {}

struct ErrorSink {
  char message[256] = {0};
};

// Records the message and jumps back to the setjmp point in the caller.
[[noreturn]] void error_callback(png_structp png, png_const_charp message) {
  auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "PNG: %s", message);
  png_longjmp(png, 1);
}

void warning_callback(png_structp, png_const_charp) {}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

struct ReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~ReadGuard() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct WriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~WriteGuard() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

}  // namespace

ImageBuffer decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8)) {
    fail(ErrorKind::kIo, "not a PNG file");
  }
  ErrorSink sink;
  ReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, error_callback,
                                 warning_callback);
  if (!g.png) fail(ErrorKind::kIo, "png_create_read_struct failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) fail(ErrorKind::kIo, "png_create_info_struct failed");

  ReadCursor cursor{&bytes, 0};
  std::vector<png_byte> data;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(g.png))) fail(ErrorKind::kIo, sink.message);
  png_set_read_fn(g.png, &cursor, read_callback);
  png_read_info(g.png, g.info);

  const int color_type = png_get_color_type(g.png, g.info);
  const int bit_depth = png_get_bit_depth(g.png, g.info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(g.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(g.png);
  png_read_update_info(g.png, g.info);

  const int width = static_cast<int>(png_get_image_width(g.png, g.info));
  const int height = static_cast<int>(png_get_image_height(g.png, g.info));
  const int channels = png_get_channels(g.png, g.info);
  const int depth = png_get_bit_depth(g.png, g.info);
  if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16)) {
    png_error(g.png, "unsupported color type");
  }
  const std::size_t rowbytes = png_get_rowbytes(g.png, g.info);
  data.resize(rowbytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = data.data() + rowbytes * y;
  png_read_image(g.png, rows.data());
  png_read_end(g.png, nullptr);

  ImageBuffer image(width, height);
  const double max_value = depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < height; ++y) {
    const png_byte* row = rows[y];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int src_c = channels == 1 ? 0 : c;
        const std::size_t idx = static_cast<std::size_t>(x) * channels + src_c;
        const unsigned v = depth == 16 ? (static_cast<unsigned>(row[2 * idx]) << 8) | row[2 * idx + 1]
                                       : row[idx];
        image.at(c, x, y) = v / max_value;
      }
    }
  }
  return image;
}

ImageBuffer load_png(const std::filesystem::path& path) { return decode_png(slurp(path)); }

MaskBuffer decode_mask_png(const std::string& bytes) {
  const ImageBuffer img = decode_png(bytes);
  Plane p(img.width(), img.height());
  const auto first = img.plane(0);
  std::copy(first.begin(), first.end(), p.values.begin());
  return binarize_mask(p);
}

MaskBuffer load_mask_png(const std::filesystem::path& path) {
  return decode_mask_png(slurp(path));
}

namespace {

std::string encode_rows(int width, int height, int color_type, int channels,
                        const std::vector<png_byte>& data) {
  std::string out;
  ErrorSink sink;
  WriteGuard g;
  g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, error_callback,
                                  warning_callback);
  if (!g.png) fail(ErrorKind::kIo, "png_create_write_struct failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) fail(ErrorKind::kIo, "png_create_info_struct failed");
  if (setjmp(png_jmpbuf(g.png))) fail(ErrorKind::kIo, sink.message);
  png_set_write_fn(g.png, &out, write_callback, flush_callback);
  png_set_IHDR(g.png, g.info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(g.png, 6);
  png_write_info(g.png, g.info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(g.png, const_cast<png_bytep>(data.data() + stride * y));
  }
  png_write_end(g.png, nullptr);
  return out;
}

}  // namespace

std::string encode_png(const ImageBuffer& image) {
  const int w = image.width();
  const int h = image.height();
  std::vector<png_byte> data(static_cast<std::size_t>(w) * h * 3);
  for (int c = 0; c < 3; ++c) {
    const auto p = image.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) data[i * 3 + c] = quantize8(p[i]);
  }
  return encode_rows(w, h, PNG_COLOR_TYPE_RGB, 3, data);
}

void save_png(const ImageBuffer& image, const std::filesystem::path& path) {
  dump(path, encode_png(image));
}

void save_mask_png(const MaskBuffer& mask, const std::filesystem::path& path) {
  const auto v = mask.values();
  std::vector<png_byte> data(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) data[i] = v[i] ? 255 : 0;
  dump(path, encode_rows(mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 1, data));
}

}  // namespace s2cr
