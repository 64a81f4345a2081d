#include "cocreate/image.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>

#include "cocreate/error.hpp"

namespace cocreate {

Image::Image(std::size_t width, std::size_t height, std::array<std::uint8_t, 4> fill)
    : width_(width), height_(height), data_(width * height * 4) {
  for (std::size_t i = 0; i < width * height; ++i) {
    std::memcpy(&data_[i * 4], fill.data(), 4);
  }
}

std::span<std::uint8_t, 4> Image::at(std::size_t x, std::size_t y) {
  return std::span<std::uint8_t, 4>(&data_[(y * width_ + x) * 4], 4);
}

std::span<const std::uint8_t, 4> Image::at(std::size_t x, std::size_t y) const {
  return std::span<const std::uint8_t, 4>(&data_[(y * width_ + x) * 4], 4);
}

Image Image::crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const {
  Image out(w, h);
  for (std::size_t row = 0; row < h; ++row) {
    std::memcpy(&out.data_[row * w * 4], &data_[((y + row) * width_ + x) * 4], w * 4);
  }
  return out;
}

void Image::blit(const Image& src, std::size_t x, std::size_t y) {
  for (std::size_t row = 0; row < src.height_; ++row) {
    std::memcpy(&data_[((y + row) * width_ + x) * 4], &src.data_[row * src.width_ * 4],
                src.width_ * 4);
  }
}

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_from_span(png_structp png, png_bytep out, png_size_t len) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + len > cursor->bytes.size()) {
    png_error(png, "unexpected end of data");
  }
  std::memcpy(out, cursor->bytes.data() + cursor->offset, len);
  cursor->offset += len;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_noop(png_structp) {}

void silent_warning(png_structp, png_const_charp) {}

// Kept free of C++ objects so that longjmp cannot skip destructors.
bool write_png(Bytes* out, const Image& image, png_text* chunks, int n_chunks, png_bytep* rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGBA,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (n_chunks > 0) png_set_text(png, info, chunks, n_chunks);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Bytes encode_png(const Image& image, const PngText& text) {
  Bytes out;
  std::vector<png_bytep> rows(image.height());
  std::vector<png_text> chunks(text.size());
  std::size_t k = 0;
  for (const auto& [key, value] : text) {
    chunks[k].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[k].key = const_cast<char*>(key.c_str());
    chunks[k].text = const_cast<char*>(value.c_str());
    chunks[k].text_length = value.size();
    ++k;
  }
  for (std::size_t y = 0; y < image.height(); ++y) {
    rows[y] = const_cast<png_bytep>(image.pixels().data() + y * image.width() * 4);
  }

  if (!write_png(&out, image, chunks.data(), static_cast<int>(chunks.size()), rows.data())) {
    throw ImageFormatError("png encoding failed");
  }
  return out;
}

DecodedPng decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ImageFormatError("not a PNG image");
  }
  DecodedPng result;
  ReadCursor cursor{bytes, 0};
  std::vector<png_bytep> rows;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageFormatError("cannot allocate png reader");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageFormatError("corrupt PNG data");
  }
  png_set_read_fn(png, &cursor, read_from_span);
  png_read_info(png, info);

  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_GRAY ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  }
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);

  result.image = Image(width, height);
  rows.resize(height);
  auto* base = const_cast<std::uint8_t*>(result.image.pixels().data());
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = base + static_cast<std::size_t>(y) * width * 4;
  png_read_image(png, rows.data());
  png_read_end(png, info);

  png_textp text = nullptr;
  int num_text = 0;
  png_get_text(png, info, &text, &num_text);
  for (int i = 0; i < num_text; ++i) {
    result.text.emplace(text[i].key, std::string(text[i].text, text[i].text_length));
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return result;
}

}  // namespace cocreate
