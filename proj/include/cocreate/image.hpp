#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cocreate {

using Bytes = std::vector<std::uint8_t>;

// 8-bit RGBA raster, row-major.
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, std::array<std::uint8_t, 4> fill = {0, 0, 0, 255});

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }

  std::span<std::uint8_t, 4> at(std::size_t x, std::size_t y);
  std::span<const std::uint8_t, 4> at(std::size_t x, std::size_t y) const;

  std::span<const std::uint8_t> pixels() const { return data_; }

  // Copies the rectangle [x, x+w) x [y, y+h).
  Image crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const;
  void blit(const Image& src, std::size_t x, std::size_t y);

  bool operator==(const Image&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> data_;
};

using PngText = std::map<std::string, std::string>;

Bytes encode_png(const Image& image, const PngText& text = {});

struct DecodedPng {
  Image image;
  PngText text;
};

// Throws ImageFormatError for anything that is not a readable PNG.
DecodedPng decode_png(std::span<const std::uint8_t> bytes);

}  // namespace cocreate
