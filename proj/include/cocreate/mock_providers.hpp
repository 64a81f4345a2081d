#pragma once

#include <cstdint>
#include <string>

#include "cocreate/providers.hpp"

namespace cocreate {

// Answers the three structured requests the app issues ("idea_set",
// "image_explanation", "sketch") with plausible, seed-determined content.
class MockTextProvider final : public TextProvider {
 public:
  explicit MockTextProvider(std::uint64_t seed) : seed_(seed) {}
  std::string generate(const TextRequest& request) override;
  bool supports_image_input() const override { return true; }

 private:
  std::string ideas(const TextRequest& request) const;
  std::string explanation(const TextRequest& request) const;
  std::string sketch(const TextRequest& request) const;

  std::uint64_t seed_;
};

// generate: a solid colour picked by hashing (prompt, quality token), with
// the prompt stored in a tEXt chunk. Thumbnail sheets get one colour per
// 3x3 tile. edit: the base image with a band over its top quarter.
class MockImageProvider final : public ImageProvider {
 public:
  static constexpr std::size_t kSide = 64;
  static constexpr std::size_t kSheetSide = 96;

  explicit MockImageProvider(std::uint64_t seed) : seed_(seed) {}
  Bytes generate(const ImageRequest& request) override;
  Bytes edit(const Bytes& base_png, const ImageRequest& request) override;

  static std::array<std::uint8_t, 4> colour_for(std::string_view prompt, Quality quality,
                                                std::uint64_t seed);

 private:
  std::uint64_t seed_;
};

// Text: sum of per-token pseudo-random directions, so titles sharing words
// land close together. Images: centred mean colour of a 4x4 grid.
class MockEmbeddingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDim = 48;

  explicit MockEmbeddingProvider(std::uint64_t seed) : seed_(seed) {}
  std::vector<Embedding> embed_texts(const std::vector<std::string>& texts) override;
  std::vector<Embedding> embed_images(const std::vector<Bytes>& pngs) override;

 private:
  Embedding embed_text(const std::string& text) const;
  std::uint64_t seed_;
};

}  // namespace cocreate
