#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocreate/error.hpp"
#include "cocreate/image.hpp"
#include "cocreate/session.hpp"

namespace cocreate {

using Embedding = std::vector<double>;

struct TextRequest {
  std::string instruction;
  std::string schema_name;
  nlohmann::json schema;             // JSON Schema the response must satisfy
  std::optional<Bytes> image_input;  // attached only if the provider accepts images
};

class TextProvider {
 public:
  virtual ~TextProvider() = default;
  // Returns the raw structured text; the caller validates it.
  virtual std::string generate(const TextRequest& request) = 0;
  virtual bool supports_image_input() const { return false; }
};

enum class ImagePurpose { Full, ThumbnailSheet };

struct ImageRequest {
  std::string prompt;
  Quality quality = Quality::Medium;
  std::string model;
  ImagePurpose purpose = ImagePurpose::Full;
};

class ImageProvider {
 public:
  virtual ~ImageProvider() = default;
  virtual Bytes generate(const ImageRequest& request) = 0;
  virtual Bytes edit(const Bytes& base_png, const ImageRequest& request) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Every returned vector has unit L2 norm.
  virtual std::vector<Embedding> embed_texts(const std::vector<std::string>& texts) = 0;
  virtual std::vector<Embedding> embed_images(const std::vector<Bytes>& pngs) = 0;
};

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com/v1";
  std::string credential;
  std::string text_model = "gpt-5-2025-08-07";
  std::string image_model = "gpt-image-1";
  std::string thumbnail_model = "gpt-image-1-mini";
  std::string embedding_model = "clip-vit-bigg-14";
  double timeout_s = 120.0;
  int max_retries = 3;
  std::size_t max_in_flight = 4;
  std::map<Quality, std::string> quality_map = {{Quality::Medium, "medium"},
                                                {Quality::Auto, "auto"}};

  // Reads PROVIDER_ENDPOINT, PROVIDER_KEY, TEXT_MODEL, IMAGE_MODEL,
  // THUMBNAIL_MODEL, EMBED_MODEL, REQUEST_TIMEOUT_S and MAX_RETRIES on top of
  // the defaults above.
  static ProviderConfig from_env();
  void validate() const;
  const std::string& quality_token(Quality q) const;
};

// Exponential backoff with jitter: attempt k waits a uniform draw from
// [d/2, d] where d = min(cap, base * 2^k).
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base{500};
  std::chrono::milliseconds cap{8000};

  std::chrono::milliseconds delay(int attempt, std::mt19937_64& rng) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Shared by the decorators below: bounds in-flight calls and retries
// retryable ProviderErrors.
class CallGate {
 public:
  CallGate(RetryPolicy policy, std::size_t max_in_flight, Sleeper sleeper = {},
           std::uint64_t jitter_seed = 0x5eed);

  template <typename F>
  auto run(F&& call) -> decltype(call()) {
    for (int attempt = 0;; ++attempt) {
      try {
        Permit permit(slots_);
        return call();
      } catch (const ProviderError& e) {
        if (!e.retryable || attempt >= policy_.max_retries) throw;
        sleeper_(next_delay(attempt));
      }
    }
  }

 private:
  struct Permit {
    explicit Permit(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~Permit() { sem.release(); }
    std::counting_semaphore<>& sem;
  };
  std::chrono::milliseconds next_delay(int attempt);

  RetryPolicy policy_;
  std::counting_semaphore<> slots_;
  Sleeper sleeper_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

class GatedTextProvider final : public TextProvider {
 public:
  GatedTextProvider(std::shared_ptr<TextProvider> inner, std::shared_ptr<CallGate> gate);
  std::string generate(const TextRequest& request) override;
  bool supports_image_input() const override { return inner_->supports_image_input(); }

 private:
  std::shared_ptr<TextProvider> inner_;
  std::shared_ptr<CallGate> gate_;
};

class GatedImageProvider final : public ImageProvider {
 public:
  GatedImageProvider(std::shared_ptr<ImageProvider> inner, std::shared_ptr<CallGate> gate);
  Bytes generate(const ImageRequest& request) override;
  Bytes edit(const Bytes& base_png, const ImageRequest& request) override;

 private:
  std::shared_ptr<ImageProvider> inner_;
  std::shared_ptr<CallGate> gate_;
};

class GatedEmbeddingProvider final : public EmbeddingProvider {
 public:
  GatedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner, std::shared_ptr<CallGate> gate);
  std::vector<Embedding> embed_texts(const std::vector<std::string>& texts) override;
  std::vector<Embedding> embed_images(const std::vector<Bytes>& pngs) override;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::shared_ptr<CallGate> gate_;
};

struct Providers {
  std::shared_ptr<TextProvider> text;
  std::shared_ptr<ImageProvider> image;
  std::shared_ptr<EmbeddingProvider> embed;
};

// Wraps each provider with a shared CallGate built from the config.
Providers gated(Providers raw, const ProviderConfig& config, Sleeper sleeper = {});

// Deterministic offline providers; every output is a pure function of
// (seed, request).
Providers mock_providers(std::uint64_t seed);

// Normalizes in place; throws NormalizationError for a zero vector.
void normalize(Embedding& v);

}  // namespace cocreate
