#include "cocreate/providers.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "cocreate/mock_providers.hpp"

namespace cocreate {

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace

ProviderConfig ProviderConfig::from_env() {
  ProviderConfig c;
  if (auto v = env("PROVIDER_ENDPOINT")) c.endpoint = *v;
  if (auto v = env("PROVIDER_KEY")) c.credential = *v;
  if (auto v = env("TEXT_MODEL")) c.text_model = *v;
  if (auto v = env("IMAGE_MODEL")) c.image_model = *v;
  if (auto v = env("THUMBNAIL_MODEL")) c.thumbnail_model = *v;
  if (auto v = env("EMBED_MODEL")) c.embedding_model = *v;
  try {
    if (auto v = env("REQUEST_TIMEOUT_S")) c.timeout_s = std::stod(*v);
    if (auto v = env("MAX_RETRIES")) c.max_retries = std::stoi(*v);
  } catch (const std::exception&) {
    throw RangeError("REQUEST_TIMEOUT_S / MAX_RETRIES must be numeric");
  }
  c.validate();
  return c;
}

void ProviderConfig::validate() const {
  if (!(timeout_s > 0)) throw RangeError("timeout must be positive");
  if (max_retries < 0) throw RangeError("max_retries must be non-negative");
  if (max_in_flight == 0) throw RangeError("max_in_flight must be at least 1");
  for (auto q : {Quality::Medium, Quality::Auto}) {
    if (!quality_map.contains(q)) throw RangeError(std::string("no quality token for ") + to_string(q));
  }
}

const std::string& ProviderConfig::quality_token(Quality q) const { return quality_map.at(q); }

std::chrono::milliseconds RetryPolicy::delay(int attempt, std::mt19937_64& rng) const {
  const double full = std::min<double>(static_cast<double>(cap.count()),
                                       static_cast<double>(base.count()) * std::ldexp(1.0, attempt));
  std::uniform_real_distribution<double> jitter(full / 2.0, full);
  return std::chrono::milliseconds(static_cast<std::int64_t>(jitter(rng)));
}

CallGate::CallGate(RetryPolicy policy, std::size_t max_in_flight, Sleeper sleeper,
                   std::uint64_t jitter_seed)
    : policy_(policy),
      slots_(static_cast<std::ptrdiff_t>(max_in_flight)),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      rng_(jitter_seed) {}

std::chrono::milliseconds CallGate::next_delay(int attempt) {
  std::lock_guard lock(rng_mu_);
  return policy_.delay(attempt, rng_);
}

GatedTextProvider::GatedTextProvider(std::shared_ptr<TextProvider> inner,
                                     std::shared_ptr<CallGate> gate)
    : inner_(std::move(inner)), gate_(std::move(gate)) {}

std::string GatedTextProvider::generate(const TextRequest& request) {
  return gate_->run([&] { return inner_->generate(request); });
}

GatedImageProvider::GatedImageProvider(std::shared_ptr<ImageProvider> inner,
                                       std::shared_ptr<CallGate> gate)
    : inner_(std::move(inner)), gate_(std::move(gate)) {}

Bytes GatedImageProvider::generate(const ImageRequest& request) {
  return gate_->run([&] { return inner_->generate(request); });
}

Bytes GatedImageProvider::edit(const Bytes& base_png, const ImageRequest& request) {
  return gate_->run([&] { return inner_->edit(base_png, request); });
}

GatedEmbeddingProvider::GatedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                               std::shared_ptr<CallGate> gate)
    : inner_(std::move(inner)), gate_(std::move(gate)) {}

std::vector<Embedding> GatedEmbeddingProvider::embed_texts(const std::vector<std::string>& texts) {
  return gate_->run([&] { return inner_->embed_texts(texts); });
}

std::vector<Embedding> GatedEmbeddingProvider::embed_images(const std::vector<Bytes>& pngs) {
  return gate_->run([&] { return inner_->embed_images(pngs); });
}

Providers gated(Providers raw, const ProviderConfig& config, Sleeper sleeper) {
  config.validate();
  RetryPolicy policy;
  policy.max_retries = config.max_retries;
  auto gate = std::make_shared<CallGate>(policy, config.max_in_flight, std::move(sleeper));
  return Providers{std::make_shared<GatedTextProvider>(std::move(raw.text), gate),
                   std::make_shared<GatedImageProvider>(std::move(raw.image), gate),
                   std::make_shared<GatedEmbeddingProvider>(std::move(raw.embed), gate)};
}

Providers mock_providers(std::uint64_t seed) {
  return Providers{std::make_shared<MockTextProvider>(seed),
                   std::make_shared<MockImageProvider>(seed),
                   std::make_shared<MockEmbeddingProvider>(seed)};
}

void normalize(Embedding& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) throw NormalizationError("cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

}  // namespace cocreate
