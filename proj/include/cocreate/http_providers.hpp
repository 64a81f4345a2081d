#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cocreate/providers.hpp"

namespace cocreate {

struct HttpRequest {
  std::string method = "POST";
  std::string path;  // relative to the configured endpoint, e.g. "/chat/completions"
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;  // never recorded
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

// Real network transport.
class HttplibTransport final : public Transport {
 public:
  HttplibTransport(std::string endpoint, double timeout_s);
  HttpResponse send(const HttpRequest& request) override;

 private:
  std::string origin_;
  std::string prefix_;
  double timeout_s_;
};

// Hash over method, path, content type and body; headers are excluded so
// cassettes never depend on credentials.
std::string request_hash(const HttpRequest& request);

// Cassette line: {"request_hash", "request", "response", "status"}. Bodies
// that are not valid UTF-8 are stored base64 encoded under "body_b64".
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path cassette);
  HttpResponse send(const HttpRequest& request) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::filesystem::path cassette_;
  std::mutex mu_;
};

class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& cassette);
  HttpResponse send(const HttpRequest& request) override;
  std::size_t size() const { return entries_.size(); }

 private:
  std::multimap<std::string, HttpResponse> entries_;
  std::map<std::string, std::size_t> served_;
  std::mutex mu_;
};

bool is_valid_utf8(std::string_view text);

// Speaks the OpenAI-compatible REST dialect: chat completions with a JSON
// schema response format, image generations and edits, and embeddings.
// Images are sent to the embedding endpoint as PNG data URLs.
class OpenAiCompatibleProvider final : public TextProvider,
                                       public ImageProvider,
                                       public EmbeddingProvider {
 public:
  OpenAiCompatibleProvider(ProviderConfig config, std::shared_ptr<Transport> transport,
                           bool accepts_image_input = true);

  std::string generate(const TextRequest& request) override;
  bool supports_image_input() const override { return accepts_image_input_; }

  Bytes generate(const ImageRequest& request) override;
  Bytes edit(const Bytes& base_png, const ImageRequest& request) override;

  std::vector<Embedding> embed_texts(const std::vector<std::string>& texts) override;
  std::vector<Embedding> embed_images(const std::vector<Bytes>& pngs) override;

 private:
  nlohmann::json call(HttpRequest request);
  std::vector<Embedding> embed(const nlohmann::json& inputs);
  Bytes decode_image_response(const nlohmann::json& doc);

  ProviderConfig config_;
  std::shared_ptr<Transport> transport_;
  bool accepts_image_input_;
};

// Maps an HTTP status to the provider error taxonomy.
ProviderError classify_http_failure(int status, const std::string& body);

Providers http_providers(const ProviderConfig& config, std::shared_ptr<Transport> transport);

}  // namespace cocreate
