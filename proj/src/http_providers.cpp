#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "cocreate/http_providers.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

#include "cocreate/digest.hpp"

namespace cocreate {

using nlohmann::json;

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

HttplibTransport::HttplibTransport(std::string endpoint, double timeout_s)
    : timeout_s_(timeout_s) {
  const auto scheme = endpoint.find("://");
  const auto path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  origin_ = endpoint.substr(0, path_start);
  prefix_ = path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

HttpResponse HttplibTransport::send(const HttpRequest& request) {
  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers(request.headers.begin(), request.headers.end());
  const std::string path = prefix_ + request.path;
  auto result = request.method == "GET"
                    ? client.Get(path, headers)
                    : client.Post(path, headers, request.body, request.content_type);
  if (!result) {
    const auto err = result.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw ProviderError(ProviderErrorKind::Timeout, httplib::to_string(err));
    }
    throw ProviderError(ProviderErrorKind::Transport, httplib::to_string(err));
  }
  return HttpResponse{result->status, result->body};
}

std::string request_hash(const HttpRequest& r) {
  std::string material = r.method;
  material += '\n';
  material += r.path;
  material += '\n';
  material += r.content_type;
  material += '\n';
  material += r.body;
  return sha256_hex(material);
}

namespace {

json encode_body(const std::string& body) {
  if (is_valid_utf8(body)) return json{{"body", body}};
  return json{{"body_b64",
               base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()))}};
}

std::string decode_body(const json& j) {
  if (j.contains("body_b64")) return base64_decode(j.at("body_b64").get<std::string>());
  return j.at("body").get<std::string>();
}

}  // namespace

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner,
                                       std::filesystem::path cassette)
    : inner_(std::move(inner)), cassette_(std::move(cassette)) {}

HttpResponse RecordingTransport::send(const HttpRequest& request) {
  const HttpResponse response = inner_->send(request);
  json req = encode_body(request.body);
  req["method"] = request.method;
  req["path"] = request.path;
  req["content_type"] = request.content_type;
  json line;
  line["request_hash"] = request_hash(request);
  line["request"] = std::move(req);
  line["response"] = encode_body(response.body);
  line["status"] = response.status;
  std::lock_guard lock(mu_);
  std::ofstream out(cassette_, std::ios::app | std::ios::binary);
  out << line.dump() << '\n';
  if (!out) throw StorageError("cannot append to cassette " + cassette_.string());
  return response;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& cassette) {
  std::ifstream in(cassette, std::ios::binary);
  if (!in) throw StorageError("cannot open cassette " + cassette.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json doc = json::parse(line);
    entries_.emplace(doc.at("request_hash").get<std::string>(),
                     HttpResponse{doc.at("status").get<int>(), decode_body(doc.at("response"))});
  }
}

HttpResponse ReplayTransport::send(const HttpRequest& request) {
  const std::string hash = request_hash(request);
  std::lock_guard lock(mu_);
  const auto [lo, hi] = entries_.equal_range(hash);
  if (lo == hi) {
    throw ProviderError(ProviderErrorKind::Transport, "no cassette entry for request " + hash, false);
  }
  // Identical requests replay their recorded responses in order, then
  // repeat the last one.
  const std::size_t n = static_cast<std::size_t>(std::distance(lo, hi));
  std::size_t k = served_[hash]++;
  if (k >= n) k = n - 1;
  return std::next(lo, static_cast<std::ptrdiff_t>(k))->second;
}

ProviderError classify_http_failure(int status, const std::string& body) {
  std::string detail = "HTTP " + std::to_string(status);
  try {
    const auto doc = json::parse(body);
    if (doc.contains("error") && doc["error"].contains("message")) {
      detail += ": " + doc["error"]["message"].get<std::string>();
    }
  } catch (const json::exception&) {
  }
  if (status == 429) return ProviderError(ProviderErrorKind::RateLimited, detail);
  if (status == 408 || status == 504) return ProviderError(ProviderErrorKind::Timeout, detail);
  if (status >= 500) return ProviderError(ProviderErrorKind::Transport, detail);
  if (body.find("content_policy") != std::string::npos || body.find("safety") != std::string::npos) {
    return ProviderError(ProviderErrorKind::Refusal, detail);
  }
  return ProviderError(ProviderErrorKind::Transport, detail, false);
}

OpenAiCompatibleProvider::OpenAiCompatibleProvider(ProviderConfig config,
                                                   std::shared_ptr<Transport> transport,
                                                   bool accepts_image_input)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      accepts_image_input_(accepts_image_input) {
  config_.validate();
}

json OpenAiCompatibleProvider::call(HttpRequest request) {
  if (!config_.credential.empty()) request.headers["Authorization"] = "Bearer " + config_.credential;
  const HttpResponse response = transport_->send(request);
  if (response.status < 200 || response.status >= 300) {
    throw classify_http_failure(response.status, response.body);
  }
  try {
    return json::parse(response.body);
  } catch (const json::parse_error& e) {
    throw ProviderError(ProviderErrorKind::SchemaViolation, std::string("unparseable response: ") + e.what());
  }
}

std::string OpenAiCompatibleProvider::generate(const TextRequest& request) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.instruction}});
  if (request.image_input && accepts_image_input_) {
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:image/png;base64," + base64_encode(*request.image_input)}}}});
  }
  json body;
  body["model"] = config_.text_model;
  body["messages"] = json::array({{{"role", "user"}, {"content", std::move(content)}}});
  body["response_format"] = {
      {"type", "json_schema"},
      {"json_schema", {{"name", request.schema_name}, {"schema", request.schema}, {"strict", false}}}};

  const json doc = call(HttpRequest{"POST", "/chat/completions", "application/json", body.dump(), {}});
  try {
    const auto& message = doc.at("choices").at(0).at("message");
    if (message.contains("refusal") && message["refusal"].is_string()) {
      throw ProviderError(ProviderErrorKind::Refusal, message["refusal"].get<std::string>());
    }
    return message.at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(ProviderErrorKind::SchemaViolation, std::string("unexpected completion shape: ") + e.what());
  }
}

Bytes OpenAiCompatibleProvider::decode_image_response(const json& doc) {
  try {
    const std::string raw = base64_decode(doc.at("data").at(0).at("b64_json").get<std::string>());
    Bytes png(raw.begin(), raw.end());
    decode_png(png);
    return png;
  } catch (const ImageFormatError& e) {
    throw ProviderError(ProviderErrorKind::SchemaViolation, std::string("image payload: ") + e.what());
  } catch (const std::exception& e) {
    throw ProviderError(ProviderErrorKind::SchemaViolation, std::string("unexpected image response: ") + e.what());
  }
}

Bytes OpenAiCompatibleProvider::generate(const ImageRequest& request) {
  json body;
  body["model"] = request.model.empty() ? config_.image_model : request.model;
  body["prompt"] = request.prompt;
  body["quality"] = config_.quality_token(request.quality);
  body["n"] = 1;
  body["size"] = "1024x1024";
  return decode_image_response(
      call(HttpRequest{"POST", "/images/generations", "application/json", body.dump(), {}}));
}

Bytes OpenAiCompatibleProvider::edit(const Bytes& base_png, const ImageRequest& request) {
  decode_png(base_png);
  // Fixed boundary keeps request bodies, and so cassette hashes, stable.
  const std::string boundary = "----cocreate-boundary-7d1f0c";
  std::ostringstream body;
  auto part = [&](const std::string& name, const std::string& value) {
    body << "--" << boundary << "\r\nContent-Disposition: form-data; name=\"" << name
         << "\"\r\n\r\n" << value << "\r\n";
  };
  part("model", request.model.empty() ? config_.image_model : request.model);
  part("prompt", request.prompt);
  part("quality", config_.quality_token(request.quality));
  part("n", "1");
  body << "--" << boundary
       << "\r\nContent-Disposition: form-data; name=\"image\"; filename=\"base.png\"\r\n"
          "Content-Type: image/png\r\n\r\n";
  body.write(reinterpret_cast<const char*>(base_png.data()), static_cast<std::streamsize>(base_png.size()));
  body << "\r\n--" << boundary << "--\r\n";
  return decode_image_response(call(HttpRequest{
      "POST", "/images/edits", "multipart/form-data; boundary=" + boundary, body.str(), {}}));
}

std::vector<Embedding> OpenAiCompatibleProvider::embed(const json& inputs) {
  json body;
  body["model"] = config_.embedding_model;
  body["input"] = inputs;
  const json doc = call(HttpRequest{"POST", "/embeddings", "application/json", body.dump(), {}});
  std::vector<Embedding> out;
  try {
    for (const auto& item : doc.at("data")) {
      out.push_back(item.at("embedding").get<Embedding>());
    }
  } catch (const json::exception& e) {
    throw ProviderError(ProviderErrorKind::SchemaViolation, std::string("unexpected embedding response: ") + e.what());
  }
  if (out.size() != inputs.size()) {
    throw ProviderError(ProviderErrorKind::SchemaViolation, "embedding count mismatch");
  }
  for (auto& v : out) {
    if (v.size() != out.front().size()) {
      throw ProviderError(ProviderErrorKind::SchemaViolation, "embedding dimensions differ");
    }
    normalize(v);
  }
  return out;
}

std::vector<Embedding> OpenAiCompatibleProvider::embed_texts(const std::vector<std::string>& texts) {
  if (texts.empty()) throw RangeError("embedding batch is empty");
  return embed(json(texts));
}

std::vector<Embedding> OpenAiCompatibleProvider::embed_images(const std::vector<Bytes>& pngs) {
  if (pngs.empty()) throw RangeError("embedding batch is empty");
  json inputs = json::array();
  for (const auto& png : pngs) inputs.push_back("data:image/png;base64," + base64_encode(png));
  return embed(inputs);
}

Providers http_providers(const ProviderConfig& config, std::shared_ptr<Transport> transport) {
  auto client = std::make_shared<OpenAiCompatibleProvider>(config, std::move(transport));
  return Providers{client, client, client};
}

}  // namespace cocreate
