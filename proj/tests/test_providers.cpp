#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cocreate/digest.hpp"
#include "cocreate/error.hpp"
#include "cocreate/http_providers.hpp"
#include "cocreate/ideation.hpp"
#include "cocreate/mock_providers.hpp"
#include "support.hpp"
#include "temp_dir.hpp"

using namespace cocreate;
using nlohmann::json;

namespace {

double norm(const Embedding& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const Embedding& a, const Embedding& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class FakeTransport final : public Transport {
 public:
  std::function<HttpResponse(const HttpRequest&)> reply;
  std::vector<HttpRequest> seen;
  HttpResponse send(const HttpRequest& r) override {
    seen.push_back(r);
    return reply(r);
  }
};

std::string png_response() {
  const auto png = encode_png(Image(4, 4, {9, 9, 9, 255}));
  return json{{"data", {{{"b64_json", base64_encode(png)}}}}}.dump();
}


}  // namespace

TEST_CASE("mocks are deterministic for a seed") {
  auto a = mock_providers(42), b = mock_providers(42), c = mock_providers(43);
  const auto req = ideation::build_ideation_instruction({"a logo for a bakery", 9, std::nullopt, {}, IdeationMode::Associative});
  CHECK(a.text->generate(req) == b.text->generate(req));
  CHECK(a.text->generate(req) != c.text->generate(req));
  const ImageRequest img{"a bakery logo", Quality::Medium, "m", ImagePurpose::Full};
  CHECK(a.image->generate(img) == b.image->generate(img));
  CHECK(a.embed->embed_texts({"bread"}) == b.embed->embed_texts({"bread"}));
}

TEST_CASE("mock ideas parse and honour the requested count") {
  auto p = mock_providers(1);
  for (std::size_t n : {1u, 4u, 9u, 12u}) {
    for (auto mode : {IdeationMode::Associative, IdeationMode::Plain}) {
      const auto cards = ideation::request_ideas(*p.text, {"a poster for a science fair", n, std::nullopt, {}, mode});
      CHECK(cards.size() == n);
    }
  }
}

TEST_CASE("mock refuses unknown schemas") {
  auto p = mock_providers(1);
  CHECK_THROWS_AS(p.text->generate({"hello", "mystery", json::object(), std::nullopt}), ProviderError);
}

TEST_CASE("mock quality tier changes the picture") {
  auto p = mock_providers(1);
  const auto m = decode_png(p.image->generate({"x", Quality::Medium, "", ImagePurpose::Full}));
  const auto a = decode_png(p.image->generate({"x", Quality::Auto, "", ImagePurpose::Full}));
  CHECK_FALSE(m.image == a.image);
  CHECK(m.text.at("prompt") == "x");
}

TEST_CASE("embeddings are unit length and batch-consistent") {
  auto p = mock_providers(5);
  const std::vector<std::string> texts = {"owl", "library owl", "ocean", "a", "日本"};
  const auto batch = p.embed->embed_texts(texts);
  REQUIRE(batch.size() == texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    CHECK(norm(batch[i]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.embed->embed_texts({texts[i]})[0] == batch[i]);
  }
  CHECK(dot(batch[0], batch[1]) > dot(batch[0], batch[2]));
  const auto imgs = p.embed->embed_images({p.image->generate({"x", Quality::Medium, "", ImagePurpose::Full}),
                                           p.image->generate({"y", Quality::Medium, "", ImagePurpose::Full})});
  for (const auto& v : imgs) CHECK(norm(v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize rejects the zero vector") {
  Embedding zero(3, 0.0);
  CHECK_THROWS_AS(normalize(zero), NormalizationError);
  Embedding v{3, 4};
  normalize(v);
  CHECK(v[0] == doctest::Approx(0.6));
}

TEST_CASE("retry: two rate limits then success takes three attempts") {
  auto flaky = std::make_shared<testkit::ScriptedText>();
  flaky->push([](const TextRequest&) -> std::string { throw ProviderError(ProviderErrorKind::RateLimited, "429"); });
  flaky->push([](const TextRequest&) -> std::string { throw ProviderError(ProviderErrorKind::RateLimited, "429"); });
  flaky->push(std::string("ok"));
  std::vector<std::chrono::milliseconds> waits;
  auto gate = std::make_shared<CallGate>(RetryPolicy{}, 4, [&](std::chrono::milliseconds d) { waits.push_back(d); });
  GatedTextProvider gated(flaky, gate);
  CHECK(gated.generate({"x", "s", json::object(), std::nullopt}) == "ok");
  CHECK(flaky->requests.size() == 3);
  REQUIRE(waits.size() == 2);
  CHECK(waits[0].count() >= 250);
  CHECK(waits[0].count() <= 500);
  CHECK(waits[1].count() >= 500);
  CHECK(waits[1].count() <= 1000);
}

TEST_CASE("retry: refusals are not retried and retries are capped") {
  SUBCASE("refusal") {
    auto text = std::make_shared<testkit::ScriptedText>();
    text->push([](const TextRequest&) -> std::string { throw ProviderError(ProviderErrorKind::Refusal, "no"); });
    GatedTextProvider gated(text, std::make_shared<CallGate>(RetryPolicy{}, 4, [](auto) {}));
    CHECK_THROWS_AS(gated.generate({"x", "s", json::object(), std::nullopt}), ProviderError);
    CHECK(text->requests.size() == 1);
  }
  SUBCASE("persistent timeout") {
    auto text = std::make_shared<testkit::ScriptedText>();
    for (int i = 0; i < 10; ++i) {
      text->push([](const TextRequest&) -> std::string { throw ProviderError(ProviderErrorKind::Timeout, "slow"); });
    }
    GatedTextProvider gated(text, std::make_shared<CallGate>(RetryPolicy{}, 4, [](auto) {}));
    CHECK_THROWS_AS(gated.generate({"x", "s", json::object(), std::nullopt}), ProviderError);
    CHECK(text->requests.size() == 4);
  }
}

TEST_CASE("backoff stays within [d/2, d] and under the cap") {
  RetryPolicy policy;
  std::mt19937_64 rng(1);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double full = std::min(8000.0, 500.0 * std::ldexp(1.0, attempt));
    for (int i = 0; i < 50; ++i) {
      const auto d = policy.delay(attempt, rng).count();
      CHECK(d >= static_cast<long>(full / 2) - 1);
      CHECK(d <= static_cast<long>(full));
    }
  }
}

TEST_CASE("the gate bounds calls in flight") {
  struct Slow final : TextProvider {
    std::atomic<int> now{0}, peak{0};
    std::string generate(const TextRequest&) override {
      const int n = ++now;
      int p = peak.load();
      while (n > p && !peak.compare_exchange_weak(p, n)) {}
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      --now;
      return "x";
    }
  };
  auto slow = std::make_shared<Slow>();
  GatedTextProvider gated(slow, std::make_shared<CallGate>(RetryPolicy{}, 2));
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { gated.generate({"x", "s", json::object(), std::nullopt}); });
  for (auto& t : threads) t.join();
  CHECK(slow->peak.load() <= 2);
  CHECK(slow->peak.load() >= 1);
}

TEST_CASE("config from the environment") {
  ::setenv("TEXT_MODEL", "other-model", 1);
  ::setenv("MAX_RETRIES", "5", 1);
  const auto c = ProviderConfig::from_env();
  CHECK(c.text_model == "other-model");
  CHECK(c.max_retries == 5);
  CHECK(c.image_model == "gpt-image-1");
  ::unsetenv("TEXT_MODEL");
  ::unsetenv("MAX_RETRIES");
  ProviderConfig bad;
  bad.max_in_flight = 0;
  CHECK_THROWS_AS(bad.validate(), RangeError);
}

TEST_CASE("HTTP provider sends the configured quality tokens") {
  auto t = std::make_shared<FakeTransport>();
  t->reply = [](const HttpRequest&) { return HttpResponse{200, png_response()}; };
  ProviderConfig cfg;
  OpenAiCompatibleProvider p(cfg, t);
  static_cast<ImageProvider&>(p).generate(ImageRequest{"owl", Quality::Medium, "", ImagePurpose::Full});
  static_cast<ImageProvider&>(p).generate(ImageRequest{"owl", Quality::Auto, "", ImagePurpose::Full});
  p.edit(encode_png(Image(2, 2)), ImageRequest{"owl", Quality::Auto, "", ImagePurpose::Full});
  REQUIRE(t->seen.size() == 3);
  CHECK(json::parse(t->seen[0].body)["quality"] == "medium");
  CHECK(json::parse(t->seen[1].body)["quality"] == "auto");
  CHECK(json::parse(t->seen[0].body)["model"] == "gpt-image-1");
  CHECK(t->seen[2].path == "/images/edits");
  CHECK(t->seen[2].body.find("name=\"quality\"\r\n\r\nauto\r\n") != std::string::npos);
}

TEST_CASE("HTTP provider builds schema-constrained chat requests") {
  auto t = std::make_shared<FakeTransport>();
  t->reply = [](const HttpRequest&) {
    return HttpResponse{200, json{{"choices", {{{"message", {{"content", "{\"ok\":1}"}}}}}}}.dump()};
  };
  ProviderConfig cfg;
  cfg.credential = "secret";
  OpenAiCompatibleProvider p(cfg, t);
  TextRequest req{"hi", "idea_set", json{{"type", "object"}}, Bytes{1, 2, 3}};
  CHECK(static_cast<TextProvider&>(p).generate(req) == "{\"ok\":1}");
  const auto body = json::parse(t->seen[0].body);
  CHECK(body["response_format"]["json_schema"]["name"] == "idea_set");
  CHECK(body["messages"][0]["content"][1]["image_url"]["url"] == "data:image/png;base64,AQID");
  CHECK(t->seen[0].headers.at("Authorization") == "Bearer secret");
}

TEST_CASE("HTTP failures map onto the error taxonomy") {
  CHECK(classify_http_failure(429, "").kind == ProviderErrorKind::RateLimited);
  CHECK(classify_http_failure(429, "").retryable);
  CHECK(classify_http_failure(504, "").kind == ProviderErrorKind::Timeout);
  CHECK(classify_http_failure(503, "").kind == ProviderErrorKind::Transport);
  CHECK(classify_http_failure(503, "").retryable);
  CHECK(classify_http_failure(400, R"({"error":{"code":"content_policy_violation","message":"no"}})").kind ==
        ProviderErrorKind::Refusal);
  CHECK_FALSE(classify_http_failure(401, "{}").retryable);

  auto t = std::make_shared<FakeTransport>();
  t->reply = [](const HttpRequest&) { return HttpResponse{200, "{\"data\":[]}"}; };
  OpenAiCompatibleProvider p(ProviderConfig{}, t);
  try {
    static_cast<ImageProvider&>(p).generate(ImageRequest{"x", Quality::Medium, "", ImagePurpose::Full});
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(e.kind == ProviderErrorKind::SchemaViolation);
  }
}

TEST_CASE("cassettes record and replay, including binary bodies") {
  testkit::TempDir dir;
  const auto cassette = dir.path / "c.jsonl";
  auto live = std::make_shared<FakeTransport>();
  int calls = 0;
  live->reply = [&](const HttpRequest& r) {
    ++calls;
    if (r.path == "/embeddings") {
      return HttpResponse{200, json{{"data", {{{"embedding", {3.0, 4.0}}}}}}.dump()};
    }
    return HttpResponse{200, png_response()};
  };
  const Bytes base = encode_png(Image(3, 3));
  Embedding recorded_vec;
  Bytes recorded_img;
  {
    auto rec = std::make_shared<RecordingTransport>(live, cassette);
    OpenAiCompatibleProvider p(ProviderConfig{}, rec);
    recorded_vec = p.embed_texts({"owl"})[0];
    recorded_img = p.edit(base, ImageRequest{"owl", Quality::Auto, "", ImagePurpose::Full});
  }
  CHECK(calls == 2);
  std::ifstream in(cassette);
  std::string line;
  std::size_t lines = 0;
  bool saw_b64 = false;
  while (std::getline(in, line)) {
    ++lines;
    const auto doc = json::parse(line);
    CHECK(doc.contains("request_hash"));
    if (doc["request"].contains("body_b64")) saw_b64 = true;
    CHECK(line.find("secret") == std::string::npos);
  }
  CHECK(lines == 2);
  CHECK(saw_b64);

  auto replay = std::make_shared<ReplayTransport>(cassette);
  OpenAiCompatibleProvider q(ProviderConfig{}, replay);
  CHECK(q.embed_texts({"owl"})[0] == recorded_vec);
  CHECK(q.edit(base, ImageRequest{"owl", Quality::Auto, "", ImagePurpose::Full}) == recorded_img);
  CHECK(calls == 2);
  CHECK_THROWS_AS(q.embed_texts({"never recorded"}), ProviderError);
  CHECK(recorded_vec[0] == doctest::Approx(0.6));
}

TEST_CASE("utf-8 validation") {
  CHECK(is_valid_utf8("plain"));
  CHECK(is_valid_utf8("漢字 🎨"));
  CHECK_FALSE(is_valid_utf8(std::string("\xff\xfe", 2)));
  CHECK_FALSE(is_valid_utf8(std::string("\xe6\xbc", 2)));
}

TEST_CASE("digest helpers") {
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(base64_encode(Bytes{'h', 'i'}) == "aGk=");
  CHECK(base64_decode("aGk=") == "hi");
  CHECK(base64_decode(base64_encode(Bytes{0, 255, 1})) == std::string("\0\xff\x01", 3));
}
