#include "cocreate/mock_providers.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <random>
#include <string_view>

#include "cocreate/digest.hpp"

namespace cocreate {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Text after `marker` up to the end of that line.
std::string line_after(std::string_view text, std::string_view marker) {
  const auto at = text.find(marker);
  if (at == std::string_view::npos) return {};
  const auto start = at + marker.size();
  const auto end = text.find('\n', start);
  return std::string(text.substr(start, end == std::string_view::npos ? end : end - start));
}

struct Domain {
  std::string_view name;
  std::array<std::string_view, 8> nouns;
};

constexpr std::array<Domain, 5> kAssociativeDomains = {{
    {"mythology", {"Sisyphus", "Pandora", "Icarus", "Echo", "Narcissus", "Medusa", "Orpheus", "Janus"}},
    {"artworks", {"Scream", "Nighthawks", "Starry Night", "Persistence", "Great Wave", "Melting Clock", "Sunflowers", "Water Lilies"}},
    {"historical events", {"Moon Landing", "Gold Rush", "Printing Press", "Silk Road", "Berlin Wall", "Dust Bowl", "Titanic", "Blackout"}},
    {"metaphors", {"Anchor", "Cage", "Mirror", "Hourglass", "Leash", "Window", "Compass", "Lighthouse"}},
    {"memes", {"Interrupting Cow", "Distracted Boyfriend", "This Is Fine", "Galaxy Brain", "Loading Bar", "Low Battery", "Cat Video", "Doom Scroll"}},
}};

constexpr std::array<std::string_view, 8> kPlainNouns = {
    "Poster", "Reminder", "Break", "Pause", "Moment", "Scene", "Message", "Sign"};

constexpr std::array<std::string_view, 12> kAdjectives = {
    "Quiet", "Bright", "Hidden", "Unplugged", "Golden", "Slow",
    "Open",  "Shared", "Wild",   "Gentle",    "Bold",   "Paper"};

constexpr std::array<std::string_view, 4> kPlainCategories = {"lifestyle", "wellbeing",
                                                              "community", "simplicity"};

template <typename Range>
auto pick(const Range& r, std::mt19937_64& rng) {
  return r[std::uniform_int_distribution<std::size_t>(0, r.size() - 1)(rng)];
}

std::size_t schema_count(const json& schema) {
  try {
    return schema.at("properties").at("ideas").at("minItems").get<std::size_t>();
  } catch (const json::exception&) {
    return 9;
  }
}

std::string lowercase_word(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!out.empty()) {
      break;
    }
  }
  return out;
}

}  // namespace

std::string MockTextProvider::generate(const TextRequest& request) {
  if (request.schema_name == "idea_set") return ideas(request);
  if (request.schema_name == "image_explanation") return explanation(request);
  if (request.schema_name == "sketch") return sketch(request);
  throw ProviderError(ProviderErrorKind::Refusal, "mock cannot answer schema '" + request.schema_name + "'");
}

std::string MockTextProvider::ideas(const TextRequest& request) const {
  std::mt19937_64 rng(fnv1a64(request.instruction, seed_));
  const std::size_t count = schema_count(request.schema);
  const bool associative = request.instruction.find("associative thinking") != std::string::npos;

  ojson out;
  out["ideas"] = ojson::array();
  std::vector<std::string> titles;
  for (std::size_t i = 0; i < count; ++i) {
    std::string title;
    std::string domain = "everyday life";
    std::string category;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      if (associative) {
        const auto& d = pick(kAssociativeDomains, rng);
        domain = d.name;
        category = d.name;
        title = std::string(pick(kAdjectives, rng)) + " " + std::string(pick(d.nouns, rng));
      } else {
        category = pick(kPlainCategories, rng);
        title = std::string(pick(kAdjectives, rng)) + " " + std::string(pick(kPlainNouns, rng));
      }
      if (attempt >= 200) title += " " + std::to_string(attempt);
      const bool excluded = request.instruction.find(title) != std::string::npos;
      if (!excluded && std::find(titles.begin(), titles.end(), title) == titles.end()) break;
    }
    titles.push_back(title);
    ojson idea;
    idea["title"] = title;
    idea["background"] = "A reference drawn from " + domain + ", known to many viewers.";
    idea["description"] = "Stage \"" + title + "\" as a single striking scene that carries the goal.";
    idea["categories"] = {category, associative ? "association" : "direct"};
    out["ideas"].push_back(std::move(idea));
  }
  return out.dump();
}

std::string MockTextProvider::explanation(const TextRequest& request) const {
  const std::string title = line_after(request.instruction, "Idea title: ");
  const std::string goal = line_after(request.instruction, "Design goal: ");
  ojson out;
  out["explanation"] = "The image builds on \"" + title +
                       "\": its central figure and setting translate the idea into a visual "
                       "cue for the goal \"" + goal + "\".";
  return out.dump();
}

std::string MockTextProvider::sketch(const TextRequest& request) const {
  std::mt19937_64 rng(fnv1a64(request.instruction, seed_));
  const std::string intent = line_after(request.instruction, "Refinement intent: ");
  std::string subject = "subject";
  if (const auto the = intent.find("the "); the != std::string::npos) {
    if (auto w = lowercase_word(std::string_view(intent).substr(the + 4)); !w.empty()) subject = w;
  }
  std::vector<std::string> roles = {"a friendly mascot guiding students", "a playful coach",
                                    "a tour guide", "a magician"};
  std::vector<std::string> activities = {"chatting on benches", "playing frisbee",
                                         "reading under trees"};
  std::vector<std::string> tones = {"warm and inviting", "bold and energetic", "calm and muted"};
  // Keep the first option stable; shuffle the alternatives.
  std::shuffle(roles.begin() + 1, roles.end(), rng);
  std::shuffle(activities.begin() + 1, activities.end(), rng);
  std::shuffle(tones.begin() + 1, tones.end(), rng);

  const std::string role = subject + "_role";
  ojson out;
  out["version"] = 1;
  out["template"] = "Keep the composition of the base image. The " + subject + " is {" + role +
                    "}, people in the background are {back_activity}, and the overall tone is {" +
                    subject + "_tone}.";
  out["parameters"] = ojson::array();
  out["parameters"].push_back({{"name", role}, {"label", "Role of the " + subject}, {"options", roles}, {"default_index", 0}});
  out["parameters"].push_back({{"name", "back_activity"}, {"label", "Background activity"}, {"options", activities}, {"default_index", 0}});
  out["parameters"].push_back({{"name", subject + "_tone"}, {"label", "Tone"}, {"options", tones}, {"default_index", 0}});
  return out.dump();
}

std::array<std::uint8_t, 4> MockImageProvider::colour_for(std::string_view prompt, Quality quality,
                                                          std::uint64_t seed) {
  const std::uint64_t h =
      fnv1a64(std::string(prompt) + "\x1f" + to_string(quality), seed);
  return {static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8),
          static_cast<std::uint8_t>(h >> 16), 255};
}

Bytes MockImageProvider::generate(const ImageRequest& request) {
  if (request.prompt.empty()) throw ProviderError(ProviderErrorKind::Refusal, "empty prompt");
  const PngText meta = {{"prompt", request.prompt}, {"quality", to_string(request.quality)}};
  if (request.purpose == ImagePurpose::ThumbnailSheet) {
    Image sheet(kSheetSide, kSheetSide);
    const std::size_t tile = kSheetSide / 3;
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        const auto colour = colour_for(request.prompt + "#" + std::to_string(r * 3 + c),
                                       request.quality, seed_);
        sheet.blit(Image(tile, tile, colour), c * tile, r * tile);
      }
    }
    return encode_png(sheet, meta);
  }
  return encode_png(Image(kSide, kSide, colour_for(request.prompt, request.quality, seed_)), meta);
}

Bytes MockImageProvider::edit(const Bytes& base_png, const ImageRequest& request) {
  if (request.prompt.empty()) throw ProviderError(ProviderErrorKind::Refusal, "empty prompt");
  Image img = decode_png(base_png).image;
  const auto colour = colour_for(request.prompt, request.quality, seed_);
  const std::size_t band = std::max<std::size_t>(1, img.height() / 4);
  for (std::size_t y = 0; y < band && y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      auto px = img.at(x, y);
      std::copy(colour.begin(), colour.end(), px.begin());
    }
  }
  return encode_png(img, {{"prompt", request.prompt}, {"quality", to_string(request.quality)}});
}

Embedding MockEmbeddingProvider::embed_text(const std::string& text) const {
  Embedding v(kDim, 0.0);
  std::string token;
  auto add_token = [&](const std::string& t, double weight) {
    std::mt19937_64 rng(fnv1a64(t, seed_));
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& x : v) x += weight * n(rng);
  };
  for (char c : text + " ") {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!token.empty()) {
      add_token(token, 1.0);
      token.clear();
    }
  }
  add_token("\x01" + text, 0.25);
  normalize(v);
  return v;
}

std::vector<Embedding> MockEmbeddingProvider::embed_texts(const std::vector<std::string>& texts) {
  if (texts.empty()) throw RangeError("embedding batch is empty");
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_text(t));
  return out;
}

std::vector<Embedding> MockEmbeddingProvider::embed_images(const std::vector<Bytes>& pngs) {
  if (pngs.empty()) throw RangeError("embedding batch is empty");
  std::vector<Embedding> out;
  for (const auto& png : pngs) {
    const Image img = decode_png(png).image;
    Embedding v(kDim, 0.0);
    for (std::size_t gy = 0; gy < 4; ++gy) {
      for (std::size_t gx = 0; gx < 4; ++gx) {
        const std::size_t x0 = gx * img.width() / 4, x1 = std::max(x0 + 1, (gx + 1) * img.width() / 4);
        const std::size_t y0 = gy * img.height() / 4, y1 = std::max(y0 + 1, (gy + 1) * img.height() / 4);
        std::array<double, 3> sum{};
        std::size_t n = 0;
        for (std::size_t y = y0; y < y1 && y < img.height(); ++y) {
          for (std::size_t x = x0; x < x1 && x < img.width(); ++x) {
            const auto px = img.at(x, y);
            for (int ch = 0; ch < 3; ++ch) sum[ch] += px[ch];
            ++n;
          }
        }
        for (int ch = 0; ch < 3; ++ch) {
          v[(gy * 4 + gx) * 3 + ch] = n ? sum[ch] / (255.0 * n) - 0.5 : 0.0;
        }
      }
    }
    try {
      normalize(v);
    } catch (const NormalizationError&) {
      std::fill(v.begin(), v.end(), 0.0);
      v[0] = 1.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace cocreate
