#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "cocreate/blob_store.hpp"
#include "cocreate/error.hpp"
#include "cocreate/ideation.hpp"
#include "cocreate/mock_providers.hpp"
#include "support.hpp"

using namespace cocreate;
using namespace cocreate::ideation;
using nlohmann::json;

namespace {

bool contains(const std::string& hay, std::string_view needle) {
  std::string lower = hay;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower.find(needle) != std::string::npos;
}

std::string idea_json(std::size_t n, const std::string& prefix = "Idea") {
  json ideas = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    ideas.push_back({{"title", prefix + " " + std::to_string(i)},
                     {"background", "bg"},
                     {"description", "desc"},
                     {"categories", {"tag"}}});
  }
  return json{{"ideas", ideas}}.dump();
}

Image gradient(std::size_t w, std::size_t h) {
  Image img(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      auto px = img.at(x, y);
      px[0] = static_cast<std::uint8_t>(x);
      px[1] = static_cast<std::uint8_t>(y);
      px[2] = static_cast<std::uint8_t>(x ^ y);
      px[3] = 255;
    }
  }
  return img;
}

}  // namespace

TEST_CASE("associative instruction names the example domains") {
  const auto req = build_ideation_instruction({"a poster for a jazz night", 9, std::nullopt, {}, IdeationMode::Associative});
  for (auto domain : kAssociationDomains) CHECK(contains(req.instruction, domain));
  CHECK(contains(req.instruction, "a poster for a jazz night"));
  CHECK(req.schema_name == "idea_set");
  CHECK(req.schema["properties"]["ideas"]["minItems"] == 9);
}

TEST_CASE("plain instruction avoids every association cue") {
  for (const std::string prompt : {"a poster for a jazz night", "packaging for oat milk"}) {
    const auto req = build_ideation_instruction({prompt, 9, std::string("more playful"), {"Old title"}, IdeationMode::Plain});
    for (const auto& term : association_deny_list()) {
      CHECK_MESSAGE(!contains(req.instruction, term), term);
    }
    CHECK(contains(req.instruction, "more playful"));
    CHECK(contains(req.instruction, "old title"));
  }
}

TEST_CASE("parse_ideas reports count before card problems") {
  try {
    parse_ideas(idea_json(8), 9);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.expected == 9u);
    CHECK(e.got == 8u);
  }
  auto doc = json::parse(idea_json(3));
  doc["ideas"][1].erase("description");
  try {
    parse_ideas(doc.dump(), 3);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.card_index == 1u);
    CHECK(e.field == "description");
  }
  doc = json::parse(idea_json(3));
  doc["ideas"][2]["categories"] = json::array();
  CHECK_THROWS_AS(parse_ideas(doc.dump(), 3), SchemaError);
  CHECK_THROWS_AS(parse_ideas("not json", 3), SchemaError);
  CHECK_THROWS_AS(parse_ideas(idea_json(3), 3, {"Idea 1"}), SchemaError);
}

TEST_CASE("request_ideas repairs once and then gives up") {
  SUBCASE("second answer accepted") {
    testkit::ScriptedText text;
    text.push(idea_json(7));
    text.push(idea_json(9));
    const auto cards = request_ideas(text, {"goal", 9, std::nullopt, {}, IdeationMode::Associative});
    CHECK(cards.size() == 9);
    REQUIRE(text.requests.size() == 2);
    CHECK(contains(text.requests[1].instruction, "wrong number of ideas"));
  }
  SUBCASE("two bad answers raise") {
    testkit::ScriptedText text;
    text.push(idea_json(7));
    text.push(idea_json(8));
    CHECK_THROWS_AS(request_ideas(text, {"goal", 9, std::nullopt, {}, IdeationMode::Associative}), SchemaError);
    CHECK(text.requests.size() == 2);
  }
}

TEST_CASE("grid shape follows the idea count") {
  CHECK(grid_for(9).rows == 3);
  CHECK(grid_for(9).cols == 3);
  CHECK(grid_for(4).rows == 2);
  CHECK(grid_for(1).rows == 1);
}

TEST_CASE("1024 square sheet slices into 341/341/342") {
  const auto tiles = slice_grid(gradient(1024, 1024));
  REQUIRE(tiles.size() == 9);
  CHECK(tiles[0].width() == 341);
  CHECK(tiles[1].width() == 341);
  CHECK(tiles[2].width() == 342);
  CHECK(tiles[6].height() == 342);
  CHECK(tiles[4].at(0, 0)[0] == static_cast<std::uint8_t>(341));
}

TEST_CASE("property: tiles re-stitch to the composite") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    const std::size_t w = 3 + rng() % 300, h = 3 + rng() % 300;
    const auto img = gradient(w, h);
    const auto tiles = slice_grid(img);
    Image back(w, h, {0, 0, 0, 0});
    std::size_t y = 0;
    for (std::size_t r = 0; r < 3; ++r) {
      std::size_t x = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        back.blit(tiles[r * 3 + c], x, y);
        x += tiles[r * 3 + c].width();
      }
      CHECK(x == w);
      y += tiles[r * 3].height();
    }
    CHECK(y == h);
    CHECK(back == img);
  }
  CHECK_THROWS_AS(slice_grid(gradient(2, 9)), RangeError);
}

TEST_CASE("slice_grid accepts PNG bytes") {
  const auto img = gradient(30, 31);
  const auto tiles = slice_grid(encode_png(img));
  CHECK(tiles[8].width() == 10);
  CHECK(tiles[8].height() == 11);
  const std::vector<std::uint8_t> junk = {1, 2, 3};
  CHECK_THROWS_AS(slice_grid(junk), ImageFormatError);
}

TEST_CASE("explanation parsing") {
  CHECK(parse_explanation(R"({"explanation":"The owl stands for study."})") == "The owl stands for study.");
  CHECK_THROWS_AS(parse_explanation(R"({"explanation":""})"), SchemaError);
  CHECK_THROWS_AS(parse_explanation("{}"), SchemaError);
}

TEST_CASE("brainstorm, expand and spark with mock providers") {
  MemoryBlobStore blobs;
  Backends b{mock_providers(1), &blobs, {}, {}, IdeationMode::Associative};
  auto h = SessionHandle::create("b", "mascot for a university library");
  CHECK_THROWS_AS(expand_ideas(*h, b, "more"), IntegrityError);

  const auto cards = brainstorm(*h, b, "mascot for a university library");
  REQUIRE(cards.size() == 9);
  for (const auto& c : cards) {
    CHECK(c.visual_ref.has_value());
    CHECK(blobs.get(*c.visual_ref).has_value());
    CHECK(c.idea_id.rfind("b.i3-", 0) == 0);
  }
  const auto more = expand_ideas(*h, b, "think about night time", 4);
  CHECK(more.size() == 4);
  for (const auto& m : more) {
    CHECK(std::none_of(cards.begin(), cards.end(), [&](const IdeaCard& c) { return c.title == m.title; }));
  }

  const auto image = generate_idea_image(*h, b, cards[0].idea_id);
  CHECK(image.quality == Quality::Medium);
  CHECK(image.explanation.has_value());
  CHECK(image.prompt_used.find(cards[0].title) != std::string::npos);
  const auto png = blobs.get(image.bytes_ref);
  REQUIRE(png.has_value());
  CHECK(decode_png(*png).text.at("quality") == "Medium");
  CHECK(h->snapshot()->images.size() == 1);
}

TEST_CASE("failed spark records the failure and rethrows") {
  MemoryBlobStore blobs;
  auto providers = mock_providers(1);
  auto text = std::make_shared<testkit::ScriptedText>();
  text->push([](const TextRequest&) -> std::string {
    throw ProviderError(ProviderErrorKind::Refusal, "no");
  });
  providers.text = text;
  Backends b{providers, &blobs, {}, {}, IdeationMode::Associative};
  auto h = SessionHandle::create("f", "goal");
  const auto card = create_idea(*h, {"Owl", "an owl", "", {}});
  CHECK_THROWS_AS(generate_idea_image(*h, b, card.idea_id), ProviderError);
  const auto log = h->events();
  CHECK(std::holds_alternative<events::GenerationFailed>(log.back().payload));
  CHECK(h->snapshot()->images.empty());
}

TEST_CASE("create, edit and delete cards") {
  auto h = SessionHandle::create("c", "goal");
  CHECK_THROWS_AS(create_idea(*h, {"", "", "", {}}), ValidationError);
  const auto card = create_idea(*h, {"Own", "mine", "why", {"x"}});
  CHECK(card.provenance == Provenance::UserCreated);
  const auto edited = edit_idea(*h, card.idea_id, {std::string("Owner"), std::nullopt, std::nullopt, std::nullopt});
  CHECK(edited.title == "Owner");
  CHECK(edited.provenance == Provenance::UserCreated);
  CHECK_THROWS_AS(edit_idea(*h, card.idea_id, {}), ValidationError);
  CHECK_THROWS_AS(edit_idea(*h, "c.i99", {std::string("x"), std::nullopt, std::nullopt, std::nullopt}), NotFound);
  delete_idea(*h, card.idea_id);
  CHECK(h->snapshot()->ideas.empty());
  CHECK_THROWS_AS(delete_idea(*h, card.idea_id), NotFound);
}
