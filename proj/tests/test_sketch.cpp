#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cocreate/error.hpp"
#include "cocreate/sketch.hpp"
#include "support.hpp"

using namespace cocreate;
using namespace cocreate::sketch;

namespace {

Sketch mascot() {
  Sketch s;
  s.template_text = "Draw {subject} doing {activity} in {{curly}} style";
  s.parameters = {{"subject", "Subject", {"a cat", "a robot"}, 0},
                  {"activity", "Activity", {"reading", "jumping", "painting"}, 0}};
  return s;
}

}  // namespace

TEST_CASE("render substitutes options and records byte spans") {
  const auto r = render(mascot(), {{"subject", OptionIndex{1}}, {"activity", Custom{"dancing"}}});
  CHECK(r.text == "Draw a robot doing dancing in {curly} style");
  REQUIRE(r.spans.size() == 2);
  CHECK(r.spans[0] == Span{"subject", 5, 12});
  CHECK(r.spans[1] == Span{"activity", 19, 26});
}

TEST_CASE("spans count UTF-8 bytes, not characters") {
  Sketch s;
  s.template_text = "é{x}";
  s.parameters = {{"x", "X", {"漢字"}, 0}};
  const auto r = render(s, default_selections(s));
  CHECK(r.text == "é漢字");
  CHECK(r.spans[0] == Span{"x", 2, 8});
}

TEST_CASE("validate collects every violation") {
  Sketch s;
  s.template_text = "{known} {unknown} }";
  s.parameters = {{"known", "", {"a"}, 0}, {"unused", "", {}, 2}};
  const auto v = validate(s);
  auto has = [&](const std::string& needle) {
    return std::any_of(v.begin(), v.end(), [&](const auto& m) { return m.find(needle) != std::string::npos; });
  };
  CHECK(has("unknown slot 'unknown'"));
  CHECK(has("unused parameter 'unused'"));
  CHECK(has("no options"));
  CHECK(has("default_index must be 0"));
  CHECK(has("unmatched '}'"));
  CHECK(v.size() == 5);
}

TEST_CASE("parse rejects malformed JSON with the byte offset") {
  try {
    parse_sketch(R"({"version": 1, "template": )");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset > 0);
  }
}

TEST_CASE("parse rejects unexpected keys and invalid structure") {
  CHECK_THROWS_AS(parse_sketch(R"({"version":1,"template":"{a}","parameters":[],"extra":1})"), ValidationError);
  CHECK_THROWS_AS(parse_sketch(R"({"version":1,"template":"{a}","parameters":[]})"), ValidationError);
  CHECK_THROWS_AS(parse_sketch(R"([1,2])"), ValidationError);
}

TEST_CASE("wire format keeps key order") {
  CHECK(serialize_sketch(mascot()) ==
        R"({"version":1,"template":"Draw {subject} doing {activity} in {{curly}} style","parameters":[)"
        R"({"name":"subject","label":"Subject","options":["a cat","a robot"],"default_index":0},)"
        R"({"name":"activity","label":"Activity","options":["reading","jumping","painting"],"default_index":0}]})");
}

TEST_CASE("selection errors name the offending parameters") {
  try {
    render(mascot(), {{"subject", OptionIndex{5}}, {"mood", Custom{"x"}}});
    FAIL("expected SelectionError");
  } catch (const SelectionError& e) {
    CHECK(e.parameters == std::vector<std::string>{"subject", "activity", "mood"});
    CHECK(e.problems.size() == 3);
  }
}

TEST_CASE("selections wire format: integers pick options, strings are custom") {
  const auto sel = selections_from_json(nlohmann::json::parse(R"({"a":2,"b":"free text"})"));
  CHECK(std::get<OptionIndex>(sel.at("a")).index == 2);
  CHECK(std::get<Custom>(sel.at("b")).text == "free text");
  CHECK(selections_to_json(sel).dump() == R"({"a":2,"b":"free text"})");
  CHECK_THROWS_AS(selections_from_json(nlohmann::json::parse(R"({"a":-1})")), SelectionError);
  CHECK_THROWS_AS(selections_from_json(nlohmann::json::parse(R"({"a":true})")), SelectionError);
}

TEST_CASE("default selections are all first options") {
  const auto s = mascot();
  const auto sel = default_selections(s);
  CHECK(is_all_defaults(sel));
  CHECK(render(s, sel).text == "Draw a cat doing reading in {curly} style");
  auto changed = sel;
  changed["activity"] = OptionIndex{1};
  CHECK_FALSE(is_all_defaults(changed));
  changed["activity"] = Custom{"reading"};
  CHECK_FALSE(is_all_defaults(changed));
}

TEST_CASE("duplicate options are a warning, not an error") {
  Sketch s;
  s.template_text = "{a}";
  s.parameters = {{"a", "", {"x", "x"}, 0}};
  CHECK(validate(s).empty());
  CHECK(warnings(s).size() == 1);
}

TEST_CASE("property: random sketches round-trip and unrender to their template") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto s = testkit::random_sketch(rng);
    REQUIRE(validate(s).empty());
    const auto wire = serialize_sketch(s);
    const auto back = parse_sketch(wire);
    CHECK(back == s);
    CHECK(serialize_sketch(back) == wire);
    const auto sel = testkit::random_selections(s, rng);
    const auto r = render(s, sel);
    CHECK(testkit::unrender(r.text, r.spans) == s.template_text);
    const auto oracle = testkit::oracle_render(s, sel);
    CHECK(oracle.text == r.text);
    REQUIRE(oracle.spans.size() == r.spans.size());
    for (std::size_t k = 0; k < r.spans.size(); ++k) {
      CHECK(std::get<0>(oracle.spans[k]) == r.spans[k].param_name);
      CHECK(std::get<1>(oracle.spans[k]) == r.spans[k].byte_start);
      CHECK(std::get<2>(oracle.spans[k]) == r.spans[k].byte_end);
    }
  }
}
