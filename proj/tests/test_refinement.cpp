#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cocreate/blob_store.hpp"
#include "cocreate/error.hpp"
#include "cocreate/refinement.hpp"
#include "support.hpp"

using namespace cocreate;
using namespace cocreate::refinement;

namespace {

struct Studio {
  MemoryBlobStore blobs;
  Backends backends{mock_providers(3), &blobs, {}, {}, IdeationMode::Associative};
  std::shared_ptr<SessionHandle> session = SessionHandle::create("r", "mascot for a university library");
  std::string base_image;
  std::string tab;

  Studio() {
    const auto card = ideation::create_idea(*session, {"Owl", "a wise owl reading", "", {"animal"}});
    base_image = ideation::generate_idea_image(*session, backends, card.idea_id).image_id;
    tab = open_refine_tab(*session, base_image).tab_id;
  }
};

std::string sketch_reply(const std::string& tpl, const std::string& params) {
  return R"({"version":1,"template":")" + tpl + R"(","parameters":)" + params + "}";
}

std::size_t matching_pixels(const Image& a, const Image& b) {
  std::size_t same = 0;
  for (std::size_t y = 0; y < a.height(); ++y) {
    for (std::size_t x = 0; x < a.width(); ++x) {
      const auto p = a.at(x, y), q = b.at(x, y);
      if (std::equal(p.begin(), p.end(), q.begin())) ++same;
    }
  }
  return same;
}

}  // namespace

TEST_CASE("refine records the prompt and the sketch") {
  Studio st;
  const auto sk = refine(*st.session, st.backends, st.tab, "make the owl a mascot");
  CHECK(validate(sk).empty());
  CHECK(check_bounds(sk).empty());
  const auto state = st.session->snapshot();
  const auto* tab = state->find_tab(st.tab);
  CHECK(tab->refine_prompt_history == std::vector<std::string>{"make the owl a mascot"});
  REQUIRE(tab->current_sketch_id.has_value());
  CHECK(*state->find_sketch(*tab->current_sketch_id) == sk);
}

TEST_CASE("reprompt appends history and keeps earlier sketches resolvable") {
  Studio st;
  refine(*st.session, st.backends, st.tab, "make the owl a mascot");
  const auto first_id = *st.session->snapshot()->find_tab(st.tab)->current_sketch_id;
  reprompt(*st.session, st.backends, st.tab, "make the owl a poster");
  const auto state = st.session->snapshot();
  const auto* tab = state->find_tab(st.tab);
  CHECK(tab->refine_prompt_history.size() == 2);
  CHECK(*tab->current_sketch_id != first_id);
  CHECK(state->find_sketch(first_id) != nullptr);
}

TEST_CASE("default and custom rounds") {
  Studio st;
  const auto sk = refine(*st.session, st.backends, st.tab, "make the owl a mascot");
  const auto defaults = sketch::default_selections(sk);

  const auto first = generate_variation(*st.session, st.backends, st.tab, defaults);
  CHECK(first.round.used_defaults());
  CHECK(first.round.final_prompt == sketch::render(sk, defaults).text);
  CHECK(first.image.quality == Quality::Auto);
  CHECK(first.image.origin.ref == st.base_image);

  auto custom = defaults;
  custom.begin()->second = sketch::Custom{"a stern librarian"};
  const auto second = generate_variation(*st.session, st.backends, st.tab, custom);
  CHECK_FALSE(second.round.used_defaults());
  CHECK(second.image.origin.ref == st.base_image);

  const auto manual = generate_variation(*st.session, st.backends, st.tab, defaults, std::string("hand made prompt"));
  CHECK_FALSE(manual.round.used_defaults());
  CHECK(manual.round.final_prompt == "hand made prompt");
  CHECK(std::holds_alternative<events::PromptManuallyEdited>(st.session->events()[st.session->event_count() - 3].payload));
}

TEST_CASE("variation keeps most of the base image") {
  Studio st;
  const auto sk = refine(*st.session, st.backends, st.tab, "make the owl a mascot");
  const auto v = generate_variation(*st.session, st.backends, st.tab, sketch::default_selections(sk));
  const auto state = st.session->snapshot();
  const auto base = decode_png(*st.blobs.get(state->find_image(st.base_image)->bytes_ref)).image;
  const auto varied = decode_png(*st.blobs.get(v.image.bytes_ref)).image;
  REQUIRE(base.width() == varied.width());
  CHECK(matching_pixels(base, varied) * 2 > base.width() * base.height());
  CHECK_FALSE(base == varied);
}

TEST_CASE("changing one selection only changes that parameter's spans") {
  Studio st;
  const auto sk = refine(*st.session, st.backends, st.tab, "make the owl a mascot");
  const auto state = st.session->snapshot();
  auto sel = sketch::default_selections(sk);
  const auto before = preview(*state, st.tab, sel);
  const auto& changed = sk.parameters.back();
  sel[changed.name] = sketch::OptionIndex{1};
  const auto after = preview(*state, st.tab, sel);
  REQUIRE(before.spans.size() == after.spans.size());
  for (std::size_t i = 0; i < before.spans.size(); ++i) {
    const auto& a = before.spans[i];
    const auto& b = after.spans[i];
    CHECK(a.param_name == b.param_name);
    const auto va = before.text.substr(a.byte_start, a.byte_end - a.byte_start);
    const auto vb = after.text.substr(b.byte_start, b.byte_end - b.byte_start);
    if (a.param_name == changed.name) {
      CHECK(va == changed.options[0]);
      CHECK(vb == changed.options[1]);
    } else {
      CHECK(va == vb);
    }
  }
  CHECK(testkit::unrender(after.text, after.spans) == sk.template_text);
}

TEST_CASE("preview errors") {
  Studio st;
  CHECK_THROWS_AS(preview(*st.session->snapshot(), st.tab, {}), ValidationError);
  CHECK_THROWS_AS(preview(*st.session->snapshot(), "r.t99", {}), NotFound);
  CHECK_THROWS_AS(preview(*st.session->snapshot(), st.session->snapshot()->brainstorm_tab().tab_id, {}), ValidationError);
  const auto sk = refine(*st.session, st.backends, st.tab, "make the owl a mascot");
  CHECK_THROWS_AS(preview(*st.session->snapshot(), st.tab, {{"nope", sketch::OptionIndex{0}}}), SelectionError);
  const auto manual = preview(*st.session->snapshot(), st.tab, sketch::default_selections(sk), std::string("mine"));
  CHECK(manual.text == "mine");
  CHECK(manual.spans.empty());
}

TEST_CASE("bad selection records nothing") {
  Studio st;
  refine(*st.session, st.backends, st.tab, "make the owl a mascot");
  const auto n = st.session->event_count();
  CHECK_THROWS_AS(generate_variation(*st.session, st.backends, st.tab, {{"nope", sketch::OptionIndex{0}}}), SelectionError);
  CHECK(st.session->event_count() == n);
}

TEST_CASE("synthesis repairs once then fails with the violations") {
  ImageRecord base;
  base.prompt_used = "an owl";
  SUBCASE("repair succeeds") {
    testkit::ScriptedText text;
    text.push(sketch_reply("{a} and {b}", R"([{"name":"a","label":"A","options":["x","y"],"default_index":0}])"));
    text.push(sketch_reply("{a}", R"([{"name":"a","label":"A","options":["x","y"],"default_index":0}])"));
    const auto out = synthesize_sketch(text, base, std::nullopt, "brighter");
    CHECK(out.sketch.template_text == "{a}");
    REQUIRE(text.requests.size() == 2);
    CHECK(text.requests[1].instruction.find("unknown slot 'b'") != std::string::npos);
  }
  SUBCASE("bounds are enforced") {
    testkit::ScriptedText text;
    const std::string one_option = R"([{"name":"a","label":"A","options":["x"],"default_index":0}])";
    text.push(sketch_reply("{a}", one_option));
    text.push(sketch_reply("{a}", one_option));
    try {
      synthesize_sketch(text, base, std::nullopt, "brighter");
      FAIL("expected SketchSynthesisError");
    } catch (const SketchSynthesisError& e) {
      REQUIRE(e.violations.size() == 1);
      CHECK(e.violations[0].find("1 options") != std::string::npos);
    }
  }
  SUBCASE("image input only when the provider takes it") {
    testkit::ScriptedText text;
    const std::string ok = sketch_reply("{a}", R"([{"name":"a","label":"A","options":["x","y"],"default_index":0}])");
    text.push(ok);
    text.push(ok);
    const Bytes png = encode_png(Image(2, 2));
    CHECK_FALSE(synthesize_sketch(text, base, png, "p").used_image_input);
    text.accepts_images = true;
    CHECK(synthesize_sketch(text, base, png, "p").used_image_input);
    CHECK(text.requests[1].image_input == png);
  }
}

TEST_CASE("failed synthesis is recorded against the tab") {
  Studio st;
  auto text = std::make_shared<testkit::ScriptedText>();
  text->push("{}");
  text->push("{}");
  st.backends.providers.text = text;
  CHECK_THROWS_AS(refine(*st.session, st.backends, st.tab, "p"), SketchSynthesisError);
  const auto log = st.session->events();
  const auto& failed = std::get<events::GenerationFailed>(log.back().payload);
  CHECK(failed.target_id == st.tab);
  CHECK(std::holds_alternative<events::RefinePrompted>(log[log.size() - 2].payload));
}

TEST_CASE("failed variation closes the round as failed") {
  Studio st;
  const auto sk = refine(*st.session, st.backends, st.tab, "make the owl a mascot");
  struct Broken final : ImageProvider {
    Bytes generate(const ImageRequest&) override { throw ProviderError(ProviderErrorKind::Timeout, "slow"); }
    Bytes edit(const Bytes&, const ImageRequest&) override { throw ProviderError(ProviderErrorKind::Timeout, "slow"); }
  };
  st.backends.providers.image = std::make_shared<Broken>();
  CHECK_THROWS_AS(generate_variation(*st.session, st.backends, st.tab, sketch::default_selections(sk)), ProviderError);
  const auto state = st.session->snapshot();
  REQUIRE(state->rounds.size() == 1);
  CHECK(state->rounds[0].failed);
  CHECK_FALSE(state->rounds[0].result_image_id.has_value());
}
