#include "cocreate/refinement.hpp"

#include "cocreate/blob_store.hpp"
#include "cocreate/error.hpp"
#include "cocreate/instructions.hpp"

namespace cocreate::refinement {

using nlohmann::json;

std::vector<std::string> check_bounds(const sketch::Sketch& s, const SketchBounds& b) {
  std::vector<std::string> out;
  const auto n = s.parameters.size();
  if (n < b.min_parameters || n > b.max_parameters) {
    out.push_back("sketch has " + std::to_string(n) + " parameters, expected " +
                  std::to_string(b.min_parameters) + "-" + std::to_string(b.max_parameters));
  }
  for (const auto& p : s.parameters) {
    const auto k = p.options.size();
    if (k < b.min_options || k > b.max_options) {
      out.push_back("parameter '" + p.name + "' has " + std::to_string(k) + " options, expected " +
                    std::to_string(b.min_options) + "-" + std::to_string(b.max_options));
    }
  }
  return out;
}

TextRequest sketch_instruction(const std::string& base_prompt, const std::string& refine_prompt,
                               const SketchBounds& b) {
  // Mirrors the wire format; bounds are enforced after parsing as well.
  json param = {{"type", "object"},
                {"required", {"name", "label", "options", "default_index"}},
                {"properties",
                 {{"name", {{"type", "string"}, {"pattern", "^[a-z][a-z0-9_]*$"}}},
                  {"label", {{"type", "string"}}},
                  {"options",
                   {{"type", "array"},
                    {"minItems", b.min_options},
                    {"maxItems", b.max_options},
                    {"items", {{"type", "string"}, {"minLength", 1}}}}},
                  {"default_index", {{"const", 0}}}}}};
  json schema = {{"type", "object"},
                 {"required", {"version", "template", "parameters"}},
                 {"properties",
                  {{"version", {{"const", sketch::kWireVersion}}},
                   {"template", {{"type", "string"}}},
                   {"parameters",
                    {{"type", "array"},
                     {"minItems", b.min_parameters},
                     {"maxItems", b.max_parameters},
                     {"items", param}}}}}};
  const std::string text =
      fill(instruction_assets().at("sketch").get<std::string>(),
           {{"base_prompt", base_prompt},
            {"refine_prompt", refine_prompt},
            {"min_parameters", std::to_string(b.min_parameters)},
            {"max_parameters", std::to_string(b.max_parameters)},
            {"min_options", std::to_string(b.min_options)},
            {"max_options", std::to_string(b.max_options)}});
  return TextRequest{text, "sketch", std::move(schema), std::nullopt};
}

namespace {

// Violations of one response, or the sketch when there are none.
std::variant<sketch::Sketch, std::vector<std::string>> try_parse(const std::string& response,
                                                                 const SketchBounds& b) {
  try {
    auto s = sketch::parse_sketch(response);
    auto violations = check_bounds(s, b);
    if (!violations.empty()) return violations;
    return s;
  } catch (const ValidationError& e) {
    return e.violations;
  } catch (const ParseError& e) {
    return std::vector<std::string>{e.what()};
  }
}

}  // namespace

Synthesis synthesize_sketch(TextProvider& text, const ImageRecord& base,
                            const std::optional<Bytes>& base_png, const std::string& refine_prompt,
                            const SketchBounds& bounds) {
  if (refine_prompt.empty()) throw ValidationError({"refinement prompt must not be empty"});
  TextRequest request = sketch_instruction(base.prompt_used, refine_prompt, bounds);
  Synthesis out;
  if (base_png && text.supports_image_input()) {
    request.image_input = base_png;
    out.used_image_input = true;
  }
  auto first = try_parse(text.generate(request), bounds);
  if (auto* s = std::get_if<sketch::Sketch>(&first)) {
    out.sketch = std::move(*s);
    return out;
  }
  std::string problems;
  for (const auto& v : std::get<std::vector<std::string>>(first)) problems += "- " + v + "\n";
  request.instruction += "\n\n" + fill(instruction_assets().at("sketch_repair").get<std::string>(),
                                       {{"problems", problems}});
  auto second = try_parse(text.generate(request), bounds);
  if (auto* s = std::get_if<sketch::Sketch>(&second)) {
    out.sketch = std::move(*s);
    return out;
  }
  throw SketchSynthesisError(std::get<std::vector<std::string>>(second));
}

namespace {

const Tab& refine_tab_of(const Session& s, const std::string& tab_id) {
  const Tab* tab = s.find_tab(tab_id);
  if (tab == nullptr) throw NotFound("tab", tab_id);
  if (tab->kind != TabKind::Refine) throw ValidationError({"tab " + tab_id + " is not a Refine tab"});
  return *tab;
}

const sketch::Sketch& current_sketch(const Session& s, const Tab& tab) {
  if (!tab.current_sketch_id) {
    throw ValidationError({"tab " + tab.tab_id + " has no sketch yet; send a refinement prompt first"});
  }
  return *s.find_sketch(*tab.current_sketch_id);
}

void record_failure(SessionHandle& session, const std::string& operation,
                    const std::string& target, const std::string& kind, const std::string& detail) {
  session.append(events::GenerationFailed{operation, target, kind, detail});
}

}  // namespace

sketch::Sketch refine(SessionHandle& session, Backends& backends, const std::string& tab_id,
                      const std::string& refine_prompt) {
  if (refine_prompt.empty()) throw ValidationError({"refinement prompt must not be empty"});
  session.append([&](std::uint64_t, const Session& s) -> EventPayload {
    refine_tab_of(s, tab_id);
    return events::RefinePrompted{tab_id, refine_prompt};
  });
  const auto state = session.snapshot();
  const Tab& tab = refine_tab_of(*state, tab_id);
  const ImageRecord& base = *state->find_image(*tab.base_image_id);
  std::optional<Bytes> base_png;
  if (backends.blobs != nullptr) base_png = backends.blobs->get(base.bytes_ref);

  Synthesis result;
  try {
    result = synthesize_sketch(*backends.providers.text, base, base_png, refine_prompt);
  } catch (const ProviderError& e) {
    record_failure(session, "sketch", tab_id, to_string(e.kind), e.what());
    throw;
  } catch (const SketchSynthesisError& e) {
    record_failure(session, "sketch", tab_id, "sketch_invalid", e.what());
    throw;
  }
  session.append([&](std::uint64_t seq, const Session&) -> EventPayload {
    return events::SketchSynthesized{tab_id, session.make_id('k', seq), result.sketch,
                                     result.used_image_input};
  });
  return result.sketch;
}

sketch::Sketch reprompt(SessionHandle& session, Backends& backends, const std::string& tab_id,
                        const std::string& new_refine_prompt) {
  return refine(session, backends, tab_id, new_refine_prompt);
}

sketch::RenderedPrompt preview(const Session& state, const std::string& tab_id,
                               const sketch::Selections& selections,
                               const std::optional<std::string>& manual_edit) {
  const Tab& tab = refine_tab_of(state, tab_id);
  const auto& sk = current_sketch(state, tab);
  if (manual_edit) return sketch::RenderedPrompt{*manual_edit, {}};
  return sketch::render(sk, selections);
}

VariationOutcome generate_variation(SessionHandle& session, Backends& backends,
                                    const std::string& tab_id, const sketch::Selections& selections,
                                    const std::optional<std::string>& manual_edit) {
  if (backends.blobs == nullptr) throw StorageError("no image store configured");
  if (manual_edit && manual_edit->empty()) throw ValidationError({"edited prompt must not be empty"});
  std::string round_id;
  std::string final_prompt;
  std::string base_id;
  {
    // Validate before anything is recorded.
    const auto state = session.snapshot();
    const Tab& tab = refine_tab_of(*state, tab_id);
    sketch::render(current_sketch(*state, tab), selections);
  }
  if (manual_edit) session.append(events::PromptManuallyEdited{tab_id, *manual_edit});
  session.append([&](std::uint64_t seq, const Session& s) -> EventPayload {
    const Tab& tab = refine_tab_of(s, tab_id);
    const auto& sk = current_sketch(s, tab);
    const auto rendered = sketch::render(sk, selections);
    round_id = session.make_id('r', seq);
    final_prompt = manual_edit ? *manual_edit : rendered.text;
    base_id = *tab.base_image_id;
    return events::SelectionsApplied{tab_id,
                                     round_id,
                                     *tab.current_sketch_id,
                                     selections,
                                     manual_edit.has_value(),
                                     final_prompt,
                                     sketch::is_all_defaults(selections) && !manual_edit};
  });

  ImageRecord record;
  record.origin = ImageOrigin{ImageOrigin::Kind::Variation, base_id};
  record.prompt_used = final_prompt;
  record.quality = backends.quality.variation;
  record.tab_id = tab_id;
  try {
    const auto state = session.snapshot();
    const auto base_png = backends.blobs->get(state->find_image(base_id)->bytes_ref);
    if (!base_png) throw StorageError("bytes of base image " + base_id + " are missing");
    const Bytes png = backends.providers.image->edit(
        *base_png, ImageRequest{final_prompt, record.quality, backends.models.image_model, ImagePurpose::Full});
    decode_png(png);
    record.bytes_ref = backends.blobs->put(png);
  } catch (const ProviderError& e) {
    record_failure(session, "variation", round_id, to_string(e.kind), e.what());
    throw;
  } catch (const ImageFormatError& e) {
    record_failure(session, "variation", round_id, "image_format", e.what());
    throw ProviderError(ProviderErrorKind::SchemaViolation, e.what(), false);
  }
  session.append([&](std::uint64_t seq, const Session&) -> EventPayload {
    record.image_id = session.make_id('m', seq);
    return events::VariationGenerated{tab_id, round_id, record};
  });
  return VariationOutcome{*session.snapshot()->find_round(round_id), record};
}

}  // namespace cocreate::refinement
