// JSON encoding for session-core records and events.
#include <array>
#include <sstream>

#include "cocreate/error.hpp"
#include "cocreate/session.hpp"

namespace cocreate {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

const char* to_string(Quality q) { return q == Quality::Medium ? "Medium" : "Auto"; }
const char* to_string(TabKind k) { return k == TabKind::Brainstorm ? "Brainstorm" : "Refine"; }
const char* to_string(IdeationMode m) {
  return m == IdeationMode::Associative ? "Associative" : "Plain";
}
const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::ModelGenerated: return "ModelGenerated";
    case Provenance::UserCreated: return "UserCreated";
    case Provenance::UserEdited: return "UserEdited";
  }
  return "ModelGenerated";
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw IntegrityError("malformed event: " + what); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) bad(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::string str(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) bad(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> opt_str(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return str(j, key);
}

bool boolean(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_boolean()) bad(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<std::string> str_list(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_array()) bad(std::string("field '") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) bad(std::string("field '") + key + "' must hold strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::array<Enum, N>& values) {
  for (auto v : values) {
    if (text == to_string(v)) return v;
  }
  bad("unknown enum value '" + text + "'");
}

Quality parse_quality(const std::string& s) {
  return parse_enum(s, std::array{Quality::Medium, Quality::Auto});
}
Provenance parse_provenance(const std::string& s) {
  return parse_enum(s, std::array{Provenance::ModelGenerated, Provenance::UserCreated,
                                  Provenance::UserEdited});
}
IdeationMode parse_mode(const std::string& s) {
  return parse_enum(s, std::array{IdeationMode::Associative, IdeationMode::Plain});
}

ojson opt(const std::optional<std::string>& v) { return v ? ojson(*v) : ojson(nullptr); }

}  // namespace

ojson idea_to_json(const IdeaCard& c) {
  ojson j;
  j["idea_id"] = c.idea_id;
  j["title"] = c.title;
  j["background"] = c.background;
  j["description"] = c.description;
  j["categories"] = c.categories;
  j["visual_ref"] = opt(c.visual_ref);
  j["provenance"] = to_string(c.provenance);
  return j;
}

IdeaCard idea_from_json(const json& j) {
  IdeaCard c;
  c.idea_id = str(j, "idea_id");
  c.title = str(j, "title");
  c.background = str(j, "background");
  c.description = str(j, "description");
  c.categories = str_list(j, "categories");
  c.visual_ref = opt_str(j, "visual_ref");
  c.provenance = parse_provenance(str(j, "provenance"));
  return c;
}

ojson image_to_json(const ImageRecord& r) {
  ojson j;
  j["image_id"] = r.image_id;
  j["origin"] = ojson{{"kind", r.origin.kind == ImageOrigin::Kind::FromIdea ? "FromIdea" : "Variation"},
                      {"ref", r.origin.ref}};
  j["prompt_used"] = r.prompt_used;
  j["explanation"] = opt(r.explanation);
  j["quality"] = to_string(r.quality);
  j["tab_id"] = r.tab_id;
  j["bytes_ref"] = r.bytes_ref;
  j["downloaded"] = r.downloaded;
  return j;
}

ImageRecord image_from_json(const json& j) {
  ImageRecord r;
  r.image_id = str(j, "image_id");
  const auto& origin = field(j, "origin");
  const auto kind = str(origin, "kind");
  if (kind == "FromIdea") {
    r.origin.kind = ImageOrigin::Kind::FromIdea;
  } else if (kind == "Variation") {
    r.origin.kind = ImageOrigin::Kind::Variation;
  } else {
    bad("unknown origin kind '" + kind + "'");
  }
  r.origin.ref = str(origin, "ref");
  r.prompt_used = str(j, "prompt_used");
  r.explanation = opt_str(j, "explanation");
  r.quality = parse_quality(str(j, "quality"));
  r.tab_id = str(j, "tab_id");
  r.bytes_ref = str(j, "bytes_ref");
  r.downloaded = j.contains("downloaded") ? boolean(j, "downloaded") : false;
  return r;
}

namespace {

ojson ideas_to_json(const std::vector<IdeaCard>& ideas) {
  ojson arr = ojson::array();
  for (const auto& c : ideas) arr.push_back(idea_to_json(c));
  return arr;
}

std::vector<IdeaCard> ideas_from_json(const json& j, const char* key) {
  const auto& arr = field(j, key);
  if (!arr.is_array()) bad("ideas must be an array");
  std::vector<IdeaCard> out;
  for (const auto& item : arr) out.push_back(idea_from_json(item));
  return out;
}

struct PayloadEncoder {
  ojson operator()(const events::SessionCreated& e) const {
    return {{"session_id", e.session_id},
            {"task_prompt", e.task_prompt},
            {"brainstorm_tab_id", e.brainstorm_tab_id}};
  }
  ojson operator()(const events::BrainstormPrompted& e) const {
    return {{"prompt", e.prompt}, {"mode", to_string(e.mode)}, {"count", e.count}};
  }
  ojson operator()(const events::IdeasGenerated& e) const {
    return {{"ideas", ideas_to_json(e.ideas)}};
  }
  ojson operator()(const events::IdeaCreated& e) const { return {{"idea", idea_to_json(e.idea)}}; }
  ojson operator()(const events::IdeaEdited& e) const {
    ojson j;
    j["idea_id"] = e.idea_id;
    if (e.title) j["title"] = *e.title;
    if (e.background) j["background"] = *e.background;
    if (e.description) j["description"] = *e.description;
    if (e.categories) j["categories"] = *e.categories;
    return j;
  }
  ojson operator()(const events::IdeaDeleted& e) const { return {{"idea_id", e.idea_id}}; }
  ojson operator()(const events::IdeasExpanded& e) const {
    return {{"extra_context", e.extra_context}, {"ideas", ideas_to_json(e.ideas)}};
  }
  ojson operator()(const events::IdeaImageGenerated& e) const {
    return {{"image", image_to_json(e.image)}};
  }
  ojson operator()(const events::RefineTabOpened& e) const {
    return {{"tab_id", e.tab_id}, {"base_image_id", e.base_image_id}};
  }
  ojson operator()(const events::RefinePrompted& e) const {
    return {{"tab_id", e.tab_id}, {"refine_prompt", e.refine_prompt}};
  }
  ojson operator()(const events::SketchSynthesized& e) const {
    return {{"tab_id", e.tab_id},
            {"sketch_id", e.sketch_id},
            {"sketch", sketch::sketch_to_json(e.sketch)},
            {"used_image_input", e.used_image_input}};
  }
  ojson operator()(const events::SelectionsApplied& e) const {
    return {{"tab_id", e.tab_id},
            {"round_id", e.round_id},
            {"sketch_id", e.sketch_id},
            {"selections", sketch::selections_to_json(e.selections)},
            {"prompt_manually_edited", e.prompt_manually_edited},
            {"final_prompt", e.final_prompt},
            {"used_defaults", e.used_defaults}};
  }
  ojson operator()(const events::VariationGenerated& e) const {
    return {{"tab_id", e.tab_id}, {"round_id", e.round_id}, {"image", image_to_json(e.image)}};
  }
  ojson operator()(const events::PromptManuallyEdited& e) const {
    return {{"tab_id", e.tab_id}, {"text", e.text}};
  }
  ojson operator()(const events::ImageDownloaded& e) const { return {{"image_id", e.image_id}}; }
  ojson operator()(const events::GenerationFailed& e) const {
    return {{"operation", e.operation},
            {"target_id", e.target_id},
            {"error_kind", e.error_kind},
            {"detail", e.detail}};
  }
};

template <std::size_t I = 0>
EventPayload decode_payload(std::string_view kind, const json& p) {
  if constexpr (I == std::variant_size_v<EventPayload>) {
    bad("unknown event kind '" + std::string(kind) + "'");
  } else {
    using T = std::variant_alternative_t<I, EventPayload>;
    if (kind_name(EventPayload(std::in_place_index<I>)) != kind) return decode_payload<I + 1>(kind, p);
    if constexpr (std::is_same_v<T, events::SessionCreated>) {
      return T{str(p, "session_id"), str(p, "task_prompt"), str(p, "brainstorm_tab_id")};
    } else if constexpr (std::is_same_v<T, events::BrainstormPrompted>) {
      const auto& count = field(p, "count");
      if (!count.is_number_unsigned()) bad("count must be a non-negative integer");
      return T{str(p, "prompt"), parse_mode(str(p, "mode")), count.get<std::size_t>()};
    } else if constexpr (std::is_same_v<T, events::IdeasGenerated>) {
      return T{ideas_from_json(p, "ideas")};
    } else if constexpr (std::is_same_v<T, events::IdeaCreated>) {
      return T{idea_from_json(field(p, "idea"))};
    } else if constexpr (std::is_same_v<T, events::IdeaEdited>) {
      T e;
      e.idea_id = str(p, "idea_id");
      e.title = opt_str(p, "title");
      e.background = opt_str(p, "background");
      e.description = opt_str(p, "description");
      if (p.contains("categories")) e.categories = str_list(p, "categories");
      return e;
    } else if constexpr (std::is_same_v<T, events::IdeaDeleted>) {
      return T{str(p, "idea_id")};
    } else if constexpr (std::is_same_v<T, events::IdeasExpanded>) {
      return T{str(p, "extra_context"), ideas_from_json(p, "ideas")};
    } else if constexpr (std::is_same_v<T, events::IdeaImageGenerated>) {
      return T{image_from_json(field(p, "image"))};
    } else if constexpr (std::is_same_v<T, events::RefineTabOpened>) {
      return T{str(p, "tab_id"), str(p, "base_image_id")};
    } else if constexpr (std::is_same_v<T, events::RefinePrompted>) {
      return T{str(p, "tab_id"), str(p, "refine_prompt")};
    } else if constexpr (std::is_same_v<T, events::SketchSynthesized>) {
      sketch::Sketch s;
      try {
        s = sketch::sketch_from_json(field(p, "sketch"));
      } catch (const ValidationError& e) {
        bad(std::string("invalid sketch: ") + e.what());
      }
      return T{str(p, "tab_id"), str(p, "sketch_id"), std::move(s), boolean(p, "used_image_input")};
    } else if constexpr (std::is_same_v<T, events::SelectionsApplied>) {
      sketch::Selections sel;
      try {
        sel = sketch::selections_from_json(field(p, "selections"));
      } catch (const SelectionError& e) {
        bad(e.what());
      }
      return T{str(p, "tab_id"),       str(p, "round_id"),
               str(p, "sketch_id"),    std::move(sel),
               boolean(p, "prompt_manually_edited"), str(p, "final_prompt"),
               boolean(p, "used_defaults")};
    } else if constexpr (std::is_same_v<T, events::VariationGenerated>) {
      return T{str(p, "tab_id"), str(p, "round_id"), image_from_json(field(p, "image"))};
    } else if constexpr (std::is_same_v<T, events::PromptManuallyEdited>) {
      return T{str(p, "tab_id"), str(p, "text")};
    } else if constexpr (std::is_same_v<T, events::ImageDownloaded>) {
      return T{str(p, "image_id")};
    } else {
      static_assert(std::is_same_v<T, events::GenerationFailed>);
      return T{str(p, "operation"), str(p, "target_id"), str(p, "error_kind"), str(p, "detail")};
    }
  }
}

}  // namespace

std::string_view kind_name(const EventPayload& payload) {
  static constexpr std::array<std::string_view, std::variant_size_v<EventPayload>> kNames = {
      "SessionCreated",    "BrainstormPrompted", "IdeasGenerated",      "IdeaCreated",
      "IdeaEdited",        "IdeaDeleted",        "IdeasExpanded",       "IdeaImageGenerated",
      "RefineTabOpened",   "RefinePrompted",     "SketchSynthesized",   "SelectionsApplied",
      "VariationGenerated", "PromptManuallyEdited", "ImageDownloaded",  "GenerationFailed"};
  return kNames[payload.index()];
}

ojson event_to_json(const Event& e) {
  ojson j;
  j["seq"] = e.seq;
  j["at"] = e.at;
  j["kind"] = kind_name(e.payload);
  j["payload"] = std::visit(PayloadEncoder{}, e.payload);
  return j;
}

Event event_from_json(const json& j) {
  if (!j.is_object()) bad("event is not an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "seq" && key != "at" && key != "kind" && key != "payload") {
      bad("unexpected event field '" + key + "'");
    }
  }
  const auto& seq = field(j, "seq");
  if (!seq.is_number_unsigned()) bad("seq must be a non-negative integer");
  Event e;
  e.seq = seq.get<std::uint64_t>();
  e.at = str(j, "at");
  e.payload = decode_payload(str(j, "kind"), field(j, "payload"));
  return e;
}

std::string to_jsonl(const std::vector<Event>& log) {
  std::string out;
  for (const auto& e : log) {
    out += event_to_json(e).dump();
    out += '\n';
  }
  return out;
}

std::vector<Event> parse_jsonl(std::string_view text) {
  std::vector<Event> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), e.byte);
    }
    out.push_back(event_from_json(doc));
  }
  return out;
}

ojson tab_to_json(const Tab& t) {
  return {{"tab_id", t.tab_id},
          {"kind", to_string(t.kind)},
          {"base_image_id", opt(t.base_image_id)},
          {"current_sketch_id", opt(t.current_sketch_id)},
          {"refine_prompt_history", t.refine_prompt_history}};
}

ojson round_to_json(const RefinementRound& r) {
  return {{"round_id", r.round_id},
          {"tab_id", r.tab_id},
          {"refine_prompt", r.refine_prompt},
          {"sketch_id", r.sketch_id},
          {"selections_used", sketch::selections_to_json(r.selections_used)},
          {"prompt_manually_edited", r.prompt_manually_edited},
          {"final_prompt", r.final_prompt},
          {"result_image_id", opt(r.result_image_id)},
          {"used_defaults", r.used_defaults()},
          {"failed", r.failed}};
}

ojson state_to_json(const Session& s, bool with_timestamps) {
  ojson j;
  j["session_id"] = s.session_id;
  if (with_timestamps) j["created_at"] = s.created_at;
  j["task_prompt"] = s.task_prompt;
  j["last_seq"] = s.last_seq;
  j["brainstorm_prompts"] = s.brainstorm_prompts;
  ojson tabs = ojson::array();
  for (const auto& t : s.tabs) {
    tabs.push_back(tab_to_json(t));
  }
  j["tabs"] = std::move(tabs);
  j["ideas"] = ideas_to_json(s.ideas);
  ojson images = ojson::array();
  for (const auto& r : s.images) images.push_back(image_to_json(r));
  j["images"] = std::move(images);
  ojson sketches = ojson::object();
  for (const auto& [id, sk] : s.sketches) sketches[id] = sketch::sketch_to_json(sk);
  j["sketches"] = std::move(sketches);
  ojson rounds = ojson::array();
  for (const auto& r : s.rounds) {
    rounds.push_back(round_to_json(r));
  }
  j["rounds"] = std::move(rounds);
  return j;
}

}  // namespace cocreate
