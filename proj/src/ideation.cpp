#include "cocreate/ideation.hpp"

#include <algorithm>
#include <set>

#include "cocreate/blob_store.hpp"
#include "cocreate/error.hpp"
#include "cocreate/instructions.hpp"

namespace cocreate::ideation {

using nlohmann::json;

namespace {

const json& ideation_assets() { return instruction_assets().at("ideation"); }

std::string asset(const json& node, const char* key) { return node.at(key).get<std::string>(); }

}  // namespace

std::vector<std::string> association_deny_list() {
  return ideation_assets().at("deny_list").get<std::vector<std::string>>();
}

json idea_set_schema(std::size_t count) {
  const json text = {{"type", "string"}, {"minLength", 1}};
  json item = {{"type", "object"},
               {"required", {"title", "background", "description", "categories"}},
               {"additionalProperties", false},
               {"properties",
                {{"title", text},
                 {"background", {{"type", "string"}}},
                 {"description", text},
                 {"categories", {{"type", "array"}, {"minItems", 1}, {"items", text}}}}}};
  return {{"type", "object"},
          {"required", {"ideas"}},
          {"additionalProperties", false},
          {"properties",
           {{"ideas",
             {{"type", "array"}, {"minItems", count}, {"maxItems", count}, {"items", item}}}}}};
}

TextRequest build_ideation_instruction(const IdeationRequest& req) {
  const auto& a = ideation_assets();
  std::string text = fill(asset(a, req.mode == IdeationMode::Associative ? "associative" : "plain"),
                          {{"user_prompt", req.user_prompt}, {"count", std::to_string(req.count)}});
  if (req.extra_context && !req.extra_context->empty()) {
    text += "\n\n" + fill(asset(a, "context_block"), {{"context", *req.extra_context}});
  }
  if (!req.existing_titles.empty()) {
    std::string titles;
    for (const auto& t : req.existing_titles) titles += "- " + t + "\n";
    titles.pop_back();
    text += "\n\n" + fill(asset(a, "exclusion_block"), {{"titles", titles}});
  }
  return TextRequest{std::move(text), "idea_set", idea_set_schema(req.count), std::nullopt};
}

std::vector<IdeaCard> parse_ideas(std::string_view response, std::size_t expected_count,
                                  const std::vector<std::string>& excluded_titles) {
  json doc;
  try {
    doc = json::parse(response);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("ideas") || !doc["ideas"].is_array()) {
    throw SchemaError("response must be an object with an 'ideas' array", std::nullopt,
                      std::nullopt, std::nullopt, "ideas");
  }
  const auto& ideas = doc["ideas"];
  if (ideas.size() != expected_count) {
    throw SchemaError("wrong number of ideas", expected_count, ideas.size());
  }

  const std::set<std::string> excluded(excluded_titles.begin(), excluded_titles.end());
  std::set<std::string> seen;
  std::vector<IdeaCard> cards;
  for (std::size_t i = 0; i < ideas.size(); ++i) {
    const auto& item = ideas[i];
    auto fail = [&](const std::string& field, const std::string& why) {
      throw SchemaError("idea " + std::to_string(i) + " field '" + field + "' " + why,
                        std::nullopt, std::nullopt, i, field);
    };
    if (!item.is_object()) fail("idea", "is not an object");
    auto text_field = [&](const char* name, bool non_empty) {
      if (!item.contains(name) || !item[name].is_string()) fail(name, "is missing");
      auto value = item[name].get<std::string>();
      if (non_empty && value.empty()) fail(name, "is empty");
      return value;
    };
    IdeaCard card;
    card.title = text_field("title", true);
    card.background = text_field("background", false);
    card.description = text_field("description", true);
    if (!item.contains("categories") || !item["categories"].is_array()) {
      fail("categories", "is missing");
    }
    for (const auto& tag : item["categories"]) {
      if (!tag.is_string() || tag.get<std::string>().empty()) fail("categories", "holds an invalid tag");
      card.categories.push_back(tag.get<std::string>());
    }
    if (card.categories.empty()) fail("categories", "is empty");
    if (excluded.contains(card.title)) fail("title", "repeats an existing idea");
    if (!seen.insert(card.title).second) fail("title", "is duplicated");
    card.provenance = Provenance::ModelGenerated;
    cards.push_back(std::move(card));
  }
  return cards;
}

std::vector<IdeaCard> request_ideas(TextProvider& text, const IdeationRequest& req) {
  const TextRequest first = build_ideation_instruction(req);
  try {
    return parse_ideas(text.generate(first), req.count, req.existing_titles);
  } catch (const SchemaError& e) {
    TextRequest repair = first;
    repair.instruction += "\n\n" + fill(asset(ideation_assets(), "repair"),
                                        {{"problem", e.what()}, {"count", std::to_string(req.count)}});
    return parse_ideas(text.generate(repair), req.count, req.existing_titles);
  }
}

GridShape grid_for(std::size_t idea_count) {
  return GridShape{std::max<std::size_t>(1, (idea_count + 2) / 3), 3};
}

std::vector<Image> slice_grid(const Image& composite, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || composite.width() < cols || composite.height() < rows) {
    throw RangeError("composite of " + std::to_string(composite.width()) + "x" +
                     std::to_string(composite.height()) + " cannot be cut into " +
                     std::to_string(rows) + "x" + std::to_string(cols) + " tiles");
  }
  const std::size_t tile_w = composite.width() / cols;
  const std::size_t tile_h = composite.height() / rows;
  std::vector<Image> tiles;
  tiles.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t y = r * tile_h;
    const std::size_t h = r + 1 == rows ? composite.height() - y : tile_h;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t x = c * tile_w;
      const std::size_t w = c + 1 == cols ? composite.width() - x : tile_w;
      tiles.push_back(composite.crop(x, y, w, h));
    }
  }
  return tiles;
}

std::vector<Image> slice_grid(std::span<const std::uint8_t> png, std::size_t rows, std::size_t cols) {
  return slice_grid(decode_png(png).image, rows, cols);
}

std::string thumbnail_sheet_prompt(std::string_view task_prompt, const std::vector<IdeaCard>& ideas,
                                   GridShape shape) {
  std::string tiles;
  for (std::size_t i = 0; i < ideas.size(); ++i) {
    tiles += std::to_string(i + 1) + ". " + ideas[i].title + ": " + ideas[i].description + "\n";
  }
  if (!tiles.empty()) tiles.pop_back();
  return fill(asset(instruction_assets(), "thumbnail_sheet"),
              {{"rows", std::to_string(shape.rows)},
               {"cols", std::to_string(shape.cols)},
               {"task_prompt", std::string(task_prompt)},
               {"tiles", tiles}});
}

std::string idea_image_prompt(std::string_view task_prompt, const IdeaCard& idea) {
  return fill(asset(instruction_assets(), "idea_image"),
              {{"task_prompt", std::string(task_prompt)},
               {"title", idea.title},
               {"description", idea.description},
               {"background", idea.background}});
}

TextRequest explanation_instruction(std::string_view task_prompt, const IdeaCard& idea,
                                    std::string_view image_prompt) {
  json schema = {{"type", "object"},
                 {"required", {"explanation"}},
                 {"properties", {{"explanation", {{"type", "string"}, {"minLength", 1}}}}}};
  return TextRequest{fill(asset(instruction_assets(), "explanation"),
                          {{"task_prompt", std::string(task_prompt)},
                           {"title", idea.title},
                           {"description", idea.description},
                           {"image_prompt", std::string(image_prompt)}}),
                     "image_explanation", std::move(schema), std::nullopt};
}

std::string parse_explanation(std::string_view response) {
  try {
    const json doc = json::parse(response);
    auto text = doc.at("explanation").get<std::string>();
    if (text.empty()) throw SchemaError("explanation is empty", std::nullopt, std::nullopt, std::nullopt, "explanation");
    return text;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad explanation response: ") + e.what(), std::nullopt,
                      std::nullopt, std::nullopt, "explanation");
  }
}

// ---- session operations ----------------------------------------------------

namespace {

std::string design_goal(const Session& s) {
  if (!s.task_prompt.empty()) return s.task_prompt;
  return s.brainstorm_prompts.empty() ? std::string() : s.brainstorm_prompts.back();
}

std::vector<std::string> titles_of(const Session& s) {
  std::vector<std::string> out;
  for (const auto& c : s.ideas) out.push_back(c.title);
  return out;
}

void record_failure(SessionHandle& session, const std::string& operation,
                    const std::string& target, const std::exception& e) {
  std::string kind = "error";
  if (const auto* pe = dynamic_cast<const ProviderError*>(&e)) kind = to_string(pe->kind);
  if (dynamic_cast<const SchemaError*>(&e) != nullptr) kind = "schema";
  session.append(events::GenerationFailed{operation, target, kind, e.what()});
}

// Thumbnails are best effort: a failed sheet leaves the cards without
// visuals and records the failure.
void attach_thumbnails(SessionHandle& session, Backends& backends, std::string_view goal,
                       std::vector<IdeaCard>& cards) {
  if (cards.empty() || backends.blobs == nullptr) return;
  const GridShape shape = grid_for(cards.size());
  try {
    const Bytes sheet = backends.providers.image->generate(
        ImageRequest{thumbnail_sheet_prompt(goal, cards, shape), backends.quality.thumbnail_sheet,
                     backends.models.thumbnail_model, ImagePurpose::ThumbnailSheet});
    const auto tiles = slice_grid(sheet, shape.rows, shape.cols);
    for (std::size_t i = 0; i < cards.size(); ++i) {
      cards[i].visual_ref = backends.blobs->put(encode_png(tiles[i]));
    }
  } catch (const ProviderError& e) {
    record_failure(session, "thumbnail_sheet", session.id(), e);
  } catch (const ImageFormatError& e) {
    record_failure(session, "thumbnail_sheet", session.id(), e);
  }
}

std::vector<IdeaCard> generate_batch(SessionHandle& session, Backends& backends,
                                     const IdeationRequest& req, const std::string& operation) {
  std::vector<IdeaCard> cards;
  try {
    cards = request_ideas(*backends.providers.text, req);
  } catch (const ProviderError& e) {
    record_failure(session, operation, session.id(), e);
    throw;
  } catch (const SchemaError& e) {
    record_failure(session, operation, session.id(), e);
    throw;
  }
  attach_thumbnails(session, backends, req.user_prompt, cards);
  return cards;
}

void assign_ids(SessionHandle& session, std::vector<IdeaCard>& cards, std::uint64_t seq) {
  for (std::size_t k = 0; k < cards.size(); ++k) cards[k].idea_id = session.make_id('i', seq, k + 1);
}

}  // namespace

std::vector<IdeaCard> brainstorm(SessionHandle& session, Backends& backends,
                                 const std::string& prompt, std::size_t count) {
  if (count == 0) throw RangeError("idea count must be at least 1");
  session.append(events::BrainstormPrompted{prompt, backends.mode, count});
  IdeationRequest req{prompt, count, std::nullopt, titles_of(*session.snapshot()), backends.mode};
  auto cards = generate_batch(session, backends, req, "brainstorm");
  session.append([&](std::uint64_t seq, const Session&) -> EventPayload {
    assign_ids(session, cards, seq);
    return events::IdeasGenerated{cards};
  });
  return cards;
}

std::vector<IdeaCard> expand_ideas(SessionHandle& session, Backends& backends,
                                   const std::string& extra_context, std::size_t count) {
  if (count == 0) throw RangeError("idea count must be at least 1");
  const auto state = session.snapshot();
  if (state->brainstorm_prompts.empty()) {
    throw IntegrityError("expand requires a prior brainstorm");
  }
  IdeationRequest req{state->brainstorm_prompts.back(), count,
                      extra_context.empty() ? std::nullopt : std::optional(extra_context),
                      titles_of(*state), backends.mode};
  auto cards = generate_batch(session, backends, req, "expand");
  session.append([&](std::uint64_t seq, const Session& s) -> EventPayload {
    // Cards added while the provider was busy are excluded as well.
    for (const auto& c : cards) {
      if (std::any_of(s.ideas.begin(), s.ideas.end(), [&](const IdeaCard& e) { return e.title == c.title; })) {
        throw SchemaError("expanded idea repeats '" + c.title + "'", std::nullopt, std::nullopt,
                          std::nullopt, "title");
      }
    }
    assign_ids(session, cards, seq);
    return events::IdeasExpanded{extra_context, cards};
  });
  return cards;
}

IdeaCard create_idea(SessionHandle& session, const IdeaDraft& draft) {
  std::vector<std::string> problems;
  if (draft.title.empty()) problems.push_back("title must not be empty");
  if (draft.description.empty()) problems.push_back("description must not be empty");
  if (!problems.empty()) throw ValidationError(std::move(problems));
  IdeaCard card;
  session.append([&](std::uint64_t seq, const Session&) -> EventPayload {
    card = IdeaCard{session.make_id('i', seq), draft.title, draft.background, draft.description,
                    draft.categories, std::nullopt, Provenance::UserCreated};
    return events::IdeaCreated{card};
  });
  return card;
}

IdeaCard edit_idea(SessionHandle& session, const std::string& idea_id, const IdeaPatch& patch) {
  std::vector<std::string> problems;
  if (!patch.title && !patch.background && !patch.description && !patch.categories) {
    problems.push_back("edit changes nothing");
  }
  if (patch.title && patch.title->empty()) problems.push_back("title must not be empty");
  if (patch.description && patch.description->empty()) problems.push_back("description must not be empty");
  if (!problems.empty()) throw ValidationError(std::move(problems));
  session.append([&](std::uint64_t, const Session& s) -> EventPayload {
    if (s.find_idea(idea_id) == nullptr) throw NotFound("idea", idea_id);
    return events::IdeaEdited{idea_id, patch.title, patch.background, patch.description, patch.categories};
  });
  return *session.snapshot()->find_idea(idea_id);
}

void delete_idea(SessionHandle& session, const std::string& idea_id) {
  session.append([&](std::uint64_t, const Session& s) -> EventPayload {
    if (s.find_idea(idea_id) == nullptr) throw NotFound("idea", idea_id);
    return events::IdeaDeleted{idea_id};
  });
}

ImageRecord generate_idea_image(SessionHandle& session, Backends& backends,
                                const std::string& idea_id) {
  const auto state = session.snapshot();
  const IdeaCard* idea = state->find_idea(idea_id);
  if (idea == nullptr) throw NotFound("idea", idea_id);
  if (backends.blobs == nullptr) throw StorageError("no image store configured");

  const std::string goal = design_goal(*state);
  ImageRecord record;
  record.origin = ImageOrigin{ImageOrigin::Kind::FromIdea, idea_id};
  record.prompt_used = idea_image_prompt(goal, *idea);
  record.quality = backends.quality.idea_image;
  record.tab_id = state->brainstorm_tab().tab_id;
  try {
    const Bytes png = backends.providers.image->generate(
        ImageRequest{record.prompt_used, record.quality, backends.models.image_model, ImagePurpose::Full});
    decode_png(png);
    record.explanation = parse_explanation(backends.providers.text->generate(
        explanation_instruction(goal, *idea, record.prompt_used)));
    record.bytes_ref = backends.blobs->put(png);
  } catch (const ProviderError& e) {
    record_failure(session, "idea_image", idea_id, e);
    throw;
  } catch (const SchemaError& e) {
    record_failure(session, "idea_image", idea_id, e);
    throw;
  } catch (const ImageFormatError& e) {
    record_failure(session, "idea_image", idea_id, e);
    throw ProviderError(ProviderErrorKind::SchemaViolation, e.what(), false);
  }
  session.append([&](std::uint64_t seq, const Session& s) -> EventPayload {
    if (s.find_idea(idea_id) == nullptr) throw NotFound("idea", idea_id);
    record.image_id = session.make_id('m', seq);
    return events::IdeaImageGenerated{record};
  });
  return record;
}

}  // namespace cocreate::ideation
