#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocreate/image.hpp"
#include "cocreate/providers.hpp"
#include "cocreate/session.hpp"

namespace cocreate {

class BlobStore;

namespace ideation {

inline constexpr std::array<std::string_view, 4> kAssociationDomains = {
    "artworks", "historical events", "mythology", "metaphors"};

struct IdeationRequest {
  std::string user_prompt;
  std::size_t count = 9;
  std::optional<std::string> extra_context;
  std::vector<std::string> existing_titles;
  IdeationMode mode = IdeationMode::Associative;
};

// Terms that must never reach the model in Plain mode.
std::vector<std::string> association_deny_list();

TextRequest build_ideation_instruction(const IdeationRequest& request);
nlohmann::json idea_set_schema(std::size_t count);

// Validates a provider response. Cards come back without ids. Any problem
// raises SchemaError; a partially valid list is never returned.
std::vector<IdeaCard> parse_ideas(std::string_view response, std::size_t expected_count,
                                  const std::vector<std::string>& excluded_titles = {});

// Calls the provider, with one repair round on SchemaError.
std::vector<IdeaCard> request_ideas(TextProvider& text, const IdeationRequest& request);

struct GridShape {
  std::size_t rows = 3;
  std::size_t cols = 3;
};

// 3 columns and as many rows as needed; 9 ideas give the 3x3 sheet.
GridShape grid_for(std::size_t idea_count);

// Row-major tiles. Column c spans [c*floor(W/cols), (c+1)*floor(W/cols)),
// the last column running to the right edge; rows likewise.
std::vector<Image> slice_grid(const Image& composite, std::size_t rows = 3, std::size_t cols = 3);
std::vector<Image> slice_grid(std::span<const std::uint8_t> png, std::size_t rows = 3,
                              std::size_t cols = 3);

std::string thumbnail_sheet_prompt(std::string_view task_prompt, const std::vector<IdeaCard>& ideas,
                                   GridShape shape);
std::string idea_image_prompt(std::string_view task_prompt, const IdeaCard& idea);
TextRequest explanation_instruction(std::string_view task_prompt, const IdeaCard& idea,
                                    std::string_view image_prompt);
std::string parse_explanation(std::string_view response);

}  // namespace ideation

struct ModelRoster {
  std::string image_model = "gpt-image-1";
  std::string thumbnail_model = "gpt-image-1-mini";
};

// Which quality tier each kind of image is requested at.
struct QualityPolicy {
  Quality idea_image = Quality::Medium;
  Quality variation = Quality::Auto;
  Quality thumbnail_sheet = Quality::Medium;
};

// What the stateful operations need besides the session itself.
struct Backends {
  Providers providers;
  BlobStore* blobs = nullptr;
  ModelRoster models;
  QualityPolicy quality;
  IdeationMode mode = IdeationMode::Associative;
};

namespace ideation {

// Records BrainstormPrompted, asks for `count` ideas, renders and slices
// the thumbnail sheet, then records IdeasGenerated.
std::vector<IdeaCard> brainstorm(SessionHandle& session, Backends& backends,
                                 const std::string& prompt, std::size_t count = 9);
std::vector<IdeaCard> expand_ideas(SessionHandle& session, Backends& backends,
                                   const std::string& extra_context, std::size_t count = 9);

struct IdeaDraft {
  std::string title;
  std::string description;
  std::string background;
  std::vector<std::string> categories;
};

IdeaCard create_idea(SessionHandle& session, const IdeaDraft& draft);

struct IdeaPatch {
  std::optional<std::string> title;
  std::optional<std::string> background;
  std::optional<std::string> description;
  std::optional<std::vector<std::string>> categories;
};

IdeaCard edit_idea(SessionHandle& session, const std::string& idea_id, const IdeaPatch& patch);
void delete_idea(SessionHandle& session, const std::string& idea_id);

ImageRecord generate_idea_image(SessionHandle& session, Backends& backends,
                                const std::string& idea_id);

}  // namespace ideation
}  // namespace cocreate
