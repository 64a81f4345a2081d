#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocreate/sketch.hpp"

namespace cocreate {

enum class Quality { Medium, Auto };
enum class TabKind { Brainstorm, Refine };
enum class Provenance { ModelGenerated, UserCreated, UserEdited };
enum class IdeationMode { Associative, Plain };

const char* to_string(Quality q);
const char* to_string(TabKind k);
const char* to_string(Provenance p);
const char* to_string(IdeationMode m);

struct IdeaCard {
  std::string idea_id;
  std::string title;
  std::string background;
  std::string description;
  std::vector<std::string> categories;
  std::optional<std::string> visual_ref;
  Provenance provenance = Provenance::ModelGenerated;

  bool operator==(const IdeaCard&) const = default;
};

struct ImageOrigin {
  enum class Kind { FromIdea, Variation } kind = Kind::FromIdea;
  std::string ref;  // idea id for FromIdea, parent image id for Variation

  bool operator==(const ImageOrigin&) const = default;
};

struct ImageRecord {
  std::string image_id;
  ImageOrigin origin;
  std::string prompt_used;
  std::optional<std::string> explanation;
  Quality quality = Quality::Medium;
  std::string tab_id;
  std::string bytes_ref;
  bool downloaded = false;

  bool operator==(const ImageRecord&) const = default;
};

struct Tab {
  std::string tab_id;
  TabKind kind = TabKind::Brainstorm;
  std::optional<std::string> base_image_id;
  std::optional<std::string> current_sketch_id;
  std::vector<std::string> refine_prompt_history;

  bool operator==(const Tab&) const = default;
};

struct RefinementRound {
  std::string round_id;
  std::string tab_id;
  std::string refine_prompt;
  std::string sketch_id;
  sketch::Selections selections_used;
  bool prompt_manually_edited = false;
  std::string final_prompt;
  std::optional<std::string> result_image_id;
  bool failed = false;

  bool used_defaults() const {
    return sketch::is_all_defaults(selections_used) && !prompt_manually_edited;
  }
  bool operator==(const RefinementRound&) const = default;
};

// ---- events ---------------------------------------------------------------

namespace events {

struct SessionCreated {
  std::string session_id;
  std::string task_prompt;
  std::string brainstorm_tab_id;
};
struct BrainstormPrompted {
  std::string prompt;
  IdeationMode mode = IdeationMode::Associative;
  std::size_t count = 9;
};
struct IdeasGenerated {
  std::vector<IdeaCard> ideas;
};
struct IdeaCreated {
  IdeaCard idea;
};
struct IdeaEdited {
  std::string idea_id;
  std::optional<std::string> title;
  std::optional<std::string> background;
  std::optional<std::string> description;
  std::optional<std::vector<std::string>> categories;
};
struct IdeaDeleted {
  std::string idea_id;
};
struct IdeasExpanded {
  std::string extra_context;
  std::vector<IdeaCard> ideas;
};
struct IdeaImageGenerated {
  ImageRecord image;
};
struct RefineTabOpened {
  std::string tab_id;
  std::string base_image_id;
};
struct RefinePrompted {
  std::string tab_id;
  std::string refine_prompt;
};
struct SketchSynthesized {
  std::string tab_id;
  std::string sketch_id;
  sketch::Sketch sketch;
  bool used_image_input = false;
};
struct SelectionsApplied {
  std::string tab_id;
  std::string round_id;
  std::string sketch_id;
  sketch::Selections selections;
  bool prompt_manually_edited = false;
  std::string final_prompt;
  bool used_defaults = false;
};
struct VariationGenerated {
  std::string tab_id;
  std::string round_id;
  ImageRecord image;
};
struct PromptManuallyEdited {
  std::string tab_id;
  std::string text;
};
struct ImageDownloaded {
  std::string image_id;
};
// A provider call that did not produce its result. `target_id` is the idea,
// tab or round the attempt was for.
struct GenerationFailed {
  std::string operation;
  std::string target_id;
  std::string error_kind;
  std::string detail;
};

}  // namespace events

using EventPayload =
    std::variant<events::SessionCreated, events::BrainstormPrompted, events::IdeasGenerated,
                 events::IdeaCreated, events::IdeaEdited, events::IdeaDeleted,
                 events::IdeasExpanded, events::IdeaImageGenerated, events::RefineTabOpened,
                 events::RefinePrompted, events::SketchSynthesized, events::SelectionsApplied,
                 events::VariationGenerated, events::PromptManuallyEdited,
                 events::ImageDownloaded, events::GenerationFailed>;

struct Event {
  std::uint64_t seq = 0;
  std::string at;  // RFC 3339, UTC
  EventPayload payload;
};

std::string_view kind_name(const EventPayload& payload);

nlohmann::ordered_json idea_to_json(const IdeaCard& card);
IdeaCard idea_from_json(const nlohmann::json& doc);
nlohmann::ordered_json image_to_json(const ImageRecord& record);
ImageRecord image_from_json(const nlohmann::json& doc);

nlohmann::ordered_json tab_to_json(const Tab& tab);
nlohmann::ordered_json round_to_json(const RefinementRound& round);
nlohmann::ordered_json event_to_json(const Event& event);
Event event_from_json(const nlohmann::json& doc);

// One JSON object per line, newline terminated.
std::string to_jsonl(const std::vector<Event>& log);
std::vector<Event> parse_jsonl(std::string_view text);

// ---- state ----------------------------------------------------------------

struct Session {
  std::string session_id;
  std::string created_at;
  std::string task_prompt;
  std::vector<Tab> tabs;
  std::vector<ImageRecord> images;
  std::vector<IdeaCard> ideas;
  std::map<std::string, sketch::Sketch> sketches;
  std::vector<RefinementRound> rounds;
  std::vector<std::string> brainstorm_prompts;
  std::uint64_t last_seq = 0;

  const Tab* find_tab(std::string_view id) const;
  const ImageRecord* find_image(std::string_view id) const;
  const IdeaCard* find_idea(std::string_view id) const;
  const RefinementRound* find_round(std::string_view id) const;
  const sketch::Sketch* find_sketch(std::string_view id) const;
  const Tab& brainstorm_tab() const;
};

// Folds one event into a new state. Throws SequenceError or IntegrityError.
Session apply_event(const Session& state, const Event& event);
Session replay(const std::vector<Event>& log);

// Canonical JSON of the derived state. Timestamps are excluded unless asked
// for, so two folds of the same log compare equal across processes.
nlohmann::ordered_json state_to_json(const Session& state, bool with_timestamps = false);

struct ImageCluster {
  std::string root_image_id;
  std::vector<std::string> members;  // root first, then descendants in creation order
};

std::vector<ImageCluster> image_clusters(const Session& state);

// Walks origin parents to the FromIdea ancestor.
std::string root_image_of(const Session& state, std::string_view image_id);

// ---- live session ---------------------------------------------------------

std::string rfc3339_now();

// Serializes commands against one session: assigns gapless seq numbers,
// folds each event, and hands it to the sink before the new state becomes
// visible. Reads take a snapshot and never block on provider calls.
class SessionHandle {
 public:
  using Sink = std::function<void(const Event&)>;
  using Clock = std::function<std::string()>;

  SessionHandle(std::vector<Event> log, Session state, Sink sink = {}, Clock clock = {});

  static std::shared_ptr<SessionHandle> create(std::string session_id, std::string task_prompt,
                                               Sink sink = {}, Clock clock = {});
  static std::shared_ptr<SessionHandle> from_log(std::vector<Event> log, Sink sink = {},
                                                 Clock clock = {});

  std::shared_ptr<const Session> snapshot() const;
  std::vector<Event> events() const;
  std::size_t event_count() const;
  const std::string& id() const { return id_; }

  // Builds the payload under the session lock; the builder receives the seq
  // the event will carry so ids derived from it are unique.
  Event append(const std::function<EventPayload(std::uint64_t seq, const Session&)>& build);
  Event append(EventPayload payload);

  // Entity id derived from an event seq, e.g. "<session>.m12".
  std::string make_id(char tag, std::uint64_t seq, std::size_t sub = 0) const;

 private:
  std::string id_;
  mutable std::mutex mu_;
  std::vector<Event> log_;
  std::shared_ptr<const Session> state_;
  Sink sink_;
  Clock clock_;
};

// Session id prefix of an entity id ("abc.m12" -> "abc").
std::string session_of(std::string_view entity_id);

Tab open_refine_tab(SessionHandle& session, const std::string& image_id);
void mark_downloaded(SessionHandle& session, const std::string& image_id);

}  // namespace cocreate
