#include "cocreate/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>

#include "cocreate/error.hpp"

namespace cocreate {

const Tab* Session::find_tab(std::string_view id) const {
  for (const auto& t : tabs) {
    if (t.tab_id == id) return &t;
  }
  return nullptr;
}

const ImageRecord* Session::find_image(std::string_view id) const {
  for (const auto& r : images) {
    if (r.image_id == id) return &r;
  }
  return nullptr;
}

const IdeaCard* Session::find_idea(std::string_view id) const {
  for (const auto& c : ideas) {
    if (c.idea_id == id) return &c;
  }
  return nullptr;
}

const RefinementRound* Session::find_round(std::string_view id) const {
  for (const auto& r : rounds) {
    if (r.round_id == id) return &r;
  }
  return nullptr;
}

const sketch::Sketch* Session::find_sketch(std::string_view id) const {
  const auto it = sketches.find(std::string(id));
  return it == sketches.end() ? nullptr : &it->second;
}

const Tab& Session::brainstorm_tab() const {
  if (tabs.empty()) throw IntegrityError("session has no tabs");
  return tabs.front();
}

namespace {

[[noreturn]] void integrity(const std::string& what) { throw IntegrityError(what); }

template <typename T, typename Pred>
T& find_mut(std::vector<T>& items, Pred pred) {
  auto it = std::find_if(items.begin(), items.end(), pred);
  return *it;
}

Tab& refine_tab(Session& s, const std::string& tab_id) {
  const Tab* tab = s.find_tab(tab_id);
  if (tab == nullptr) integrity("unknown tab " + tab_id);
  if (tab->kind != TabKind::Refine) integrity("tab " + tab_id + " is not a Refine tab");
  return find_mut(s.tabs, [&](const Tab& t) { return t.tab_id == tab_id; });
}

void check_new_card(const Session& s, const IdeaCard& card, std::set<std::string>& fresh) {
  if (card.idea_id.empty()) integrity("idea without id");
  if (s.find_idea(card.idea_id) != nullptr || !fresh.insert(card.idea_id).second) {
    integrity("duplicate idea id " + card.idea_id);
  }
  if (card.title.empty() || card.description.empty()) {
    integrity("idea " + card.idea_id + " lacks title or description");
  }
}

void check_new_image(const Session& s, const ImageRecord& r) {
  if (r.image_id.empty()) integrity("image without id");
  if (s.find_image(r.image_id) != nullptr) integrity("duplicate image id " + r.image_id);
  if (r.bytes_ref.empty()) integrity("image " + r.image_id + " has no bytes reference");
}

struct Folder {
  Session& s;

  void operator()(const events::SessionCreated&) const {
    integrity("SessionCreated may only be the first event");
  }
  void operator()(const events::BrainstormPrompted& e) const {
    s.brainstorm_prompts.push_back(e.prompt);
  }
  void operator()(const events::IdeasGenerated& e) const { append_cards(e.ideas); }
  void operator()(const events::IdeasExpanded& e) const {
    if (s.brainstorm_prompts.empty()) integrity("ideas expanded before any brainstorm");
    append_cards(e.ideas);
  }
  void operator()(const events::IdeaCreated& e) const {
    std::set<std::string> fresh;
    check_new_card(s, e.idea, fresh);
    if (e.idea.provenance != Provenance::UserCreated) integrity("created idea must be UserCreated");
    s.ideas.push_back(e.idea);
  }
  void operator()(const events::IdeaEdited& e) const {
    if (s.find_idea(e.idea_id) == nullptr) integrity("unknown idea " + e.idea_id);
    auto& card = find_mut(s.ideas, [&](const IdeaCard& c) { return c.idea_id == e.idea_id; });
    if (e.title) card.title = *e.title;
    if (e.background) card.background = *e.background;
    if (e.description) card.description = *e.description;
    if (e.categories) card.categories = *e.categories;
    if (card.title.empty() || card.description.empty()) {
      integrity("edit leaves idea " + e.idea_id + " without title or description");
    }
    if (card.provenance == Provenance::ModelGenerated) card.provenance = Provenance::UserEdited;
  }
  void operator()(const events::IdeaDeleted& e) const {
    if (s.find_idea(e.idea_id) == nullptr) integrity("unknown idea " + e.idea_id);
    std::erase_if(s.ideas, [&](const IdeaCard& c) { return c.idea_id == e.idea_id; });
  }
  void operator()(const events::IdeaImageGenerated& e) const {
    const auto& r = e.image;
    check_new_image(s, r);
    if (r.origin.kind != ImageOrigin::Kind::FromIdea) integrity("idea image must originate from an idea");
    if (s.find_idea(r.origin.ref) == nullptr) integrity("unknown idea " + r.origin.ref);
    if (r.tab_id != s.brainstorm_tab().tab_id) integrity("idea image outside the Brainstorm tab");
    s.images.push_back(r);
  }
  void operator()(const events::RefineTabOpened& e) const {
    if (e.tab_id.empty() || s.find_tab(e.tab_id) != nullptr) integrity("duplicate tab id " + e.tab_id);
    if (s.find_image(e.base_image_id) == nullptr) integrity("unknown image " + e.base_image_id);
    s.tabs.push_back(Tab{e.tab_id, TabKind::Refine, e.base_image_id, std::nullopt, {}});
  }
  void operator()(const events::RefinePrompted& e) const {
    refine_tab(s, e.tab_id).refine_prompt_history.push_back(e.refine_prompt);
  }
  void operator()(const events::SketchSynthesized& e) const {
    auto& tab = refine_tab(s, e.tab_id);
    if (e.sketch_id.empty() || s.sketches.contains(e.sketch_id)) {
      integrity("duplicate sketch id " + e.sketch_id);
    }
    if (tab.refine_prompt_history.empty()) integrity("sketch without a refinement prompt");
    if (auto v = sketch::validate(e.sketch); !v.empty()) integrity("invalid sketch: " + v.front());
    s.sketches.emplace(e.sketch_id, e.sketch);
    tab.current_sketch_id = e.sketch_id;
  }
  void operator()(const events::SelectionsApplied& e) const {
    auto& tab = refine_tab(s, e.tab_id);
    const auto* sk = s.find_sketch(e.sketch_id);
    if (sk == nullptr) integrity("unknown sketch " + e.sketch_id);
    if (e.round_id.empty() || s.find_round(e.round_id) != nullptr) {
      integrity("duplicate round id " + e.round_id);
    }
    const bool defaults = sketch::is_all_defaults(e.selections) && !e.prompt_manually_edited;
    if (defaults != e.used_defaults) integrity("used_defaults inconsistent in round " + e.round_id);
    try {
      const auto rendered = sketch::render(*sk, e.selections);
      if (!e.prompt_manually_edited && rendered.text != e.final_prompt) {
        integrity("final prompt of round " + e.round_id + " differs from its render");
      }
    } catch (const SelectionError& err) {
      integrity(std::string("round ") + e.round_id + ": " + err.what());
    }
    RefinementRound round;
    round.round_id = e.round_id;
    round.tab_id = e.tab_id;
    round.refine_prompt = tab.refine_prompt_history.back();
    round.sketch_id = e.sketch_id;
    round.selections_used = e.selections;
    round.prompt_manually_edited = e.prompt_manually_edited;
    round.final_prompt = e.final_prompt;
    s.rounds.push_back(std::move(round));
  }
  void operator()(const events::VariationGenerated& e) const {
    const auto& tab = refine_tab(s, e.tab_id);
    const auto* round = s.find_round(e.round_id);
    if (round == nullptr || round->tab_id != e.tab_id) integrity("unknown round " + e.round_id);
    if (round->result_image_id || round->failed) integrity("round " + e.round_id + " already closed");
    const auto& r = e.image;
    check_new_image(s, r);
    if (r.origin.kind != ImageOrigin::Kind::Variation || r.origin.ref != *tab.base_image_id) {
      integrity("variation " + r.image_id + " must be anchored on the tab's base image");
    }
    if (r.tab_id != e.tab_id) integrity("variation " + r.image_id + " recorded in a foreign tab");
    s.images.push_back(r);
    find_mut(s.rounds, [&](const RefinementRound& x) { return x.round_id == e.round_id; })
        .result_image_id = r.image_id;
  }
  void operator()(const events::PromptManuallyEdited& e) const { refine_tab(s, e.tab_id); }
  void operator()(const events::ImageDownloaded& e) const {
    if (s.find_image(e.image_id) == nullptr) integrity("unknown image " + e.image_id);
    find_mut(s.images, [&](const ImageRecord& r) { return r.image_id == e.image_id; }).downloaded = true;
  }
  void operator()(const events::GenerationFailed& e) const {
    if (const auto* round = s.find_round(e.target_id)) {
      if (round->result_image_id) integrity("round " + e.target_id + " already produced an image");
      find_mut(s.rounds, [&](const RefinementRound& x) { return x.round_id == e.target_id; }).failed =
          true;
    }
  }

  void append_cards(const std::vector<IdeaCard>& cards) const {
    std::set<std::string> fresh;
    for (const auto& c : cards) {
      check_new_card(s, c, fresh);
      if (c.provenance != Provenance::ModelGenerated) integrity("generated idea must be ModelGenerated");
      if (c.categories.empty()) integrity("generated idea " + c.idea_id + " has no categories");
    }
    s.ideas.insert(s.ideas.end(), cards.begin(), cards.end());
  }
};

}  // namespace

Session apply_event(const Session& state, const Event& event) {
  if (event.seq != state.last_seq + 1) throw SequenceError(state.last_seq + 1, event.seq);
  Session next = state;
  if (const auto* created = std::get_if<events::SessionCreated>(&event.payload)) {
    if (state.last_seq != 0) integrity("SessionCreated may only be the first event");
    if (created->session_id.empty() || created->brainstorm_tab_id.empty()) {
      integrity("SessionCreated lacks ids");
    }
    next.session_id = created->session_id;
    next.created_at = event.at;
    next.task_prompt = created->task_prompt;
    next.tabs.push_back(Tab{created->brainstorm_tab_id, TabKind::Brainstorm, std::nullopt,
                            std::nullopt, {}});
  } else {
    if (state.last_seq == 0) integrity("log must start with SessionCreated");
    std::visit(Folder{next}, event.payload);
  }
  next.last_seq = event.seq;
  return next;
}

Session replay(const std::vector<Event>& log) {
  Session s;
  for (const auto& e : log) s = apply_event(s, e);
  return s;
}

std::string root_image_of(const Session& state, std::string_view image_id) {
  const ImageRecord* r = state.find_image(image_id);
  if (r == nullptr) throw NotFound("image", std::string(image_id));
  for (std::size_t steps = 0; steps <= state.images.size(); ++steps) {
    if (r->origin.kind == ImageOrigin::Kind::FromIdea) return r->image_id;
    r = state.find_image(r->origin.ref);
    if (r == nullptr) integrity("dangling variation parent");
  }
  integrity("lineage cycle at image " + std::string(image_id));
}

std::vector<ImageCluster> image_clusters(const Session& state) {
  std::vector<ImageCluster> clusters;
  std::map<std::string, std::size_t> by_root;
  for (const auto& r : state.images) {
    if (r.origin.kind == ImageOrigin::Kind::FromIdea) {
      by_root.emplace(r.image_id, clusters.size());
      clusters.push_back({r.image_id, {r.image_id}});
    }
  }
  std::map<std::string, std::string> root_cache;
  for (const auto& r : state.images) {
    if (r.origin.kind == ImageOrigin::Kind::FromIdea) continue;
    // Parents always precede children in `images`, so the cache is warm.
    const auto parent_root = root_cache.find(r.origin.ref);
    const std::string root =
        parent_root != root_cache.end() ? parent_root->second : root_image_of(state, r.image_id);
    root_cache[r.image_id] = root;
    clusters[by_root.at(root)].members.push_back(r.image_id);
  }
  return clusters;
}

std::string rfc3339_now() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

SessionHandle::SessionHandle(std::vector<Event> log, Session state, Sink sink, Clock clock)
    : id_(state.session_id),
      log_(std::move(log)),
      state_(std::make_shared<const Session>(std::move(state))),
      sink_(std::move(sink)),
      clock_(clock ? std::move(clock) : Clock(rfc3339_now)) {}

std::shared_ptr<SessionHandle> SessionHandle::create(std::string session_id,
                                                     std::string task_prompt, Sink sink,
                                                     Clock clock) {
  auto handle = std::make_shared<SessionHandle>(std::vector<Event>{}, Session{}, std::move(sink),
                                                std::move(clock));
  handle->id_ = session_id;
  const std::string tab_id = handle->make_id('t', 1);
  handle->append(events::SessionCreated{std::move(session_id), std::move(task_prompt), tab_id});
  return handle;
}

std::shared_ptr<SessionHandle> SessionHandle::from_log(std::vector<Event> log, Sink sink,
                                                       Clock clock) {
  Session state = replay(log);
  return std::make_shared<SessionHandle>(std::move(log), std::move(state), std::move(sink),
                                         std::move(clock));
}

std::shared_ptr<const Session> SessionHandle::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::vector<Event> SessionHandle::events() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t SessionHandle::event_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

Event SessionHandle::append(
    const std::function<EventPayload(std::uint64_t, const Session&)>& build) {
  std::lock_guard lock(mu_);
  Event event;
  event.seq = state_->last_seq + 1;
  event.at = clock_();
  event.payload = build(event.seq, *state_);
  auto next = std::make_shared<const Session>(apply_event(*state_, event));
  if (sink_) sink_(event);
  log_.push_back(event);
  state_ = std::move(next);
  return event;
}

Event SessionHandle::append(EventPayload payload) {
  return append([&](std::uint64_t, const Session&) { return std::move(payload); });
}

std::string SessionHandle::make_id(char tag, std::uint64_t seq, std::size_t sub) const {
  std::string out = id_ + "." + tag + std::to_string(seq);
  if (sub != 0) out += "-" + std::to_string(sub);
  return out;
}

std::string session_of(std::string_view entity_id) {
  const auto dot = entity_id.find('.');
  return std::string(entity_id.substr(0, dot));
}

Tab open_refine_tab(SessionHandle& session, const std::string& image_id) {
  const auto event = session.append([&](std::uint64_t seq, const Session& s) -> EventPayload {
    if (s.find_image(image_id) == nullptr) throw NotFound("image", image_id);
    return events::RefineTabOpened{session.make_id('t', seq), image_id};
  });
  const auto& opened = std::get<events::RefineTabOpened>(event.payload);
  return *session.snapshot()->find_tab(opened.tab_id);
}

void mark_downloaded(SessionHandle& session, const std::string& image_id) {
  session.append([&](std::uint64_t, const Session& s) -> EventPayload {
    if (s.find_image(image_id) == nullptr) throw NotFound("image", image_id);
    return events::ImageDownloaded{image_id};
  });
}

}  // namespace cocreate
