#include "cocreate/metrics.hpp"

#include <set>
#include <sstream>

namespace cocreate {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

BehavioralMetrics behavioral_metrics(const std::vector<Event>& log) {
  const Session state = replay(log);

  BehavioralMetrics m;
  m.session_id = state.session_id;
  m.image_clusters = image_clusters(state).size();

  std::set<std::string> model_cards;
  std::set<std::string> edited;
  std::set<std::string> downloaded;
  std::size_t default_rounds = 0;
  std::map<std::string, bool> round_defaults;

  auto note_cards = [&](const std::vector<IdeaCard>& cards) {
    for (const auto& c : cards) model_cards.insert(c.idea_id);
  };

  for (const auto& ev : log) {
    std::visit(Overloaded{
                   [&](const events::IdeasGenerated& e) { note_cards(e.ideas); },
                   [&](const events::IdeasExpanded& e) { note_cards(e.ideas); },
                   [&](const events::IdeaCreated&) { ++m.user_created_ideas; },
                   [&](const events::IdeaEdited& e) {
                     if (model_cards.contains(e.idea_id)) edited.insert(e.idea_id);
                   },
                   [&](const events::RefinePrompted&) { ++m.refine_prompt_count; },
                   [&](const events::SelectionsApplied& e) { round_defaults[e.round_id] = e.used_defaults; },
                   [&](const events::VariationGenerated& e) {
                     ++m.regeneration_count;
                     if (round_defaults[e.round_id]) ++default_rounds;
                   },
                   [&](const events::ImageDownloaded& e) { downloaded.insert(e.image_id); },
                   [](const auto&) {},
               },
               ev.payload);
  }
  m.user_edited_ideas = edited.size();
  m.downloads = downloaded.size();
  if (m.regeneration_count > 0) {
    m.default_adoption_rate =
        static_cast<double>(default_rounds) / static_cast<double>(m.regeneration_count);
  }
  return m;
}

std::string metrics_csv_header() {
  return "session_id,image_clusters,refine_prompt_count,regeneration_count,user_created_ideas,"
         "user_edited_ideas,default_adoption_rate,downloads";
}

std::string metrics_csv_row(const BehavioralMetrics& m) {
  std::ostringstream os;
  os << m.session_id << ',' << m.image_clusters << ',' << m.refine_prompt_count << ','
     << m.regeneration_count << ',' << m.user_created_ideas << ',' << m.user_edited_ideas << ',';
  if (m.default_adoption_rate) {
    os.precision(6);
    os << *m.default_adoption_rate;
  }
  os << ',' << m.downloads;
  return os.str();
}

nlohmann::ordered_json metrics_to_json(const BehavioralMetrics& m) {
  nlohmann::ordered_json j;
  j["session_id"] = m.session_id;
  j["image_clusters"] = m.image_clusters;
  j["refine_prompt_count"] = m.refine_prompt_count;
  j["regeneration_count"] = m.regeneration_count;
  j["user_created_ideas"] = m.user_created_ideas;
  j["user_edited_ideas"] = m.user_edited_ideas;
  j["default_adoption_rate"] =
      m.default_adoption_rate ? nlohmann::ordered_json(*m.default_adoption_rate) : nlohmann::ordered_json();
  j["downloads"] = m.downloads;
  return j;
}

}  // namespace cocreate
