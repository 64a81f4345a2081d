#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cocreate/session.hpp"

namespace cocreate {

struct BehavioralMetrics {
  std::string session_id;
  std::size_t image_clusters = 0;
  std::size_t refine_prompt_count = 0;  // RefinePrompted events
  std::size_t regeneration_count = 0;   // VariationGenerated events
  std::size_t user_created_ideas = 0;
  std::size_t user_edited_ideas = 0;    // distinct model-generated cards edited
  std::optional<double> default_adoption_rate;  // absent when nothing was generated
  std::size_t downloads = 0;            // distinct images downloaded

  bool operator==(const BehavioralMetrics&) const = default;
};

// Replays the log (errors propagate) and tabulates the metrics.
BehavioralMetrics behavioral_metrics(const std::vector<Event>& log);

std::string metrics_csv_header();
std::string metrics_csv_row(const BehavioralMetrics& m);
nlohmann::ordered_json metrics_to_json(const BehavioralMetrics& m);

}  // namespace cocreate
