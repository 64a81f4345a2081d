#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cocreate/stats.hpp"

namespace cocreate::study {

enum class SystemKind { StructuredSystem, ChatBaseline };
const char* to_string(SystemKind s);
SystemKind parse_system(std::string_view text);

struct BibdCondition {
  int condition_id = 0;
  std::string task_pair;                  // "A&B", "B&C" or "A&C"
  std::array<char, 2> task_order{};       // first task, second task
  std::array<SystemKind, 2> system_order{};

  bool operator==(const BibdCondition&) const = default;
};

// The 12 counterbalanced conditions: 3 task pairs x 2 task orders x 2
// system orders.
const std::vector<BibdCondition>& bibd_table();
const BibdCondition& bibd_condition(int index);  // 1..12, else RangeError

// ((capabilities - 1) + (ease - 1)) / 12 * 100, items on 1..7.
double umux_lite_overall(double capabilities, double ease);

// Sum of the dimension's two 0..10 items.
double csi_dimension_score(double item_a, double item_b);

inline constexpr std::array<std::string_view, 5> kCsiDimensions = {
    "Enjoyment", "Exploration", "Expressiveness", "Immersion", "Results Worth Effort"};

struct ScoreRecord {
  std::string participant_id;
  SystemKind condition = SystemKind::StructuredSystem;
  std::map<std::string, double> csi_dimensions;  // 0..20 each
  double umux_capabilities = 1;
  double umux_ease = 1;
  double learning_item = 1;
};

void validate(const ScoreRecord& r);

struct MeasureComparison {
  std::string measure;
  std::size_t n_pairs = 0;
  double mean_structured = 0, sd_structured = 0;
  double mean_chat = 0, sd_chat = 0;
  std::optional<stats::WilcoxonResult> test;
  std::string note;  // why `test` is absent
};

// Pairs records by participant and compares the two systems on every CSI
// dimension, both UMUX-Lite items, the UMUX-Lite overall score and the
// learning item.
std::vector<MeasureComparison> compare_systems(const std::vector<ScoreRecord>& records);

struct RatingRecord {
  std::string participant_id;
  SystemKind condition = SystemKind::StructuredSystem;
  std::string image_id;
  std::string evaluator_id;
  double novelty = 0;
  double usefulness = 0;
};

struct ParticipantRating {
  std::string participant_id;
  SystemKind condition = SystemKind::StructuredSystem;
  double novelty = 0;
  double usefulness = 0;
  std::size_t images = 0;
};

// Evaluator ratings are averaged per image, then image scores per
// participant and system.
std::vector<ParticipantRating> participant_ratings(const std::vector<RatingRecord>& ratings);

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF.
std::vector<std::vector<std::string>> read_csv(std::string_view text);
std::string csv_field(std::string_view value);

// Header: participant_id,system,Enjoyment,Exploration,Expressiveness,
// Immersion,Results Worth Effort,umux_capabilities,umux_ease,learning
std::vector<ScoreRecord> scores_from_csv(std::string_view text);
// Header: participant_id,system,image_id,evaluator_id,novelty,usefulness
std::vector<RatingRecord> ratings_from_csv(std::string_view text);

std::string comparisons_to_csv(const std::vector<MeasureComparison>& rows);

}  // namespace cocreate::study
