#include "cocreate/study.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "cocreate/error.hpp"

namespace cocreate::study {

const char* to_string(SystemKind s) {
  return s == SystemKind::StructuredSystem ? "StructuredSystem" : "ChatBaseline";
}

SystemKind parse_system(std::string_view text) {
  if (text == "StructuredSystem") return SystemKind::StructuredSystem;
  if (text == "ChatBaseline") return SystemKind::ChatBaseline;
  throw RangeError("unknown system '" + std::string(text) + "'");
}

const std::vector<BibdCondition>& bibd_table() {
  using S = SystemKind;
  constexpr auto H = S::StructuredSystem;
  constexpr auto C = S::ChatBaseline;
  static const std::vector<BibdCondition> table = {
      {1, "A&B", {'A', 'B'}, {H, C}},  {2, "A&B", {'A', 'B'}, {C, H}},
      {3, "A&B", {'B', 'A'}, {H, C}},  {4, "A&B", {'B', 'A'}, {C, H}},
      {5, "B&C", {'B', 'C'}, {H, C}},  {6, "B&C", {'B', 'C'}, {C, H}},
      {7, "B&C", {'C', 'B'}, {H, C}},  {8, "B&C", {'C', 'B'}, {C, H}},
      {9, "A&C", {'A', 'C'}, {H, C}},  {10, "A&C", {'A', 'C'}, {C, H}},
      {11, "A&C", {'C', 'A'}, {H, C}}, {12, "A&C", {'C', 'A'}, {C, H}},
  };
  return table;
}

const BibdCondition& bibd_condition(int index) {
  if (index < 1 || index > 12) throw RangeError("condition index must be in 1..12, got " + std::to_string(index));
  return bibd_table()[static_cast<std::size_t>(index - 1)];
}

namespace {

void check_range(double v, double lo, double hi, const std::string& what) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << what << " = " << v << " outside [" << lo << ", " << hi << "]";
    throw RangeError(os.str());
  }
}

}  // namespace

double umux_lite_overall(double capabilities, double ease) {
  check_range(capabilities, 1, 7, "UMUX-Lite capabilities item");
  check_range(ease, 1, 7, "UMUX-Lite ease item");
  return ((capabilities - 1.0) + (ease - 1.0)) / 12.0 * 100.0;
}

double csi_dimension_score(double item_a, double item_b) {
  check_range(item_a, 0, 10, "CSI item");
  check_range(item_b, 0, 10, "CSI item");
  return item_a + item_b;
}

void validate(const ScoreRecord& r) {
  if (r.participant_id.empty()) throw RangeError("score record without participant");
  if (r.csi_dimensions.size() != kCsiDimensions.size()) throw RangeError("expected 5 CSI dimensions");
  for (auto dim : kCsiDimensions) {
    const auto it = r.csi_dimensions.find(std::string(dim));
    if (it == r.csi_dimensions.end()) throw RangeError("missing CSI dimension " + std::string(dim));
    check_range(it->second, 0, 20, std::string(dim));
  }
  check_range(r.umux_capabilities, 1, 7, "UMUX-Lite capabilities item");
  check_range(r.umux_ease, 1, 7, "UMUX-Lite ease item");
  check_range(r.learning_item, 1, 7, "learning item");
}

std::vector<MeasureComparison> compare_systems(const std::vector<ScoreRecord>& records) {
  std::map<std::string, std::map<SystemKind, const ScoreRecord*>> by_participant;
  for (const auto& r : records) {
    validate(r);
    auto& slot = by_participant[r.participant_id][r.condition];
    if (slot != nullptr) throw RangeError("duplicate record for participant " + r.participant_id);
    slot = &r;
  }

  std::vector<std::pair<std::string, std::function<double(const ScoreRecord&)>>> measures;
  for (auto dim : kCsiDimensions) {
    measures.emplace_back("CSI " + std::string(dim),
                          [d = std::string(dim)](const ScoreRecord& r) { return r.csi_dimensions.at(d); });
  }
  measures.emplace_back("UMUX-Lite System Capabilities", [](const ScoreRecord& r) { return r.umux_capabilities; });
  measures.emplace_back("UMUX-Lite Ease of Use", [](const ScoreRecord& r) { return r.umux_ease; });
  measures.emplace_back("UMUX-Lite Overall", [](const ScoreRecord& r) {
    return umux_lite_overall(r.umux_capabilities, r.umux_ease);
  });
  measures.emplace_back("Learning", [](const ScoreRecord& r) { return r.learning_item; });

  std::vector<MeasureComparison> out;
  for (const auto& [name, get] : measures) {
    std::vector<double> structured, chat;
    for (const auto& [pid, pair] : by_participant) {
      const auto h = pair.find(SystemKind::StructuredSystem);
      const auto c = pair.find(SystemKind::ChatBaseline);
      if (h == pair.end() || c == pair.end()) continue;
      structured.push_back(get(*h->second));
      chat.push_back(get(*c->second));
    }
    MeasureComparison row;
    row.measure = name;
    row.n_pairs = structured.size();
    if (structured.empty()) {
      row.note = "no complete pairs";
      out.push_back(row);
      continue;
    }
    row.mean_structured = stats::mean(structured);
    row.sd_structured = stats::sample_sd(structured);
    row.mean_chat = stats::mean(chat);
    row.sd_chat = stats::sample_sd(chat);
    try {
      row.test = stats::wilcoxon_signed_rank(structured, chat);
    } catch (const DegenerateSample& e) {
      row.note = e.what();
    }
    out.push_back(row);
  }
  return out;
}

std::vector<ParticipantRating> participant_ratings(const std::vector<RatingRecord>& ratings) {
  struct Acc {
    double novelty = 0, usefulness = 0;
    std::size_t n = 0;
  };
  // (participant, system) -> image -> evaluator ratings
  std::map<std::pair<std::string, SystemKind>, std::map<std::string, Acc>> grouped;
  for (const auto& r : ratings) {
    check_range(r.novelty, 1, 7, "novelty rating");
    check_range(r.usefulness, 1, 7, "usefulness rating");
    auto& acc = grouped[{r.participant_id, r.condition}][r.image_id];
    acc.novelty += r.novelty;
    acc.usefulness += r.usefulness;
    ++acc.n;
  }
  std::vector<ParticipantRating> out;
  for (const auto& [key, images] : grouped) {
    ParticipantRating p{key.first, key.second, 0, 0, images.size()};
    for (const auto& [_, acc] : images) {
      p.novelty += acc.novelty / static_cast<double>(acc.n);
      p.usefulness += acc.usefulness / static_cast<double>(acc.n);
    }
    p.novelty /= static_cast<double>(images.size());
    p.usefulness /= static_cast<double>(images.size());
    out.push_back(p);
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field", text.size());
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace {

double number(const std::string& s, std::size_t row, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("row " + std::to_string(row) + " column '" + column + "': not a number", 0);
  }
}

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                const std::vector<std::string>& required) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[header[i]] = i;
  for (const auto& col : required) {
    if (!idx.contains(col)) throw ParseError("missing CSV column '" + col + "'", 0);
  }
  return idx;
}

}  // namespace

std::vector<ScoreRecord> scores_from_csv(std::string_view text) {
  const auto rows = read_csv(text);
  if (rows.empty()) return {};
  std::vector<std::string> required = {"participant_id", "system"};
  for (auto d : kCsiDimensions) required.emplace_back(d);
  required.insert(required.end(), {"umux_capabilities", "umux_ease", "learning"});
  const auto idx = header_index(rows.front(), required);
  std::vector<ScoreRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != rows.front().size()) throw ParseError("row " + std::to_string(r) + " has the wrong field count", 0);
    ScoreRecord rec;
    rec.participant_id = row[idx.at("participant_id")];
    rec.condition = parse_system(row[idx.at("system")]);
    for (auto d : kCsiDimensions) {
      rec.csi_dimensions[std::string(d)] = number(row[idx.at(std::string(d))], r, std::string(d));
    }
    rec.umux_capabilities = number(row[idx.at("umux_capabilities")], r, "umux_capabilities");
    rec.umux_ease = number(row[idx.at("umux_ease")], r, "umux_ease");
    rec.learning_item = number(row[idx.at("learning")], r, "learning");
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RatingRecord> ratings_from_csv(std::string_view text) {
  const auto rows = read_csv(text);
  if (rows.empty()) return {};
  const auto idx = header_index(rows.front(), {"participant_id", "system", "image_id", "evaluator_id",
                                               "novelty", "usefulness"});
  std::vector<RatingRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != rows.front().size()) throw ParseError("row " + std::to_string(r) + " has the wrong field count", 0);
    out.push_back(RatingRecord{row[idx.at("participant_id")], parse_system(row[idx.at("system")]),
                               row[idx.at("image_id")], row[idx.at("evaluator_id")],
                               number(row[idx.at("novelty")], r, "novelty"),
                               number(row[idx.at("usefulness")], r, "usefulness")});
  }
  return out;
}

std::string comparisons_to_csv(const std::vector<MeasureComparison>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << "measure,n_pairs,mean_structured,sd_structured,mean_chat,sd_chat,w_plus,p_two_sided,method,note\n";
  for (const auto& r : rows) {
    os << csv_field(r.measure) << ',' << r.n_pairs << ',' << r.mean_structured << ',' << r.sd_structured
       << ',' << r.mean_chat << ',' << r.sd_chat << ',';
    if (r.test) {
      os << r.test->w_plus << ',' << r.test->p_two_sided << ',' << stats::to_string(r.test->method);
    } else {
      os << ",,";
    }
    os << ',' << csv_field(r.note) << '\n';
  }
  return os.str();
}

}  // namespace cocreate::study
