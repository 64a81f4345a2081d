#include "cocreate/sketch.hpp"

#include <algorithm>
#include <set>

#include "cocreate/error.hpp"

namespace cocreate::sketch {

using nlohmann::json;

const Parameter* Sketch::find(std::string_view name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

bool is_valid_parameter_name(std::string_view name) {
  if (name.empty() || name.front() < 'a' || name.front() > 'z') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

std::vector<Segment> tokenize(std::string_view tpl, std::vector<std::string>& violations) {
  std::vector<Segment> out;
  std::string literal;
  auto flush = [&] {
    if (!literal.empty()) {
      out.push_back({Segment::Kind::Literal, std::move(literal)});
      literal.clear();
    }
  };
  std::size_t i = 0;
  while (i < tpl.size()) {
    const char c = tpl[i];
    if (c == '{') {
      if (i + 1 < tpl.size() && tpl[i + 1] == '{') {
        literal.push_back('{');
        i += 2;
        continue;
      }
      const auto close = tpl.find('}', i + 1);
      if (close == std::string_view::npos) {
        violations.push_back("unclosed slot at byte " + std::to_string(i));
        literal.append(tpl.substr(i));
        break;
      }
      const auto name = tpl.substr(i + 1, close - i - 1);
      if (!is_valid_parameter_name(name)) {
        violations.push_back("invalid slot name '" + std::string(name) + "' at byte " +
                             std::to_string(i));
      }
      flush();
      out.push_back({Segment::Kind::Slot, std::string(name)});
      i = close + 1;
    } else if (c == '}') {
      if (i + 1 < tpl.size() && tpl[i + 1] == '}') {
        literal.push_back('}');
        i += 2;
        continue;
      }
      violations.push_back("unmatched '}' at byte " + std::to_string(i));
      literal.push_back('}');
      ++i;
    } else {
      literal.push_back(c);
      ++i;
    }
  }
  flush();
  return out;
}

std::string escape_literal(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    out.push_back(c);
    if (c == '{' || c == '}') out.push_back(c);
  }
  return out;
}

std::vector<std::string> validate(const Sketch& s) {
  std::vector<std::string> violations;
  if (s.version != kWireVersion) {
    violations.push_back("unsupported version " + std::to_string(s.version));
  }
  const auto segments = tokenize(s.template_text, violations);

  std::set<std::string> names;
  for (std::size_t i = 0; i < s.parameters.size(); ++i) {
    const auto& p = s.parameters[i];
    const std::string where = "parameter " + std::to_string(i) + " ('" + p.name + "')";
    if (!is_valid_parameter_name(p.name)) violations.push_back(where + ": bad name");
    if (!names.insert(p.name).second) violations.push_back(where + ": duplicate name");
    if (p.options.empty()) violations.push_back(where + ": no options");
    for (std::size_t k = 0; k < p.options.size(); ++k) {
      if (p.options[k].empty()) {
        violations.push_back(where + ": option " + std::to_string(k) + " is empty");
      }
    }
    if (p.default_index != 0) violations.push_back(where + ": default_index must be 0");
  }

  std::set<std::string> used;
  for (const auto& seg : segments) {
    if (seg.kind != Segment::Kind::Slot || !is_valid_parameter_name(seg.text)) continue;
    if (used.insert(seg.text).second && !names.contains(seg.text)) {
      violations.push_back("unknown slot '" + seg.text + "'");
    }
  }
  for (const auto& p : s.parameters) {
    if (is_valid_parameter_name(p.name) && !used.contains(p.name)) {
      violations.push_back("unused parameter '" + p.name + "'");
    }
  }
  return violations;
}

std::vector<std::string> warnings(const Sketch& s) {
  std::vector<std::string> out;
  for (const auto& p : s.parameters) {
    std::set<std::string> seen;
    for (const auto& o : p.options) {
      if (!seen.insert(o).second) {
        out.push_back("parameter '" + p.name + "' repeats option '" + o + "'");
      }
    }
  }
  return out;
}

Sketch sketch_from_json(const json& doc) {
  std::vector<std::string> violations;
  Sketch s;
  if (!doc.is_object()) throw ValidationError({"document is not an object"});

  for (const auto& [key, _] : doc.items()) {
    if (key != "version" && key != "template" && key != "parameters") {
      violations.push_back("unexpected key '" + key + "'");
    }
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    violations.push_back("version must be an integer");
  } else {
    s.version = doc["version"].get<int>();
  }
  if (!doc.contains("template") || !doc["template"].is_string()) {
    violations.push_back("template must be a string");
  } else {
    s.template_text = doc["template"].get<std::string>();
  }
  if (!doc.contains("parameters") || !doc["parameters"].is_array()) {
    violations.push_back("parameters must be an array");
  } else {
    std::size_t i = 0;
    for (const auto& item : doc["parameters"]) {
      const std::string where = "parameter " + std::to_string(i++);
      if (!item.is_object()) {
        violations.push_back(where + ": not an object");
        continue;
      }
      Parameter p;
      for (const auto& [key, _] : item.items()) {
        if (key != "name" && key != "label" && key != "options" && key != "default_index") {
          violations.push_back(where + ": unexpected key '" + key + "'");
        }
      }
      if (item.contains("name") && item["name"].is_string()) {
        p.name = item["name"].get<std::string>();
      } else {
        violations.push_back(where + ": name must be a string");
      }
      if (item.contains("label") && item["label"].is_string()) {
        p.label = item["label"].get<std::string>();
      } else {
        violations.push_back(where + ": label must be a string");
      }
      if (item.contains("options") && item["options"].is_array()) {
        for (const auto& o : item["options"]) {
          if (o.is_string()) {
            p.options.push_back(o.get<std::string>());
          } else {
            violations.push_back(where + ": options must be strings");
          }
        }
      } else {
        violations.push_back(where + ": options must be an array");
      }
      if (item.contains("default_index") && item["default_index"].is_number_integer()) {
        p.default_index = item["default_index"].get<int>();
      } else {
        violations.push_back(where + ": default_index must be an integer");
      }
      s.parameters.push_back(std::move(p));
    }
  }
  if (violations.empty()) violations = validate(s);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return s;
}

Sketch parse_sketch(std::string_view wire) {
  json doc;
  try {
    doc = json::parse(wire);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  return sketch_from_json(doc);
}

nlohmann::ordered_json sketch_to_json(const Sketch& s) {
  nlohmann::ordered_json doc;
  doc["version"] = s.version;
  doc["template"] = s.template_text;
  doc["parameters"] = nlohmann::ordered_json::array();
  for (const auto& p : s.parameters) {
    nlohmann::ordered_json item;
    item["name"] = p.name;
    item["label"] = p.label;
    item["options"] = p.options;
    item["default_index"] = p.default_index;
    doc["parameters"].push_back(std::move(item));
  }
  return doc;
}

std::string serialize_sketch(const Sketch& s) { return sketch_to_json(s).dump(); }

Selections default_selections(const Sketch& s) {
  Selections out;
  for (const auto& p : s.parameters) out.emplace(p.name, OptionIndex{0});
  return out;
}

bool is_all_defaults(const Selections& selections) {
  return std::all_of(selections.begin(), selections.end(), [](const auto& entry) {
    const auto* idx = std::get_if<OptionIndex>(&entry.second);
    return idx != nullptr && idx->index == 0;
  });
}

void check_selections(const Sketch& s, const Selections& selections) {
  std::vector<std::string> problems;
  std::vector<std::string> offending;
  for (const auto& p : s.parameters) {
    const auto it = selections.find(p.name);
    if (it == selections.end()) {
      problems.push_back("missing selection for '" + p.name + "'");
      offending.push_back(p.name);
      continue;
    }
    if (const auto* idx = std::get_if<OptionIndex>(&it->second);
        idx != nullptr && idx->index >= p.options.size()) {
      problems.push_back("option " + std::to_string(idx->index) + " out of range for '" +
                         p.name + "' (" + std::to_string(p.options.size()) + " options)");
      offending.push_back(p.name);
    }
  }
  for (const auto& [name, _] : selections) {
    if (s.find(name) == nullptr) {
      problems.push_back("unknown parameter '" + name + "'");
      offending.push_back(name);
    }
  }
  if (!problems.empty()) throw SelectionError(std::move(problems), std::move(offending));
}

RenderedPrompt render(const Sketch& s, const Selections& selections) {
  check_selections(s, selections);
  std::vector<std::string> violations;
  const auto segments = tokenize(s.template_text, violations);
  if (!violations.empty()) throw ValidationError(std::move(violations));

  RenderedPrompt out;
  for (const auto& seg : segments) {
    if (seg.kind == Segment::Kind::Literal) {
      out.text += seg.text;
      continue;
    }
    const auto& choice = selections.at(seg.text);
    const std::string& value = std::holds_alternative<OptionIndex>(choice)
                                   ? s.find(seg.text)->options[std::get<OptionIndex>(choice).index]
                                   : std::get<Custom>(choice).text;
    const std::size_t start = out.text.size();
    out.text += value;
    out.spans.push_back({seg.text, start, out.text.size()});
  }
  return out;
}

json selections_to_json(const Selections& selections) {
  json doc = json::object();
  for (const auto& [name, choice] : selections) {
    if (const auto* idx = std::get_if<OptionIndex>(&choice)) {
      doc[name] = idx->index;
    } else {
      doc[name] = std::get<Custom>(choice).text;
    }
  }
  return doc;
}

Selections selections_from_json(const json& doc) {
  if (!doc.is_object()) throw SelectionError({"selections must be an object"}, {});
  Selections out;
  std::vector<std::string> problems;
  std::vector<std::string> offending;
  for (const auto& [name, value] : doc.items()) {
    if (value.is_number_unsigned()) {
      out.emplace(name, OptionIndex{value.get<std::size_t>()});
    } else if (value.is_string()) {
      out.emplace(name, Custom{value.get<std::string>()});
    } else {
      problems.push_back("selection for '" + name + "' must be an option index or a string");
      offending.push_back(name);
    }
  }
  if (!problems.empty()) throw SelectionError(std::move(problems), std::move(offending));
  return out;
}

}  // namespace cocreate::sketch
