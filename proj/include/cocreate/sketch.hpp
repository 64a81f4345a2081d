#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace cocreate::sketch {

inline constexpr int kWireVersion = 1;

struct Parameter {
  std::string name;
  std::string label;
  std::vector<std::string> options;
  int default_index = 0;

  bool operator==(const Parameter&) const = default;
};

// A parametric prompt template. `template_text` is stored in its escaped
// form: literal braces appear doubled and slots appear as `{name}`.
struct Sketch {
  int version = kWireVersion;
  std::string template_text;
  std::vector<Parameter> parameters;

  const Parameter* find(std::string_view name) const;
  bool operator==(const Sketch&) const = default;
};

struct OptionIndex {
  std::size_t index = 0;
  bool operator==(const OptionIndex&) const = default;
};

struct Custom {
  std::string text;
  bool operator==(const Custom&) const = default;
};

using Choice = std::variant<OptionIndex, Custom>;
using Selections = std::map<std::string, Choice>;

struct Span {
  std::string param_name;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;

  bool operator==(const Span&) const = default;
};

struct RenderedPrompt {
  std::string text;
  std::vector<Span> spans;  // sorted, non-overlapping, UTF-8 byte offsets

  bool operator==(const RenderedPrompt&) const = default;
};

// One lexical piece of a template: either literal text (already unescaped)
// or a slot reference.
struct Segment {
  enum class Kind { Literal, Slot } kind;
  std::string text;  // literal text, or slot name
};

bool is_valid_parameter_name(std::string_view name);

// Splits an escaped template into segments. Lexical problems (unbalanced
// braces, malformed slot names) are appended to `violations`.
std::vector<Segment> tokenize(std::string_view template_text,
                              std::vector<std::string>& violations);

std::string escape_literal(std::string_view text);

// All structural violations of a sketch; empty means valid.
std::vector<std::string> validate(const Sketch& sketch);

// Non-fatal issues such as duplicate options.
std::vector<std::string> warnings(const Sketch& sketch);

Sketch parse_sketch(std::string_view wire);
Sketch sketch_from_json(const nlohmann::json& doc);
nlohmann::ordered_json sketch_to_json(const Sketch& sketch);
std::string serialize_sketch(const Sketch& sketch);

Selections default_selections(const Sketch& sketch);
bool is_all_defaults(const Selections& selections);
void check_selections(const Sketch& sketch, const Selections& selections);

RenderedPrompt render(const Sketch& sketch, const Selections& selections);

// Wire form for selections: an integer picks an option, a string is a
// custom value.
nlohmann::json selections_to_json(const Selections& selections);
Selections selections_from_json(const nlohmann::json& doc);

}  // namespace cocreate::sketch
