#include "cocreate/error.hpp"

namespace cocreate {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += "; ";
    out += item;
  }
  return out;
}

std::string describe_schema(const std::string& detail, std::optional<std::size_t> expected,
                            std::optional<std::size_t> got) {
  if (expected && got) {
    return "schema error: expected " + std::to_string(*expected) + " items, got " +
           std::to_string(*got) + (detail.empty() ? "" : " (" + detail + ")");
  }
  return "schema error: " + detail;
}

}  // namespace

SequenceError::SequenceError(std::uint64_t expected_seq, std::uint64_t got_seq)
    : Error("sequence error: expected seq " + std::to_string(expected_seq) + ", got " +
            std::to_string(got_seq)),
      expected(expected_seq),
      got(got_seq) {}

NotFound::NotFound(std::string what, std::string missing_id)
    : Error(what + " not found: " + missing_id), id(std::move(missing_id)) {}

ParseError::ParseError(std::string detail, std::size_t offset)
    : Error("parse error at byte " + std::to_string(offset) + ": " + detail),
      byte_offset(offset) {}

ValidationError::ValidationError(std::vector<std::string> list)
    : Error("validation failed: " + join(list)), violations(std::move(list)) {}

SelectionError::SelectionError(std::vector<std::string> list, std::vector<std::string> names)
    : Error("invalid selections: " + join(list)),
      problems(std::move(list)),
      parameters(std::move(names)) {}

SchemaError::SchemaError(std::string detail, std::optional<std::size_t> expected_count,
                         std::optional<std::size_t> got_count,
                         std::optional<std::size_t> index, std::string field_name)
    : Error(describe_schema(detail, expected_count, got_count)),
      expected(expected_count),
      got(got_count),
      card_index(index),
      field(std::move(field_name)) {}

SketchSynthesisError::SketchSynthesisError(std::vector<std::string> list)
    : Error("sketch synthesis failed: " + join(list)), violations(std::move(list)) {}

const char* to_string(ProviderErrorKind kind) {
  switch (kind) {
    case ProviderErrorKind::Timeout: return "timeout";
    case ProviderErrorKind::RateLimited: return "rate_limited";
    case ProviderErrorKind::Refusal: return "refusal";
    case ProviderErrorKind::SchemaViolation: return "schema_violation";
    case ProviderErrorKind::Transport: return "transport";
  }
  return "unknown";
}

ProviderError::ProviderError(ProviderErrorKind k, std::string text,
                             std::optional<bool> retryable_override)
    : Error(std::string("provider error (") + to_string(k) + "): " + text),
      kind(k),
      retryable(retryable_override.value_or(k == ProviderErrorKind::Timeout ||
                                            k == ProviderErrorKind::RateLimited ||
                                            k == ProviderErrorKind::Transport)),
      detail(std::move(text)) {}

}  // namespace cocreate
