#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cocreate {

// Base of every error raised by the library. The service layer maps each
// concrete type to exactly one (http status, code) pair.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SequenceError : public Error {
 public:
  SequenceError(std::uint64_t expected, std::uint64_t got);
  std::uint64_t expected;
  std::uint64_t got;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  NotFound(std::string what, std::string id);
  std::string id;
};

class ParseError : public Error {
 public:
  ParseError(std::string detail, std::size_t byte_offset);
  std::size_t byte_offset;
};

// Carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  std::vector<std::string> violations;
};

class SelectionError : public Error {
 public:
  SelectionError(std::vector<std::string> problems, std::vector<std::string> parameters);
  std::vector<std::string> problems;
  std::vector<std::string> parameters;  // offending parameter names
};

class SchemaError : public Error {
 public:
  SchemaError(std::string detail, std::optional<std::size_t> expected = std::nullopt,
              std::optional<std::size_t> got = std::nullopt,
              std::optional<std::size_t> card_index = std::nullopt, std::string field = {});
  std::optional<std::size_t> expected;
  std::optional<std::size_t> got;
  std::optional<std::size_t> card_index;
  std::string field;
};

class SketchSynthesisError : public Error {
 public:
  explicit SketchSynthesisError(std::vector<std::string> violations);
  std::vector<std::string> violations;
};

class ImageFormatError : public Error {
 public:
  using Error::Error;
};

enum class ProviderErrorKind { Timeout, RateLimited, Refusal, SchemaViolation, Transport };

const char* to_string(ProviderErrorKind kind);

class ProviderError : public Error {
 public:
  ProviderError(ProviderErrorKind kind, std::string detail,
                std::optional<bool> retryable_override = std::nullopt);
  ProviderErrorKind kind;
  bool retryable;
  std::string detail;
};

class InsufficientItems : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class DegenerateSample : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

}  // namespace cocreate
