#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cocreate {

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0);

std::string base64_encode(std::span<const std::uint8_t> data);
std::string base64_decode(std::string_view text);

}  // namespace cocreate
