#pragma once

#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace cocreate {

// Versioned prompt wording shipped with the build (assets/instructions_v1.json).
const nlohmann::json& instruction_assets();

// Replaces each "{key}" with its value. Doubled braces are left untouched
// so sketch-syntax examples survive; they are un-doubled afterwards.
std::string fill(std::string_view text, const std::map<std::string, std::string>& values);

}  // namespace cocreate
