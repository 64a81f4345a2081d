#include "cocreate/instructions.hpp"

#include "instructions_asset.hpp"

namespace cocreate {

const nlohmann::json& instruction_assets() {
  static const nlohmann::json doc = nlohmann::json::parse(kInstructionsAsset);
  return doc;
}

std::string fill(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 2, "{{") == 0) {
      out += '{';
      i += 2;
    } else if (text.compare(i, 2, "}}") == 0) {
      out += '}';
      i += 2;
    } else if (text[i] == '{') {
      const auto close = text.find('}', i);
      const auto key = std::string(text.substr(i + 1, close - i - 1));
      const auto it = values.find(key);
      if (close == std::string_view::npos || it == values.end()) {
        out += text[i++];
        continue;
      }
      out += it->second;
      i = close + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

}  // namespace cocreate
