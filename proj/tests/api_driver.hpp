#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "cocreate/service.hpp"

namespace testkit {

struct ApiReply {
  int status = 0;
  nlohmann::json body;
  cocreate::HttpReply raw;
};

// Drives Service::handle with JSON bodies, the way a browser would.
struct ApiDriver {
  cocreate::Service& service;

  ApiReply call(const std::string& method, const std::string& path,
                const nlohmann::json& body = nullptr,
                const std::map<std::string, std::string>& headers = {}) {
    ApiReply out;
    out.raw = service.handle(method, path, headers, body.is_null() ? "" : body.dump());
    out.status = out.raw.status;
    if (out.raw.content_type == "application/json" && !out.raw.body.empty()) {
      out.body = nlohmann::json::parse(out.raw.body);
    }
    return out;
  }
};

}  // namespace testkit
