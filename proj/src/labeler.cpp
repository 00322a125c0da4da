#include "personaprop/labeler.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "personaprop/errors.hpp"

namespace personaprop {

std::string SyntheticLabeler::complete(const LabelRequest& request) {
  std::string body = "{" + nlohmann::json(request.key).dump() + ": [";
  auto it = planted_.find(request.key);
  if (it == planted_.end() || it->second.empty()) {
    body += "\"Unrepresentable\"";
  } else {
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      if (i) body += ", ";
      body += nlohmann::json(it->second[i]).dump();
    }
  }
  body += "]}";
  return body;
}

HttpLabeler::HttpLabeler(HttpLabelerConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("labeler url must include a scheme: " + config_.url);
  }
  const auto path_start = config_.url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_ = config_.url;
    path_ = "/";
  } else {
    base_ = config_.url.substr(0, path_start);
    path_ = config_.url.substr(path_start);
  }
}

std::string HttpLabeler::complete(const LabelRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["temperature"] = config_.temperature;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "system"}, {"content", request.prompt.system}},
       {{"role", "user"}, {"content", request.prompt.user}}});
  const std::string payload = body.dump();

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = std::chrono::milliseconds(config_.backoff_ms << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(base_);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "endpoint returned status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) {
      last_error = "endpoint returned invalid JSON";
      continue;
    }
    try {
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      last_error = "endpoint response missing choices[0].message.content";
      continue;
    }
  }
  throw LabelerError("labeling request for '" + request.key + "' failed: " + last_error);
}

}  // namespace personaprop
