#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "personaprop/labeling.hpp"

namespace personaprop {

// Deterministic oracle backed by planted ground truth. Answers in the same
// one-line JSON shape a real model is instructed to use, so parsing the
// rendered answer round-trips the planted assignment exactly. Keys without a
// planted entry come back as Unrepresentable.
class SyntheticLabeler final : public Labeler {
 public:
  explicit SyntheticLabeler(std::map<std::string, std::vector<std::string>> planted)
      : planted_(std::move(planted)) {}

  static SyntheticLabeler from_cache(const LabelCache& truth) {
    return SyntheticLabeler(truth.entries());
  }

  std::string complete(const LabelRequest& request) override;

 private:
  std::map<std::string, std::vector<std::string>> planted_;
};

struct HttpLabelerConfig {
  std::string url;          // e.g. http://localhost:8000/v1/chat/completions
  std::string model;        // provider-specific model name
  double temperature = 0.0;
  int timeout_s = 60;
  int max_retries = 3;
  int backoff_ms = 250;     // doubled per retry
  std::string api_key_env = "LLM_API_KEY";
  std::size_t max_inflight = 4;
};

// Chat-completion endpoint client. Posts {model, messages, temperature} and
// reads choices[0].message.content; provider-agnostic as long as the endpoint
// speaks that shape. The API key is taken from the configured environment
// variable at call time and sent as a bearer token when present.
class HttpLabeler final : public Labeler {
 public:
  explicit HttpLabeler(HttpLabelerConfig config);

  std::string complete(const LabelRequest& request) override;
  std::size_t max_inflight() const override { return config_.max_inflight; }

 private:
  HttpLabelerConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace personaprop
