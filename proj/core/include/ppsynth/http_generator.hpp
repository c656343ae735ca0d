#pragma once

#include <string>

#include "ppsynth/decoder.hpp"

namespace ppsynth {

// chat-completions style endpoint; the full URL is split into host and path
struct HttpGeneratorConfig {
  std::string endpoint;
  std::string model;
  std::string api_key_env = "PPSYNTH_API_KEY";
  double temperature = 0.3;
  int max_tokens = 96;
  int timeout_seconds = 60;
};

// Fragment-mode generator backed by an HTTP model server. Transport and
// protocol failures return a fragment the grammar rejects, so they burn a
// retry instead of silently closing the block; details land in last_error().
class HttpGenerator : public CandidateGenerator {
 public:
  explicit HttpGenerator(HttpGeneratorConfig config);

  bool token_mode() const override { return false; }
  std::string propose_fragment(const GenContext& ctx) override;
  double temperature() const override { return config_.temperature; }

  const std::string& last_error() const { return last_error_; }

 private:
  HttpGeneratorConfig config_;
  std::string last_error_;
};

}  // namespace ppsynth
