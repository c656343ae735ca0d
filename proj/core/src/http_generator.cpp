#include "ppsynth/http_generator.hpp"

#include <cstdlib>
#include <utility>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"

namespace ppsynth {

namespace {

// the grammar rejects a bare '~', so a failed request costs one retry
const char* kFailedFragment = "~";

void split_endpoint(const std::string& url, std::string& base, std::string& path) {
  std::size_t scheme = url.find("://");
  std::size_t slash = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    base = url;
    path = "/";
  } else {
    base = url.substr(0, slash);
    path = url.substr(slash);
  }
}

std::string strip_fences(const std::string& s) {
  std::string out = s;
  std::size_t first = out.find("```");
  if (first != std::string::npos) {
    std::size_t line_end = out.find('\n', first);
    if (line_end == std::string::npos) return {};
    std::size_t close = out.find("```", line_end);
    out = out.substr(line_end + 1, close == std::string::npos ? std::string::npos
                                                              : close - line_end - 1);
  }
  return out;
}

}  // namespace

HttpGenerator::HttpGenerator(HttpGeneratorConfig config) : config_(std::move(config)) {}

std::string HttpGenerator::propose_fragment(const GenContext& ctx) {
  last_error_.clear();

  nlohmann::json body = {
      {"model", config_.model},
      {"messages", nlohmann::json::array({nlohmann::json{{"role", "user"},
                                                         {"content", ctx.prompt}}})},
      {"temperature", config_.temperature},
      {"max_tokens", config_.max_tokens},
  };

  std::string base, path;
  split_endpoint(config_.endpoint, base, path);
  httplib::Client client(base);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str())) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    last_error_ = "request to " + base + " failed: " + httplib::to_string(res.error());
    return kFailedFragment;
  }
  if (res->status != 200) {
    last_error_ = "server returned status " + std::to_string(res->status);
    return kFailedFragment;
  }

  std::string content;
  try {
    nlohmann::json reply = nlohmann::json::parse(res->body);
    content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    last_error_ = std::string("malformed response: ") + e.what();
    return kFailedFragment;
  }

  content = strip_fences(content);
  // one statement per reply: anything after the first ';' is commentary
  std::size_t semi = content.find(';');
  std::size_t brace = content.find('}');
  if (brace != std::string::npos && (semi == std::string::npos || brace < semi)) return "}";
  if (semi != std::string::npos) content = content.substr(0, semi + 1);
  return content;
}

}  // namespace ppsynth
