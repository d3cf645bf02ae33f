#include <httplib.h>

#include <nlohmann/json.hpp>

#include "flowsolve/gateway.hpp"

namespace flowsolve {

namespace {

using json = nlohmann::json;

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
  if (config_.api_key.empty()) {
    throw AuthError("missing API key credential");
  }

  json body;
  body["model"] = config_.model;
  body["messages"] = json::array({
      json{{"role", "system"}, {"content", request.system}},
      json{{"role", "user"}, {"content", request.user}},
  });
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  body["stream"] = false;

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout.count(), 0);
  client.set_read_timeout(config_.timeout.count(), 0);
  httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};

  auto result = client.Post(config_.chat_path, headers, body.dump(), "application/json");
  if (!result) {
    throw TransportError("request to " + config_.base_url + " failed: " +
                         httplib::to_string(result.error()));
  }
  if (result->status == 401 || result->status == 403) {
    throw AuthError("authentication rejected (HTTP " + std::to_string(result->status) + ")");
  }
  if (result->status < 200 || result->status >= 300) {
    throw TransportError("HTTP " + std::to_string(result->status) + ": " + result->body);
  }

  json payload;
  try {
    payload = json::parse(result->body);
  } catch (const json::exception& ex) {
    throw TransportError(std::string("malformed completion response: ") + ex.what());
  }
  if (!payload.contains("choices") || payload["choices"].empty()) {
    throw TransportError("completion response has no choices");
  }

  CompletionResponse response;
  const json& message = payload["choices"][0].value("message", json::object());
  response.text = message.value("content", "");
  if (payload.contains("usage")) {
    response.prompt_tokens = payload["usage"].value("prompt_tokens", 0);
    response.completion_tokens = payload["usage"].value("completion_tokens", 0);
  }
  return response;
}

}  // namespace flowsolve
