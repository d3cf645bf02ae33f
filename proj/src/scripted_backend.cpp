#include <yaml-cpp/yaml.h>

#include "flowsolve/gateway.hpp"

namespace flowsolve {

namespace {

// Deterministic stand-in for token usage so scripted runs produce stable
// ledgers and reports.
long approx_tokens(const std::string& text) { return static_cast<long>(text.size() / 4) + 1; }

}  // namespace

Script load_script(const std::filesystem::path& path) {
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& ex) {
    throw ConfigError("script " + path.string() + ": " + ex.what());
  }
  if (!doc.IsSequence()) {
    throw ConfigError("script " + path.string() + ": expected a list of {tag, attempt, reply}");
  }
  Script script;
  for (size_t i = 0; i < doc.size(); ++i) {
    const YAML::Node& entry = doc[i];
    if (!entry.IsMap() || !entry["tag"] || !entry["attempt"] || !entry["reply"]) {
      throw ConfigError("script " + path.string() + ": entry " + std::to_string(i) +
                        " needs tag, attempt, reply");
    }
    ScriptEntry parsed;
    parsed.tag = entry["tag"].as<std::string>();
    parsed.attempt = entry["attempt"].as<int>();
    parsed.reply = entry["reply"].Scalar();
    script.push_back(std::move(parsed));
  }
  return script;
}

ScriptedBackend::ScriptedBackend(Script script) {
  for (ScriptEntry& entry : script) {
    replies_[{entry.tag, entry.attempt}] = std::move(entry.reply);
  }
}

void ScriptedBackend::add_reply(const std::string& tag, int attempt, const std::string& reply) {
  std::lock_guard lock(mutex_);
  replies_[{tag, attempt}] = reply;
}

CompletionResponse ScriptedBackend::complete(const CompletionRequest& request) {
  std::lock_guard lock(mutex_);
  const int attempt = counters_[request.tag]++;
  auto it = replies_.find({request.tag, attempt});
  if (it == replies_.end()) {
    throw TransportError("scripted backend has no reply for tag '" + request.tag + "' attempt " +
                         std::to_string(attempt));
  }
  CompletionResponse response;
  response.text = it->second;
  response.prompt_tokens = approx_tokens(request.system) + approx_tokens(request.user);
  response.completion_tokens = approx_tokens(response.text);
  return response;
}

}  // namespace flowsolve
