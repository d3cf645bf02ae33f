#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "flowsolve/concurrency.hpp"
#include "flowsolve/errors.hpp"
#include "flowsolve/schema.hpp"

namespace flowsolve {

struct CompletionRequest {
  std::string system;
  std::string user;
  double temperature = 0.2;  // [0, 2]
  int max_tokens = 4096;
  std::string tag;  // stage name, used for telemetry and scripted matching
};

struct CompletionResponse {
  std::string text;
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

enum class CallOutcome { parsed, parse_failed, transport_failed };

struct CallRecord {
  std::string tag;
  int attempt = 0;  // consecutive per tag
  long prompt_tokens = 0;
  long completion_tokens = 0;
  CallOutcome outcome = CallOutcome::parsed;
};

// Append-only record of backend invocations; one entry per invocation no
// matter the outcome. Safe for concurrent appends.
class CallLedger {
 public:
  CallLedger() = default;
  CallLedger(const CallLedger& other);
  CallLedger& operator=(const CallLedger& other);

  void append(const std::string& tag, long prompt_tokens, long completion_tokens,
              CallOutcome outcome);
  std::vector<CallRecord> entries() const;
  size_t size() const;
  long total_prompt_tokens() const;
  long total_completion_tokens() const;

 private:
  mutable std::mutex mutex_;
  std::vector<CallRecord> entries_;
  std::map<std::string, int> attempts_per_tag_;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. "https://api.example.com"
  std::string chat_path = "/v1/chat/completions";
  std::string model;
  std::string api_key;  // resolved from env by the caller
  std::chrono::seconds timeout{120};
};

// Single non-streaming POST per call against a chat-completions endpoint.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  HttpBackendConfig config_;
};

struct ScriptEntry {
  std::string tag;
  int attempt = 0;
  std::string reply;
};

using Script = std::vector<ScriptEntry>;

// Loads a script file: a YAML list of {tag, attempt, reply} entries.
Script load_script(const std::filesystem::path& path);

// Deterministic backend that matches on the request tag plus a per-tag
// invocation counter, never on prompt text.
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(Script script);

  void add_reply(const std::string& tag, int attempt, const std::string& reply);
  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  std::map<std::pair<std::string, int>, std::string> replies_;
  std::map<std::string, int> counters_;
  std::mutex mutex_;
};

struct GatewayConfig {
  int transport_retries = 2;  // extra attempts after the first
  int parse_retries = 2;
  int max_in_flight = 4;
  std::chrono::milliseconds backoff_base{250};
  double default_temperature = 0.2;
  // Exploration stages run hotter unless overridden.
  std::map<std::string, double> stage_temperatures = {
      {"propose_solutions", 0.7},
      {"generate_ai_tests", 0.7},
  };
};

// Extra semantic validation applied after schema validation; throw
// SchemaError to reject and re-ask.
using TreeValidator = std::function<void(const ValueTree&)>;

class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GatewayConfig config);

  // One logical completion; transport failures retry with exponential
  // backoff, each backend invocation adds a ledger entry.
  CompletionResponse complete(const CompletionRequest& request, CallLedger& ledger) const;

  // Structured-call loop: complete, extract YAML, validate; on rejection
  // re-ask with the validation error appended, up to max_parse_retries.
  ValueTree call_structured(const CompletionRequest& request, const Schema& schema,
                            int max_parse_retries, CallLedger& ledger,
                            const TreeValidator& validator = {}) const;

  double temperature_for(const std::string& stage) const;
  const GatewayConfig& config() const { return config_; }

 private:
  CompletionResponse transport_complete(const CompletionRequest& request,
                                        CallLedger& ledger) const;

  std::shared_ptr<Backend> backend_;
  GatewayConfig config_;
  mutable Semaphore in_flight_;
};

}  // namespace flowsolve
