#include "flowsolve/gateway.hpp"

#include <thread>

namespace flowsolve {

CallLedger::CallLedger(const CallLedger& other) {
  std::lock_guard lock(other.mutex_);
  entries_ = other.entries_;
  attempts_per_tag_ = other.attempts_per_tag_;
}

CallLedger& CallLedger::operator=(const CallLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  entries_ = other.entries_;
  attempts_per_tag_ = other.attempts_per_tag_;
  return *this;
}

void CallLedger::append(const std::string& tag, long prompt_tokens, long completion_tokens,
                        CallOutcome outcome) {
  std::lock_guard lock(mutex_);
  CallRecord record;
  record.tag = tag;
  record.attempt = attempts_per_tag_[tag]++;
  record.prompt_tokens = prompt_tokens;
  record.completion_tokens = completion_tokens;
  record.outcome = outcome;
  entries_.push_back(std::move(record));
}

std::vector<CallRecord> CallLedger::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

size_t CallLedger::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

long CallLedger::total_prompt_tokens() const {
  std::lock_guard lock(mutex_);
  long total = 0;
  for (const CallRecord& record : entries_) total += record.prompt_tokens;
  return total;
}

long CallLedger::total_completion_tokens() const {
  std::lock_guard lock(mutex_);
  long total = 0;
  for (const CallRecord& record : entries_) total += record.completion_tokens;
  return total;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig config)
    : backend_(std::move(backend)),
      config_(std::move(config)),
      in_flight_(config_.max_in_flight > 0 ? config_.max_in_flight : 1) {}

double Gateway::temperature_for(const std::string& stage) const {
  auto it = config_.stage_temperatures.find(stage);
  return it != config_.stage_temperatures.end() ? it->second : config_.default_temperature;
}

CompletionResponse Gateway::transport_complete(const CompletionRequest& request,
                                               CallLedger& ledger) const {
  std::chrono::milliseconds delay = config_.backoff_base;
  for (int attempt = 0;; ++attempt) {
    try {
      Semaphore::Slot slot(in_flight_);
      return backend_->complete(request);
    } catch (const AuthError&) {
      ledger.append(request.tag, 0, 0, CallOutcome::transport_failed);
      throw;
    } catch (const TransportError&) {
      ledger.append(request.tag, 0, 0, CallOutcome::transport_failed);
      if (attempt >= config_.transport_retries) throw;
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

CompletionResponse Gateway::complete(const CompletionRequest& request, CallLedger& ledger) const {
  CompletionResponse response = transport_complete(request, ledger);
  ledger.append(request.tag, response.prompt_tokens, response.completion_tokens,
                CallOutcome::parsed);
  return response;
}

ValueTree Gateway::call_structured(const CompletionRequest& request, const Schema& schema,
                                   int max_parse_retries, CallLedger& ledger,
                                   const TreeValidator& validator) const {
  CompletionRequest attempt_request = request;
  std::string last_error;
  for (int attempt = 0; attempt <= max_parse_retries; ++attempt) {
    CompletionResponse response = transport_complete(attempt_request, ledger);
    try {
      ValueTree tree = parse_validated(extract_yaml(response.text), schema);
      if (validator) validator(tree);
      ledger.append(request.tag, response.prompt_tokens, response.completion_tokens,
                    CallOutcome::parsed);
      return tree;
    } catch (const SchemaError& ex) {
      ledger.append(request.tag, response.prompt_tokens, response.completion_tokens,
                    CallOutcome::parse_failed);
      last_error = ex.what();
      attempt_request.user = request.user +
                             "\n\nYour previous reply was rejected with this validation error:\n" +
                             last_error + "\nReturn a corrected YAML object only.";
    }
  }
  throw StructuredParseError(request.tag, last_error);
}

}  // namespace flowsolve
