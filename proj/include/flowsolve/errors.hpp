#pragma once

#include <stdexcept>
#include <string>

namespace flowsolve {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Corpus files that cannot be loaded or violate problem invariants.
class CorpusError : public Error {
 public:
  using Error::Error;
};

// Structured payload rejected: YAML syntax, missing field, kind mismatch,
// or constraint violation. `path` points at the offending field when known.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

// A structured call failed validation on every allowed attempt; carries the
// last validation error verbatim.
class StructuredParseError : public Error {
 public:
  StructuredParseError(const std::string& tag, std::string last_error)
      : Error("structured call '" + tag + "' failed: " + last_error),
        tag_(tag),
        last_error_(std::move(last_error)) {}
  const std::string& tag() const { return tag_; }
  const std::string& last_error() const { return last_error_; }

 private:
  std::string tag_;
  std::string last_error_;
};

// Harness-side sandbox fault surfaced as an exception (program faults are
// statuses, not errors).
class SandboxError : public Error {
 public:
  using Error::Error;
};

class FlowError : public Error {
 public:
  FlowError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "': " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class BenchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowsolve
