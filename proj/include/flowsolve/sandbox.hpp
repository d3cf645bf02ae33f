#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flowsolve/concurrency.hpp"

namespace flowsolve {

struct RunLimits {
  std::chrono::duration<double> wall_time{3.0};
  std::uint64_t memory = 512ull << 20;    // bytes, enforced via RLIMIT_AS
  std::uint64_t max_output = 1ull << 20;  // per stream
};

enum class RunStatus { ok, nonzero_exit, timeout, memory_exceeded, output_truncated, setup_failure };

std::string to_string(RunStatus status);

struct ExecutionResult {
  RunStatus status = RunStatus::setup_failure;
  std::string stdout_text;
  std::string stderr_text;
  std::chrono::duration<double> duration{0.0};
  std::optional<int> exit_code;  // 128+signal when killed by a signal
};

// How to execute one language tag. argv placeholders: {source} expands to
// the written source file, {dir} to the scratch directory.
struct RunnerSpec {
  std::vector<std::string> compile;  // empty = nothing to compile
  std::vector<std::string> run;
  std::string source_file = "solution.py";
};

struct SandboxConfig {
  std::map<std::string, RunnerSpec> runners;
  std::filesystem::path scratch_root;  // empty = system temp dir
  int max_concurrent = 8;
  std::chrono::duration<double> compile_time_limit{30.0};
};

// Ships a python interpreter runner for generated solutions and a "cat"
// runner that echoes stdin, used by harness tests.
SandboxConfig default_sandbox_config();

// Runs candidate sources against stdin payloads under wall-time, memory,
// and output limits. Each run owns a private scratch directory that is
// removed afterwards; a global cap bounds simultaneous children. Program
// faults come back as statuses; only harness faults are setup_failure.
class Sandbox {
 public:
  explicit Sandbox(SandboxConfig config = default_sandbox_config());

  ExecutionResult run_candidate(const std::string& source, const std::string& language,
                                const std::string& stdin_data, const RunLimits& limits) const;

  const SandboxConfig& config() const { return config_; }

 private:
  SandboxConfig config_;
  mutable Semaphore slots_;
};

}  // namespace flowsolve
