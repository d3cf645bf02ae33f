#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace flowsolve {

struct Invocation {
  enum class Command { solve, evaluate, ingest_check, inspect };
  enum class BackendKind { http, scripted };

  Command command = Command::evaluate;
  std::filesystem::path corpus;
  std::optional<std::string> problem_id;
  int k = 1;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path output = "report.yaml";
  BackendKind backend = BackendKind::http;
  std::filesystem::path script_path;  // scripted backend: file, or directory of <id>.yaml
  int workers = 1;
};

// Exit status: 0 success, 1 flow/judge/defect failure, 2 configuration
// error. Human-readable output goes to stderr; stdout is reserved for
// `inspect`; reports land at the output path.
int run(const Invocation& invocation);

// Parses argv (including the subcommand) and dispatches to run().
int run_cli(int argc, const char* const* argv);

}  // namespace flowsolve
