#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowsolve/corpus.hpp"
#include "flowsolve/flow.hpp"
#include "flowsolve/sandbox.hpp"

namespace flowsolve {

enum class Verdict { accepted, wrong_answer, timeout, runtime_error, no_code };

std::string to_string(Verdict verdict);
Verdict verdict_from_string(const std::string& text);

struct JudgeOptions {
  bool run_all = false;  // diagnostics: keep judging past the first failure
  double epsilon = kDefaultEpsilon;
  std::uint64_t max_output = 1ull << 20;
};

struct JudgeOutcome {
  Verdict verdict = Verdict::no_code;
  std::optional<size_t> failed_test;  // index into private_tests
  std::string detail;
  size_t tests_run = 0;
};

// Runs every private test under the problem's limits; accepted only when
// all of them pass under the problem's judge_mode. Stops at the first
// failure unless options.run_all. Sandbox setup faults throw BenchError.
JudgeOutcome judge(const CandidateCode& code, const Problem& problem, const Sandbox& sandbox,
                   const JudgeOptions& options = {});

struct LedgerSummary {
  long calls = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;

  bool operator==(const LedgerSummary&) const = default;
};

LedgerSummary summarize(const CallLedger& ledger);

struct Attempt {
  std::string problem_id;
  int attempt_index = 0;
  std::optional<CandidateCode> final_code;
  bool judged = false;
  Verdict verdict = Verdict::no_code;
  LedgerSummary ledger;
};

// Fraction of problems with at least one accepted verdict among their first
// k attempts. Every problem needs at least k attempts; uses exactly the
// first k per problem.
double pass_at_k(const std::vector<Attempt>& attempts, int k);

struct RunAggregate {
  int k = 1;
  double pass_at_k = 0.0;
  long total_calls = 0;
  long total_prompt_tokens = 0;
  long total_completion_tokens = 0;
  double wall_time_s = 0.0;
};

struct RunReport {
  int report_version = 1;
  std::string corpus;
  std::string config_text;  // config snapshot, verbatim YAML
  std::vector<Attempt> attempts;
  RunAggregate aggregate;
};

// Writes the report as YAML; emit then load is the identity.
void emit_report(const RunReport& report, const std::filesystem::path& path);
RunReport load_report(const std::filesystem::path& path);

}  // namespace flowsolve
