#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowsolve/corpus.hpp"
#include "flowsolve/gateway.hpp"
#include "flowsolve/prompts.hpp"
#include "flowsolve/sandbox.hpp"

namespace flowsolve {

// Stage names in pipeline order; telemetry follows this sequence.
inline constexpr const char* kStageReflect = "reflect";
inline constexpr const char* kStageReasonTests = "reason_public_tests";
inline constexpr const char* kStagePropose = "propose_solutions";
inline constexpr const char* kStageRank = "rank_solutions";
inline constexpr const char* kStageGenerateTests = "generate_ai_tests";
inline constexpr const char* kStageDoubleValidate = "double_validate_tests";
inline constexpr const char* kStageInitialCode = "initial_code";
inline constexpr const char* kStageIteratePublic = "iterate_public_tests";
inline constexpr const char* kStageIterateAi = "iterate_ai_tests";

enum class ReflectionSection { general_description, goals_and_rules, input_structure, output_structure };

struct ReflectionBullet {
  ReflectionSection section;
  std::string text;

  bool operator==(const ReflectionBullet&) const = default;
};

struct Reflection {
  std::vector<ReflectionBullet> bullets;  // at least one bullet per section

  std::vector<std::string> section_bullets(ReflectionSection section) const;
  bool operator==(const Reflection&) const = default;
};

struct TestExplanation {
  int test_index = 0;
  std::string explanation;
};

struct SolutionSketch {
  std::string name;
  std::string content;
  std::string why_it_works;
  std::string complexity;

  bool operator==(const SolutionSketch&) const = default;
};

struct RankedSolutions {
  std::vector<SolutionSketch> sketches;  // best first, a permutation of the proposals
  std::string rationale;
};

struct CodeLineage {
  std::string stage;
  int attempt = 0;
  std::optional<std::string> sketch_name;
};

struct CandidateCode {
  std::string source;
  std::string language;
  CodeLineage lineage;
};

struct AnchorRef {
  enum class Source { public_test, ai_test };
  Source source = Source::public_test;
  size_t index = 0;

  bool operator==(const AnchorRef&) const = default;
};

// Tests the current candidate is known to pass. Grows monotonically within
// a run; refs never repeat.
class AnchorSet {
 public:
  bool add(AnchorRef ref, TestCase test);  // false when the ref is already anchored
  bool contains(AnchorRef ref) const;
  size_t size() const { return entries_.size(); }
  const std::vector<std::pair<AnchorRef, TestCase>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<AnchorRef, TestCase>> entries_;
};

struct FlowConfig {
  int max_initial_attempts = 6;
  int max_fix_attempts_per_test = 3;
  int ai_test_min = 6;
  int ai_test_max = 8;
  bool merge_stages = true;  // reflect+reasoning and propose+rank share one call each
  int call_budget = 40;
  double epsilon = kDefaultEpsilon;  // float_tolerant comparisons
  double temperature_offset = 0.0;   // jitter between independent attempts
  RunLimits limits;                  // max_output applies to candidate runs
  std::string prompt_dir = "assets/prompts";
};

struct StageRecord {
  std::string stage;
  bool ok = true;
  bool skipped = false;
  int calls = 0;  // ledger entries attributed to this stage
  std::vector<size_t> unresolved_tests;   // iterate stages: tests left unfixed
  std::vector<size_t> changed_outputs;    // double validation: corrected indices
  std::vector<size_t> duplicate_inputs;   // ai tests that repeat a public input
  std::string detail;
};

struct FlowResult {
  std::optional<CandidateCode> final_code;
  std::vector<StageRecord> stages;
  bool public_pass = false;
  bool best_so_far = false;  // set when attempts were exhausted or the run halted early
  AnchorSet anchors;
  CallLedger ledger;
  std::optional<std::string> halted_stage;  // call budget crossed here
  std::optional<std::string> failed_stage;  // unrecoverable stage failure

  const StageRecord* stage(const std::string& name) const;
};

// The solving pipeline: a pre-processing phase that reasons about the
// problem in natural language, then code iterations that generate, run,
// and fix a solution against public and AI-generated tests.
class FlowEngine {
 public:
  FlowEngine(const Gateway& gateway, const Sandbox& sandbox, FlowConfig config);

  FlowResult solve(const Problem& problem) const;

  // Individual stages, usable on their own; each issues its own calls.
  Reflection reflect_problem(const Problem& problem, CallLedger& ledger) const;
  std::vector<TestExplanation> reason_public_tests(const Problem& problem,
                                                   const Reflection& reflection,
                                                   CallLedger& ledger) const;
  std::vector<SolutionSketch> propose_solutions(const Problem& problem,
                                                const Reflection& reflection,
                                                CallLedger& ledger) const;
  RankedSolutions rank_solutions(const Problem& problem,
                                 const std::vector<SolutionSketch>& sketches,
                                 CallLedger& ledger) const;
  std::vector<TestCase> generate_ai_tests(const Problem& problem, const Reflection& reflection,
                                          CallLedger& ledger,
                                          StageRecord* record = nullptr) const;
  std::vector<TestCase> double_validate_tests(const Problem& problem,
                                              const std::vector<TestCase>& tests,
                                              CallLedger& ledger,
                                              StageRecord* record = nullptr) const;
  CandidateCode generate_initial_code(const Problem& problem, const RankedSolutions& ranked,
                                      const std::vector<TestCase>& selected_tests,
                                      CallLedger& ledger, StageRecord* record = nullptr) const;
  std::pair<CandidateCode, AnchorSet> iterate_public_tests(CandidateCode code,
                                                           const Problem& problem,
                                                           CallLedger& ledger,
                                                           StageRecord* record = nullptr) const;
  std::pair<CandidateCode, AnchorSet> iterate_ai_tests(CandidateCode code,
                                                       const std::vector<TestCase>& ai_tests,
                                                       AnchorSet anchors, const Problem& problem,
                                                       CallLedger& ledger,
                                                       StageRecord* record = nullptr) const;

  // All public tests plus the two lowest-difficulty validated AI tests.
  static std::vector<TestCase> select_initial_tests(const Problem& problem,
                                                    const std::vector<TestCase>& ai_tests);
  // Indices in nondecreasing difficulty, ties kept in generation order.
  static std::vector<size_t> difficulty_order(const std::vector<TestCase>& tests);

  const FlowConfig& config() const { return config_; }

 private:
  struct MergedPreprocess;
  MergedPreprocess reflect_and_reason(const Problem& problem, CallLedger& ledger) const;
  std::pair<std::vector<SolutionSketch>, RankedSolutions> propose_and_rank(
      const Problem& problem, const Reflection& reflection, CallLedger& ledger) const;
  ExecutionResult run_on_test(const CandidateCode& code, const Problem& problem,
                              const TestCase& test) const;
  bool passes_test(const CandidateCode& code, const Problem& problem, const TestCase& test,
                   ExecutionResult* result = nullptr) const;
  bool passes_all_anchors(const CandidateCode& code, const Problem& problem,
                          const AnchorSet& anchors) const;
  CandidateCode request_fix(const std::string& tag, const Problem& problem,
                            const CandidateCode& code, const TestCase& failing,
                            const ExecutionResult& run, const std::string& extra_note,
                            CallLedger& ledger) const;
  CompletionRequest make_request(const std::string& tag, std::string user_prompt) const;

  const Gateway& gateway_;
  const Sandbox& sandbox_;
  FlowConfig config_;
  PromptLibrary prompts_;
};

}  // namespace flowsolve
