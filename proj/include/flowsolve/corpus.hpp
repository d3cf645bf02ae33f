#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowsolve/verdict.hpp"

namespace flowsolve {

enum class TestOrigin { public_test, private_test, ai_generated };

struct TestCase {
  std::string input;            // program stdin, may be empty
  std::string expected_output;  // program stdout, may be empty
  TestOrigin origin = TestOrigin::public_test;
  bool validated = true;  // ai_generated tests start false until double validation
  std::optional<int> difficulty;  // 1=easy .. 5=hard, ai_generated only

  bool operator==(const TestCase&) const = default;
};

struct Problem {
  std::string id;
  std::string title;
  std::string description;
  std::vector<TestCase> public_tests;
  std::vector<TestCase> private_tests;
  std::chrono::duration<double> time_limit{3.0};
  std::uint64_t memory_limit = 512ull << 20;  // bytes
  std::string solution_language = "python";
  JudgeMode judge_mode = JudgeMode::exact;

  bool operator==(const Problem&) const = default;
};

struct ProblemSet {
  std::string name;
  std::vector<Problem> problems;

  const Problem* find(const std::string& id) const;

  bool operator==(const ProblemSet&) const = default;
};

struct Defect {
  std::string field;  // e.g. "public_tests[2].difficulty"
  std::string rule;

  std::string to_string() const { return field + ": " + rule; }
  bool operator==(const Defect&) const = default;
};

// Empty iff every Problem/TestCase invariant holds; defects are data, never
// thrown.
std::vector<Defect> validate_problem(const Problem& problem);

// Loads `<root>/manifest.yaml` plus every listed problem file. Throws
// CorpusError on a missing manifest, a malformed file (named, with field),
// an invariant violation, or a duplicate id.
ProblemSet load_corpus(const std::filesystem::path& root);

// Inverse of load_corpus; writing then reloading round-trips exactly.
void store_corpus(const ProblemSet& set, const std::filesystem::path& root);

// Lenient scan used by ingest-check: parse failures and invariant
// violations come back as defects keyed by file or problem id.
std::vector<std::pair<std::string, Defect>> scan_corpus(const std::filesystem::path& root);

}  // namespace flowsolve
