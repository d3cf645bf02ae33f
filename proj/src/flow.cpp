#include "flowsolve/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "flowsolve/verdict.hpp"

namespace flowsolve {

namespace {

// Embedded in every code-writing prompt; modular code fixes better.
constexpr const char* kModularDirective =
    "divide the generated code into small sub-functions, with meaningful names and "
    "functionality";

Schema reflection_schema(bool merged) {
  std::vector<FieldSpec> sections = {
      list_field("general_description", "Bullet points describing what the problem is about",
                 text_field("bullet", "One bullet point"), 1, std::nullopt),
      list_field("goals_and_rules",
                 "Bullet points listing the goal, the rules, and every constraint",
                 text_field("bullet", "One bullet point"), 1, std::nullopt),
      list_field("input_structure", "Bullet points describing the exact input format",
                 text_field("bullet", "One bullet point"), 1, std::nullopt),
      list_field("output_structure", "Bullet points describing the exact output format",
                 text_field("bullet", "One bullet point"), 1, std::nullopt),
  };
  if (!merged) {
    return Schema{"SelfReflection",
                  record_field("self_reflection", "SelfReflection", "", std::move(sections))};
  }
  FieldSpec reflection =
      record_field("self_reflection", "SelfReflection",
                   "A bullet-point reflection on the problem", std::move(sections));
  FieldSpec explanation = record_field(
      "explanation", "TestExplanation", "",
      {integer_field("test_index", "Zero-based index of the public test"),
       text_field("explanation", "Why this test input leads to this output")});
  FieldSpec explanations =
      list_field("test_explanations", "One entry per public test, in order", explanation, 1,
                 std::nullopt);
  return Schema{"ProblemAnalysis",
                record_field("problem_analysis", "ProblemAnalysis", "",
                             {std::move(reflection), std::move(explanations)})};
}

Schema explanations_schema() {
  FieldSpec explanation = record_field(
      "explanation", "TestExplanation", "",
      {integer_field("test_index", "Zero-based index of the public test"),
       text_field("explanation", "Why this test input leads to this output")});
  return Schema{"TestExplanations",
                record_field("test_explanations_root", "TestExplanations", "",
                             {list_field("test_explanations", "One entry per public test",
                                         explanation, 1, std::nullopt)})};
}

FieldSpec solution_record() {
  return record_field(
      "solution", "Solution", "",
      {text_field("name", "The name of the solution"),
       text_field("content", "A description of the solution"),
       text_field("why_it_works",
                  "Why this solution is correct. Be specific and detailed regarding the "
                  "problem rules and goals"),
       text_field("complexity", "The complexity of the solution")});
}

FieldSpec possible_solutions_field() {
  return list_field(
      "possible_solutions",
      "A list of possible solutions to the problem. Make sure each solution fully "
      "addresses the problem rules and goals, and has a reasonable runtime - less than "
      "three seconds on a modern computer, given the problem constraints for large inputs.",
      solution_record(), 2, 3);
}

FieldSpec ranking_field() {
  return record_field(
      "ranking", "SolutionRanking", "The proposed solutions ordered from best to worst",
      {list_field("ranked_names",
                  "Names of the proposed solutions, best first, judged by correctness, "
                  "simplicity, and robustness",
                  text_field("name", "A solution name"), 1, 3),
       text_field("rationale", "Why the top solution was chosen")});
}

Schema possible_solutions_schema(bool merged) {
  if (!merged) {
    return Schema{"PossibleSolutions",
                  record_field("possible_solutions_root", "PossibleSolutions", "",
                               {possible_solutions_field()})};
  }
  return Schema{"RankedProposals",
                record_field("ranked_proposals", "RankedProposals", "",
                             {possible_solutions_field(), ranking_field()})};
}

Schema rank_schema() {
  return Schema{"SolutionRanking",
                record_field("solution_ranking", "SolutionRanking", "", {ranking_field()})};
}

Schema ai_tests_schema(int min_items, int max_items) {
  FieldSpec test = record_field(
      "test", "GeneratedTest", "",
      {text_field("input", "The test input, exactly as fed to the program's stdin"),
       text_field("expected_output", "The exact stdout a correct solution prints"),
       integer_field("difficulty", "How hard the test is, 1 (easy) to 5 (hard)")});
  return Schema{"AdditionalTests",
                record_field("additional_tests_root", "AdditionalTests", "",
                             {list_field("additional_tests",
                                         "Diverse new tests covering aspects the public tests "
                                         "miss, such as large inputs and edge cases",
                                         test, min_items, max_items)})};
}

Schema double_validate_schema(int count) {
  FieldSpec test = record_field(
      "test", "CorrectedTest", "",
      {text_field("input", "The test input, copied byte for byte"),
       text_field("expected_output", "The corrected expected output for this input")});
  return Schema{"CorrectedTests",
                record_field("corrected_tests_root", "CorrectedTests", "",
                             {list_field("corrected_tests",
                                         "The same tests, same order, outputs corrected "
                                         "where they were wrong",
                                         test, count, count)})};
}

Schema code_schema() {
  return Schema{"CodeSolution",
                record_field("code_solution", "CodeSolution", "",
                             {text_field("code", "The complete program source code")})};
}

Schema fix_schema() {
  return Schema{
      "FixedSolution",
      record_field("fixed_solution", "FixedSolution", "",
                   {list_field("failure_analysis",
                               "Bullet points explaining what went wrong on the failing test",
                               text_field("bullet", "One bullet point"), 1, std::nullopt),
                    text_field("fixed_code", "The complete corrected program source code")})};
}

const char* section_key(ReflectionSection section) {
  switch (section) {
    case ReflectionSection::general_description: return "general_description";
    case ReflectionSection::goals_and_rules: return "goals_and_rules";
    case ReflectionSection::input_structure: return "input_structure";
    case ReflectionSection::output_structure: return "output_structure";
  }
  return "";
}

constexpr ReflectionSection kSections[] = {
    ReflectionSection::general_description,
    ReflectionSection::goals_and_rules,
    ReflectionSection::input_structure,
    ReflectionSection::output_structure,
};

Reflection reflection_from_tree(const ValueTree& tree) {
  Reflection reflection;
  for (ReflectionSection section : kSections) {
    for (const ValueTree& bullet : tree.at(section_key(section)).as_list()) {
      reflection.bullets.push_back({section, bullet.as_text()});
    }
  }
  return reflection;
}

std::vector<TestExplanation> explanations_from_tree(const ValueTree& list,
                                                    size_t public_test_count) {
  std::vector<TestExplanation> explanations;
  std::set<int> seen;
  for (const ValueTree& item : list.as_list()) {
    TestExplanation explanation;
    explanation.test_index = static_cast<int>(item.at("test_index").as_integer());
    explanation.explanation = item.at("explanation").as_text();
    if (explanation.test_index < 0 ||
        explanation.test_index >= static_cast<int>(public_test_count)) {
      throw SchemaError("test_explanations",
                        "test_index " + std::to_string(explanation.test_index) +
                            " is out of range for " + std::to_string(public_test_count) +
                            " public tests");
    }
    if (!seen.insert(explanation.test_index).second) {
      throw SchemaError("test_explanations", "duplicate test_index " +
                                                 std::to_string(explanation.test_index));
    }
    explanations.push_back(std::move(explanation));
  }
  if (explanations.size() != public_test_count) {
    throw SchemaError("test_explanations",
                      "expected exactly " + std::to_string(public_test_count) +
                          " explanations, got " + std::to_string(explanations.size()));
  }
  std::sort(explanations.begin(), explanations.end(),
            [](const TestExplanation& a, const TestExplanation& b) {
              return a.test_index < b.test_index;
            });
  return explanations;
}

std::vector<SolutionSketch> sketches_from_tree(const ValueTree& list) {
  std::vector<SolutionSketch> sketches;
  std::set<std::string> names;
  for (const ValueTree& item : list.as_list()) {
    SolutionSketch sketch;
    sketch.name = item.at("name").as_text();
    sketch.content = item.at("content").as_text();
    sketch.why_it_works = item.at("why_it_works").as_text();
    sketch.complexity = item.at("complexity").as_text();
    if (sketch.name.empty() || sketch.content.empty() || sketch.why_it_works.empty() ||
        sketch.complexity.empty()) {
      throw SchemaError("possible_solutions", "every solution field must be non-empty");
    }
    if (!names.insert(sketch.name).second) {
      throw SchemaError("possible_solutions", "duplicate solution name '" + sketch.name + "'");
    }
    sketches.push_back(std::move(sketch));
  }
  return sketches;
}

RankedSolutions ranking_from_tree(const ValueTree& ranking,
                                  const std::vector<SolutionSketch>& sketches) {
  std::vector<std::string> names;
  for (const ValueTree& name : ranking.at("ranked_names").as_list()) {
    names.push_back(name.as_text());
  }
  std::set<std::string> proposed;
  for (const SolutionSketch& sketch : sketches) proposed.insert(sketch.name);
  std::set<std::string> ranked(names.begin(), names.end());
  if (ranked != proposed || names.size() != sketches.size()) {
    throw SchemaError("ranking.ranked_names",
                      "ranking must be a permutation of the proposed solution names");
  }
  RankedSolutions result;
  result.rationale = ranking.at("rationale").as_text();
  for (const std::string& name : names) {
    for (const SolutionSketch& sketch : sketches) {
      if (sketch.name == name) {
        result.sketches.push_back(sketch);
        break;
      }
    }
  }
  return result;
}

std::vector<TestCase> ai_tests_from_tree(const ValueTree& list) {
  std::vector<TestCase> tests;
  for (const ValueTree& item : list.as_list()) {
    TestCase test;
    test.input = item.at("input").as_text();
    test.expected_output = item.at("expected_output").as_text();
    test.origin = TestOrigin::ai_generated;
    test.validated = false;
    const long long difficulty = item.at("difficulty").as_integer();
    if (difficulty < 1 || difficulty > 5) {
      throw SchemaError("additional_tests.difficulty", "difficulty must be in 1..5");
    }
    test.difficulty = static_cast<int>(difficulty);
    tests.push_back(std::move(test));
  }
  return tests;
}

std::string indent_lines(const std::string& text, const std::string& pad) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!first) out << "\n";
    out << pad << line;
    first = false;
  }
  if (text.empty()) out << pad;
  return out.str();
}

std::string render_tests(const std::vector<TestCase>& tests) {
  std::ostringstream out;
  for (size_t i = 0; i < tests.size(); ++i) {
    out << "Test " << i << ":\n";
    out << "  input:\n" << indent_lines(tests[i].input, "    ") << "\n";
    out << "  expected output:\n" << indent_lines(tests[i].expected_output, "    ") << "\n";
  }
  return out.str();
}

std::string render_reflection(const Reflection& reflection) {
  std::ostringstream out;
  for (ReflectionSection section : kSections) {
    out << section_key(section) << ":\n";
    for (const std::string& bullet : reflection.section_bullets(section)) {
      out << "  - " << bullet << "\n";
    }
  }
  return out.str();
}

std::string render_sketches(const std::vector<SolutionSketch>& sketches) {
  std::ostringstream out;
  for (const SolutionSketch& sketch : sketches) {
    out << "- name: " << sketch.name << "\n";
    out << "  description: " << sketch.content << "\n";
    out << "  why it works: " << sketch.why_it_works << "\n";
    out << "  complexity: " << sketch.complexity << "\n";
  }
  return out.str();
}

std::string stage_for_tag(const std::string& tag) {
  if (tag == "reflect") return kStageReflect;
  if (tag == "reason_public_tests") return kStageReasonTests;
  if (tag == "propose_solutions") return kStagePropose;
  if (tag == "rank_solutions") return kStageRank;
  if (tag == "generate_ai_tests") return kStageGenerateTests;
  if (tag == "double_validate_tests") return kStageDoubleValidate;
  if (tag == "generate_code") return kStageInitialCode;
  if (tag == "fix_public_test") return kStageIteratePublic;
  if (tag == "fix_ai_test") return kStageIterateAi;
  return tag;
}

std::string describe_failure(const TestCase& test, const ExecutionResult& run) {
  std::ostringstream out;
  out << "status: " << to_string(run.status) << "\n";
  if (run.exit_code) out << "exit code: " << *run.exit_code << "\n";
  out << "stdout:\n" << indent_lines(run.stdout_text, "  ") << "\n";
  if (!run.stderr_text.empty()) {
    out << "stderr:\n" << indent_lines(run.stderr_text, "  ") << "\n";
  }
  const MatchResult match = compare(run.stdout_text, test.expected_output, JudgeMode::exact);
  if (!match.passed && !match.detail.empty()) out << "first mismatch: " << match.detail << "\n";
  return out.str();
}

}  // namespace

std::vector<std::string> Reflection::section_bullets(ReflectionSection section) const {
  std::vector<std::string> out;
  for (const ReflectionBullet& bullet : bullets) {
    if (bullet.section == section) out.push_back(bullet.text);
  }
  return out;
}

bool AnchorSet::add(AnchorRef ref, TestCase test) {
  if (contains(ref)) return false;
  entries_.emplace_back(ref, std::move(test));
  return true;
}

bool AnchorSet::contains(AnchorRef ref) const {
  for (const auto& [existing, test] : entries_) {
    if (existing == ref) return true;
  }
  return false;
}

const StageRecord* FlowResult::stage(const std::string& name) const {
  for (const StageRecord& record : stages) {
    if (record.stage == name) return &record;
  }
  return nullptr;
}

FlowEngine::FlowEngine(const Gateway& gateway, const Sandbox& sandbox, FlowConfig config)
    : gateway_(gateway), sandbox_(sandbox), config_(std::move(config)), prompts_(config_.prompt_dir) {}

CompletionRequest FlowEngine::make_request(const std::string& tag, std::string user_prompt) const {
  CompletionRequest request;
  request.tag = tag;
  request.system = prompts_.render("system", {});
  request.user = std::move(user_prompt);
  request.temperature =
      std::clamp(gateway_.temperature_for(tag) + config_.temperature_offset, 0.0, 2.0);
  return request;
}

Reflection FlowEngine::reflect_problem(const Problem& problem, CallLedger& ledger) const {
  const Schema schema = reflection_schema(false);
  const std::string user = prompts_.render(
      "reflect", {{"title", problem.title},
                  {"description", problem.description},
                  {"public_tests", render_tests(problem.public_tests)},
                  {"schema", render_schema_prompt(schema)}});
  const ValueTree tree = gateway_.call_structured(make_request("reflect", user), schema,
                                                  gateway_.config().parse_retries, ledger);
  return reflection_from_tree(tree);
}

std::vector<TestExplanation> FlowEngine::reason_public_tests(const Problem& problem,
                                                             const Reflection& reflection,
                                                             CallLedger& ledger) const {
  if (problem.public_tests.empty()) {
    throw FlowError(kStageReasonTests, "problem has no public tests");
  }
  const Schema schema = explanations_schema();
  const std::string user = prompts_.render(
      "reason_public_tests", {{"title", problem.title},
                              {"description", problem.description},
                              {"public_tests", render_tests(problem.public_tests)},
                              {"reflection", render_reflection(reflection)},
                              {"schema", render_schema_prompt(schema)}});
  const size_t count = problem.public_tests.size();
  const ValueTree tree = gateway_.call_structured(
      make_request("reason_public_tests", user), schema, gateway_.config().parse_retries, ledger,
      [count](const ValueTree& t) { explanations_from_tree(t.at("test_explanations"), count); });
  return explanations_from_tree(tree.at("test_explanations"), count);
}

std::vector<SolutionSketch> FlowEngine::propose_solutions(const Problem& problem,
                                                          const Reflection& reflection,
                                                          CallLedger& ledger) const {
  const Schema schema = possible_solutions_schema(false);
  const std::string user = prompts_.render(
      "propose_solutions", {{"title", problem.title},
                            {"description", problem.description},
                            {"public_tests", render_tests(problem.public_tests)},
                            {"reflection", render_reflection(reflection)},
                            {"schema", render_schema_prompt(schema)}});
  const ValueTree tree = gateway_.call_structured(
      make_request("propose_solutions", user), schema, gateway_.config().parse_retries, ledger,
      [](const ValueTree& t) { sketches_from_tree(t.at("possible_solutions")); });
  return sketches_from_tree(tree.at("possible_solutions"));
}

RankedSolutions FlowEngine::rank_solutions(const Problem& problem,
                                           const std::vector<SolutionSketch>& sketches,
                                           CallLedger& ledger) const {
  if (sketches.size() < 2 || sketches.size() > 3) {
    throw FlowError(kStageRank, "expected 2-3 sketches to rank");
  }
  const Schema schema = rank_schema();
  const std::string user = prompts_.render(
      "rank_solutions", {{"title", problem.title},
                         {"description", problem.description},
                         {"sketches", render_sketches(sketches)},
                         {"schema", render_schema_prompt(schema)}});
  const ValueTree tree = gateway_.call_structured(
      make_request("rank_solutions", user), schema, gateway_.config().parse_retries, ledger,
      [&sketches](const ValueTree& t) { ranking_from_tree(t.at("ranking"), sketches); });
  return ranking_from_tree(tree.at("ranking"), sketches);
}

std::vector<TestCase> FlowEngine::generate_ai_tests(const Problem& problem,
                                                    const Reflection& reflection,
                                                    CallLedger& ledger,
                                                    StageRecord* record) const {
  const Schema schema = ai_tests_schema(config_.ai_test_min, config_.ai_test_max);
  const std::string user = prompts_.render(
      "generate_ai_tests", {{"title", problem.title},
                            {"description", problem.description},
                            {"public_tests", render_tests(problem.public_tests)},
                            {"reflection", render_reflection(reflection)},
                            {"min_tests", std::to_string(config_.ai_test_min)},
                            {"max_tests", std::to_string(config_.ai_test_max)},
                            {"schema", render_schema_prompt(schema)}});
  const ValueTree tree = gateway_.call_structured(
      make_request("generate_ai_tests", user), schema, gateway_.config().parse_retries, ledger,
      [](const ValueTree& t) { ai_tests_from_tree(t.at("additional_tests")); });
  std::vector<TestCase> tests = ai_tests_from_tree(tree.at("additional_tests"));

  // Duplicates of public inputs stay in the set but are visible in telemetry.
  if (record) {
    for (size_t i = 0; i < tests.size(); ++i) {
      for (const TestCase& public_test : problem.public_tests) {
        if (tests[i].input == public_test.input) {
          record->duplicate_inputs.push_back(i);
          break;
        }
      }
    }
  }
  return tests;
}

std::vector<TestCase> FlowEngine::double_validate_tests(const Problem& problem,
                                                        const std::vector<TestCase>& tests,
                                                        CallLedger& ledger,
                                                        StageRecord* record) const {
  for (const TestCase& test : tests) {
    if (test.origin != TestOrigin::ai_generated) {
      throw FlowError(kStageDoubleValidate, "only ai_generated tests can be double validated");
    }
  }
  const Schema schema = double_validate_schema(static_cast<int>(tests.size()));
  const std::string user = prompts_.render(
      "double_validate_tests", {{"title", problem.title},
                                {"description", problem.description},
                                {"tests", render_tests(tests)},
                                {"schema", render_schema_prompt(schema)}});

  auto check_inputs = [&tests](const ValueTree& t) {
    const ValueTree::List& list = t.at("corrected_tests").as_list();
    for (size_t i = 0; i < list.size(); ++i) {
      if (list[i].at("input").as_text() != tests[i].input) {
        throw SchemaError("corrected_tests[" + std::to_string(i) + "].input",
                          "input must be copied byte for byte");
      }
    }
  };
  const ValueTree tree =
      gateway_.call_structured(make_request("double_validate_tests", user), schema,
                               gateway_.config().parse_retries, ledger, check_inputs);

  std::vector<TestCase> validated = tests;
  const ValueTree::List& list = tree.at("corrected_tests").as_list();
  for (size_t i = 0; i < validated.size(); ++i) {
    const std::string corrected = list[i].at("expected_output").as_text();
    if (corrected != validated[i].expected_output) {
      validated[i].expected_output = corrected;
      if (record) record->changed_outputs.push_back(i);
    }
    validated[i].validated = true;
  }
  return validated;
}

std::vector<TestCase> FlowEngine::select_initial_tests(const Problem& problem,
                                                       const std::vector<TestCase>& ai_tests) {
  std::vector<TestCase> selected = problem.public_tests;
  const std::vector<size_t> order = difficulty_order(ai_tests);
  for (size_t i = 0; i < order.size() && i < 2; ++i) {
    selected.push_back(ai_tests[order[i]]);
  }
  return selected;
}

std::vector<size_t> FlowEngine::difficulty_order(const std::vector<TestCase>& tests) {
  std::vector<size_t> order(tests.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&tests](size_t a, size_t b) {
    return tests[a].difficulty.value_or(3) < tests[b].difficulty.value_or(3);
  });
  return order;
}

ExecutionResult FlowEngine::run_on_test(const CandidateCode& code, const Problem& problem,
                                        const TestCase& test) const {
  RunLimits limits;
  limits.wall_time = problem.time_limit;
  limits.memory = problem.memory_limit;
  limits.max_output = config_.limits.max_output;
  return sandbox_.run_candidate(code.source, code.language, test.input, limits);
}

bool FlowEngine::passes_test(const CandidateCode& code, const Problem& problem,
                             const TestCase& test, ExecutionResult* result) const {
  ExecutionResult run = run_on_test(code, problem, test);
  const bool ok = run.status == RunStatus::ok &&
                  compare(run.stdout_text, test.expected_output, problem.judge_mode,
                          config_.epsilon)
                      .passed;
  if (result) *result = std::move(run);
  return ok;
}

bool FlowEngine::passes_all_anchors(const CandidateCode& code, const Problem& problem,
                                    const AnchorSet& anchors) const {
  for (const auto& [ref, test] : anchors.entries()) {
    if (!passes_test(code, problem, test)) return false;
  }
  return true;
}

CandidateCode FlowEngine::generate_initial_code(const Problem& problem,
                                                const RankedSolutions& ranked,
                                                const std::vector<TestCase>& selected_tests,
                                                CallLedger& ledger, StageRecord* record) const {
  if (ranked.sketches.empty()) {
    throw FlowError(kStageInitialCode, "no solution sketches to try");
  }
  const Schema schema = code_schema();

  std::optional<CandidateCode> best;
  double best_distance = std::numeric_limits<double>::infinity();
  std::string last_error = "no attempts made";

  for (int attempt = 1; attempt <= config_.max_initial_attempts; ++attempt) {
    if (ledger.size() >= static_cast<size_t>(config_.call_budget)) break;
    // Priority, but not exclusiveness, to the top-ranked sketch: later
    // attempts cycle through the other proposals.
    const SolutionSketch& sketch =
        ranked.sketches[static_cast<size_t>(attempt - 1) % ranked.sketches.size()];
    const std::string user = prompts_.render(
        "generate_code", {{"title", problem.title},
                          {"description", problem.description},
                          {"sketch", render_sketches({sketch})},
                          {"tests", render_tests(selected_tests)},
                          {"language", problem.solution_language},
                          {"modular_directive", kModularDirective},
                          {"schema", render_schema_prompt(schema)}});
    ValueTree tree;
    try {
      tree = gateway_.call_structured(make_request("generate_code", user), schema,
                                      gateway_.config().parse_retries, ledger);
    } catch (const StructuredParseError& ex) {
      last_error = ex.what();
      continue;
    }
    CandidateCode code;
    code.source = tree.at("code").as_text();
    code.language = problem.solution_language;
    code.lineage = {kStageInitialCode, attempt, sketch.name};
    if (code.source.empty()) {
      last_error = "empty code reply";
      continue;
    }

    double total_distance = 0.0;
    bool all_passed = true;
    bool runnable = true;
    for (const TestCase& test : selected_tests) {
      ExecutionResult run = run_on_test(code, problem, test);
      if (run.status == RunStatus::setup_failure) {
        runnable = false;
        last_error = run.stderr_text;
        break;
      }
      const MatchResult match =
          compare(run.stdout_text, test.expected_output, problem.judge_mode, config_.epsilon);
      if (run.status == RunStatus::ok && match.passed) continue;
      all_passed = false;
      total_distance += run.status == RunStatus::ok
                            ? output_distance(run.stdout_text, test.expected_output)
                            : kMismatchDistance;
    }
    if (!runnable) continue;
    if (all_passed) {
      if (record) {
        record->detail = "attempt " + std::to_string(attempt) + " passed the selected tests";
      }
      return code;
    }
    if (total_distance < best_distance) {
      best_distance = total_distance;
      best = std::move(code);
    }
  }

  if (!best) {
    throw FlowError(kStageInitialCode, "no attempt produced runnable code: " + last_error);
  }
  if (record) {
    record->detail = "no attempt passed; kept attempt " + std::to_string(best->lineage.attempt) +
                     " with closest output (distance " + std::to_string(best_distance) + ")";
  }
  return *best;
}

std::pair<CandidateCode, AnchorSet> FlowEngine::iterate_public_tests(CandidateCode code,
                                                                     const Problem& problem,
                                                                     CallLedger& ledger,
                                                                     StageRecord* record) const {
  AnchorSet anchors;
  for (size_t i = 0; i < problem.public_tests.size(); ++i) {
    const TestCase& test = problem.public_tests[i];
    const AnchorRef ref{AnchorRef::Source::public_test, i};
    ExecutionResult run;
    if (passes_test(code, problem, test, &run)) {
      anchors.add(ref, test);
      continue;
    }
    if (ledger.size() >= static_cast<size_t>(config_.call_budget)) {
      if (record) record->unresolved_tests.push_back(i);
      continue;
    }

    bool fixed = false;
    std::string note;
    for (int attempt = 1; attempt <= config_.max_fix_attempts_per_test && !fixed; ++attempt) {
      CandidateCode candidate;
      try {
        candidate = request_fix("fix_public_test", problem, code, test, run, note, ledger);
      } catch (const StructuredParseError& ex) {
        note = std::string("the previous fix attempt was not parseable: ") + ex.what();
        continue;
      }
      candidate.lineage.attempt = attempt;
      ExecutionResult fixed_run;
      if (!passes_test(candidate, problem, test, &fixed_run)) {
        note = "the previous fix still failed this test:\n" + describe_failure(test, fixed_run);
        continue;
      }
      // Previously passing public tests must keep passing.
      if (!passes_all_anchors(candidate, problem, anchors)) {
        note = "the previous fix broke a public test that used to pass";
        continue;
      }
      code = std::move(candidate);
      anchors.add(ref, test);
      fixed = true;
    }
    if (!fixed && record) record->unresolved_tests.push_back(i);
  }
  return {std::move(code), std::move(anchors)};
}

std::pair<CandidateCode, AnchorSet> FlowEngine::iterate_ai_tests(
    CandidateCode code, const std::vector<TestCase>& ai_tests, AnchorSet anchors,
    const Problem& problem, CallLedger& ledger, StageRecord* record) const {
  // Easy to hard, so anchors accumulate before the risky tests.
  for (size_t index : difficulty_order(ai_tests)) {
    const TestCase& test = ai_tests[index];
    const AnchorRef ref{AnchorRef::Source::ai_test, index};
    ExecutionResult run;
    if (passes_test(code, problem, test, &run)) {
      anchors.add(ref, test);
      continue;
    }
    if (ledger.size() >= static_cast<size_t>(config_.call_budget)) {
      if (record) record->unresolved_tests.push_back(index);
      continue;
    }

    // A failure is assumed to mean the code is wrong, but an accepted fix
    // must pass every anchor; otherwise the pre-fix code stays.
    bool fixed = false;
    std::string note;
    for (int attempt = 1; attempt <= config_.max_fix_attempts_per_test && !fixed; ++attempt) {
      CandidateCode candidate;
      try {
        candidate = request_fix("fix_ai_test", problem, code, test, run, note, ledger);
      } catch (const StructuredParseError& ex) {
        note = std::string("the previous fix attempt was not parseable: ") + ex.what();
        continue;
      }
      candidate.lineage.attempt = attempt;
      ExecutionResult fixed_run;
      if (!passes_test(candidate, problem, test, &fixed_run)) {
        note = "the previous fix still failed this test:\n" + describe_failure(test, fixed_run);
        continue;
      }
      if (!passes_all_anchors(candidate, problem, anchors)) {
        note = "the previous fix broke an anchored test that used to pass";
        continue;
      }
      code = std::move(candidate);
      anchors.add(ref, test);
      fixed = true;
    }
    if (!fixed && record) record->unresolved_tests.push_back(index);
  }
  return {std::move(code), std::move(anchors)};
}

CandidateCode FlowEngine::request_fix(const std::string& tag, const Problem& problem,
                                      const CandidateCode& code, const TestCase& failing,
                                      const ExecutionResult& run, const std::string& extra_note,
                                      CallLedger& ledger) const {
  const Schema schema = fix_schema();
  const std::string user = prompts_.render(
      "fix_code", {{"title", problem.title},
                   {"description", problem.description},
                   {"code", code.source},
                   {"language", problem.solution_language},
                   {"test_input", failing.input},
                   {"test_expected", failing.expected_output},
                   {"failure", describe_failure(failing, run)},
                   {"note", extra_note.empty() ? std::string("-") : extra_note},
                   {"modular_directive", kModularDirective},
                   {"schema", render_schema_prompt(schema)}});
  const ValueTree tree = gateway_.call_structured(make_request(tag, user), schema,
                                                  gateway_.config().parse_retries, ledger,
                                                  [](const ValueTree& t) {
                                                    if (t.at("fixed_code").as_text().empty()) {
                                                      throw SchemaError("fixed_code",
                                                                        "must be non-empty");
                                                    }
                                                  });
  CandidateCode fixed;
  fixed.source = tree.at("fixed_code").as_text();
  fixed.language = problem.solution_language;
  fixed.lineage = {stage_for_tag(tag), 0, std::nullopt};
  return fixed;
}

struct FlowEngine::MergedPreprocess {
  Reflection reflection;
  std::vector<TestExplanation> explanations;
};

FlowEngine::MergedPreprocess FlowEngine::reflect_and_reason(const Problem& problem,
                                                            CallLedger& ledger) const {
  const Schema schema = reflection_schema(true);
  const std::string user = prompts_.render(
      "reflect_merged", {{"title", problem.title},
                         {"description", problem.description},
                         {"public_tests", render_tests(problem.public_tests)},
                         {"schema", render_schema_prompt(schema)}});
  const size_t count = problem.public_tests.size();
  const ValueTree tree = gateway_.call_structured(
      make_request("reflect", user), schema, gateway_.config().parse_retries, ledger,
      [count](const ValueTree& t) {
        explanations_from_tree(t.at("test_explanations"), count);
      });
  MergedPreprocess merged;
  merged.reflection = reflection_from_tree(tree.at("self_reflection"));
  merged.explanations = explanations_from_tree(tree.at("test_explanations"), count);
  return merged;
}

std::pair<std::vector<SolutionSketch>, RankedSolutions> FlowEngine::propose_and_rank(
    const Problem& problem, const Reflection& reflection, CallLedger& ledger) const {
  const Schema schema = possible_solutions_schema(true);
  const std::string user = prompts_.render(
      "propose_merged", {{"title", problem.title},
                         {"description", problem.description},
                         {"public_tests", render_tests(problem.public_tests)},
                         {"reflection", render_reflection(reflection)},
                         {"schema", render_schema_prompt(schema)}});
  const ValueTree tree = gateway_.call_structured(
      make_request("propose_solutions", user), schema, gateway_.config().parse_retries, ledger,
      [](const ValueTree& t) {
        const std::vector<SolutionSketch> sketches =
            sketches_from_tree(t.at("possible_solutions"));
        ranking_from_tree(t.at("ranking"), sketches);
      });
  std::vector<SolutionSketch> sketches = sketches_from_tree(tree.at("possible_solutions"));
  RankedSolutions ranked = ranking_from_tree(tree.at("ranking"), sketches);
  return {std::move(sketches), std::move(ranked)};
}

FlowResult FlowEngine::solve(const Problem& problem) const {
  FlowResult result;
  CallLedger& ledger = result.ledger;

  auto budget_crossed = [&] { return ledger.size() >= static_cast<size_t>(config_.call_budget); };
  auto push_record = [&](const std::string& stage, size_t calls_before) {
    StageRecord record;
    record.stage = stage;
    record.calls = static_cast<int>(ledger.size() - calls_before);
    result.stages.push_back(record);
    return &result.stages.back();
  };
  auto fail_stage = [&](const std::string& stage, const std::string& why, size_t calls_before) {
    StageRecord* record = push_record(stage, calls_before);
    record->ok = false;
    record->detail = why;
    result.failed_stage = stage;
  };
  auto halt_if_over_budget = [&](const std::string& stage) {
    if (!budget_crossed()) return false;
    result.halted_stage = stage;
    result.best_so_far = true;
    return true;
  };

  Reflection reflection;
  std::vector<TestExplanation> explanations;
  size_t before = ledger.size();
  try {
    if (config_.merge_stages) {
      MergedPreprocess merged = reflect_and_reason(problem, ledger);
      reflection = std::move(merged.reflection);
      explanations = std::move(merged.explanations);
      push_record(kStageReflect, before);
      push_record(kStageReasonTests, ledger.size())->detail = "merged into the reflect call";
    } else {
      reflection = reflect_problem(problem, ledger);
      push_record(kStageReflect, before);
      if (halt_if_over_budget(kStageReflect)) return result;
      before = ledger.size();
      explanations = reason_public_tests(problem, reflection, ledger);
      push_record(kStageReasonTests, before);
    }
  } catch (const StructuredParseError& ex) {
    fail_stage(stage_for_tag(ex.tag()), ex.what(), before);
    return result;
  } catch (const FlowError& ex) {
    fail_stage(ex.stage(), ex.what(), before);
    return result;
  }
  if (halt_if_over_budget(kStageReasonTests)) return result;

  std::vector<SolutionSketch> sketches;
  RankedSolutions ranked;
  before = ledger.size();
  try {
    if (config_.merge_stages) {
      auto [proposed, ranking] = propose_and_rank(problem, reflection, ledger);
      sketches = std::move(proposed);
      ranked = std::move(ranking);
      push_record(kStagePropose, before);
      push_record(kStageRank, ledger.size())->detail = "merged into the propose call";
    } else {
      sketches = propose_solutions(problem, reflection, ledger);
      push_record(kStagePropose, before);
      if (halt_if_over_budget(kStagePropose)) return result;
      before = ledger.size();
      ranked = rank_solutions(problem, sketches, ledger);
      push_record(kStageRank, before);
    }
  } catch (const StructuredParseError& ex) {
    fail_stage(stage_for_tag(ex.tag()), ex.what(), before);
    return result;
  } catch (const FlowError& ex) {
    fail_stage(ex.stage(), ex.what(), before);
    return result;
  }
  if (halt_if_over_budget(kStageRank)) return result;

  std::vector<TestCase> ai_tests;
  before = ledger.size();
  try {
    StageRecord record;
    ai_tests = generate_ai_tests(problem, reflection, ledger, &record);
    record.stage = kStageGenerateTests;
    record.calls = static_cast<int>(ledger.size() - before);
    result.stages.push_back(std::move(record));
  } catch (const StructuredParseError& ex) {
    fail_stage(kStageGenerateTests, ex.what(), before);
    return result;
  }
  if (halt_if_over_budget(kStageGenerateTests)) return result;

  before = ledger.size();
  try {
    StageRecord record;
    ai_tests = double_validate_tests(problem, ai_tests, ledger, &record);
    record.stage = kStageDoubleValidate;
    record.calls = static_cast<int>(ledger.size() - before);
    result.stages.push_back(std::move(record));
  } catch (const StructuredParseError& ex) {
    fail_stage(kStageDoubleValidate, ex.what(), before);
    return result;
  } catch (const FlowError& ex) {
    fail_stage(ex.stage(), ex.what(), before);
    return result;
  }
  if (halt_if_over_budget(kStageDoubleValidate)) return result;

  CandidateCode code;
  before = ledger.size();
  try {
    StageRecord record;
    code = generate_initial_code(problem, ranked, select_initial_tests(problem, ai_tests),
                                 ledger, &record);
    record.stage = kStageInitialCode;
    record.calls = static_cast<int>(ledger.size() - before);
    result.stages.push_back(std::move(record));
  } catch (const FlowError& ex) {
    fail_stage(kStageInitialCode, ex.what(), before);
    return result;
  }
  if (halt_if_over_budget(kStageInitialCode)) {
    result.final_code = std::move(code);
    return result;
  }

  before = ledger.size();
  {
    StageRecord record;
    auto [iterated, anchors] = iterate_public_tests(std::move(code), problem, ledger, &record);
    code = std::move(iterated);
    result.anchors = std::move(anchors);
    record.stage = kStageIteratePublic;
    record.calls = static_cast<int>(ledger.size() - before);
    record.ok = record.unresolved_tests.empty();
    result.stages.push_back(std::move(record));
  }
  result.public_pass = result.anchors.size() >= problem.public_tests.size();
  if (halt_if_over_budget(kStageIteratePublic)) {
    result.final_code = std::move(code);
    return result;
  }

  if (!result.public_pass) {
    StageRecord skipped;
    skipped.stage = kStageIterateAi;
    skipped.skipped = true;
    skipped.detail = "skipped: public tests unresolved";
    result.stages.push_back(std::move(skipped));
    result.final_code = std::move(code);
    result.best_so_far = true;
    return result;
  }

  before = ledger.size();
  {
    StageRecord record;
    auto [iterated, anchors] =
        iterate_ai_tests(std::move(code), ai_tests, std::move(result.anchors), problem, ledger,
                         &record);
    code = std::move(iterated);
    result.anchors = std::move(anchors);
    record.stage = kStageIterateAi;
    record.calls = static_cast<int>(ledger.size() - before);
    result.stages.push_back(std::move(record));
  }
  if (budget_crossed()) {
    result.halted_stage = kStageIterateAi;
    result.best_so_far = true;
  }

  result.final_code = std::move(code);
  return result;
}

}  // namespace flowsolve
