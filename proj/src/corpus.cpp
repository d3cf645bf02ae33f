#include "flowsolve/corpus.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "flowsolve/errors.hpp"
#include "flowsolve/yaml_text.hpp"

namespace flowsolve {

namespace {

std::string origin_suffix(TestOrigin origin) {
  switch (origin) {
    case TestOrigin::public_test: return "public_tests";
    case TestOrigin::private_test: return "private_tests";
    case TestOrigin::ai_generated: return "ai_tests";
  }
  return "tests";
}

TestCase parse_test(const YAML::Node& node, const std::string& where, TestOrigin origin) {
  if (!node.IsMap()) throw CorpusError(where + ": test entry must be a mapping");
  TestCase test;
  test.origin = origin;
  test.validated = true;
  if (!node["input"]) throw CorpusError(where + ": missing field 'input'");
  if (!node["expected_output"]) throw CorpusError(where + ": missing field 'expected_output'");
  test.input = node["input"].IsNull() ? std::string() : node["input"].Scalar();
  test.expected_output =
      node["expected_output"].IsNull() ? std::string() : node["expected_output"].Scalar();
  return test;
}

Problem parse_problem_file(const std::filesystem::path& path) {
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& ex) {
    throw CorpusError(path.filename().string() + ": " + ex.what());
  }
  const std::string file = path.filename().string();
  if (!doc.IsMap()) throw CorpusError(file + ": problem file must be a mapping");

  auto require = [&](const char* key) -> YAML::Node {
    YAML::Node node = doc[key];
    if (!node) throw CorpusError(file + ": missing field '" + key + "'");
    return node;
  };

  Problem problem;
  problem.id = require("id").as<std::string>();
  problem.title = require("title").as<std::string>();
  problem.description = require("description").Scalar();
  try {
    problem.time_limit = std::chrono::duration<double>(require("time_limit_s").as<double>());
    problem.memory_limit = require("memory_limit_mb").as<std::uint64_t>() << 20;
  } catch (const YAML::Exception&) {
    throw CorpusError(file + ": time_limit_s / memory_limit_mb must be numeric");
  }
  problem.solution_language = require("solution_language").as<std::string>();
  if (YAML::Node mode = doc["judge_mode"]) {
    const std::string text = mode.as<std::string>();
    if (text == "exact") {
      problem.judge_mode = JudgeMode::exact;
    } else if (text == "float_tolerant") {
      problem.judge_mode = JudgeMode::float_tolerant;
    } else {
      throw CorpusError(file + ": judge_mode must be 'exact' or 'float_tolerant'");
    }
  }

  auto parse_tests = [&](const char* key, TestOrigin origin) {
    std::vector<TestCase> tests;
    YAML::Node list = require(key);
    if (!list.IsSequence()) throw CorpusError(file + ": '" + std::string(key) + "' must be a list");
    for (size_t i = 0; i < list.size(); ++i) {
      tests.push_back(
          parse_test(list[i], file + ": " + key + "[" + std::to_string(i) + "]", origin));
    }
    return tests;
  };
  problem.public_tests = parse_tests("public_tests", TestOrigin::public_test);
  problem.private_tests = parse_tests("private_tests", TestOrigin::private_test);
  return problem;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void emit_tests(std::ostream& out, const std::string& key, const std::vector<TestCase>& tests) {
  out << key << ":\n";
  for (const TestCase& test : tests) {
    std::ostringstream input;
    emit_text_field(input, 4, "input", test.input);
    std::string first = input.str();
    // Turn the first field line into a list item.
    out << "  - " << first.substr(4);
    emit_text_field(out, 4, "expected_output", test.expected_output);
  }
}

}  // namespace

const Problem* ProblemSet::find(const std::string& id) const {
  for (const Problem& problem : problems) {
    if (problem.id == id) return &problem;
  }
  return nullptr;
}

std::vector<Defect> validate_problem(const Problem& problem) {
  std::vector<Defect> defects;
  if (problem.id.empty()) defects.push_back({"id", "must be non-empty"});
  if (problem.public_tests.empty()) {
    defects.push_back({"public_tests", "at least one public test required"});
  }
  if (problem.private_tests.empty()) {
    defects.push_back({"private_tests", "at least one private test required"});
  }
  if (problem.time_limit.count() <= 0) defects.push_back({"time_limit", "must be positive"});
  if (problem.memory_limit == 0) defects.push_back({"memory_limit", "must be positive"});
  if (problem.solution_language.empty()) {
    defects.push_back({"solution_language", "must be non-empty"});
  }

  auto check_tests = [&](const std::vector<TestCase>& tests, TestOrigin expected_origin) {
    const std::string prefix = origin_suffix(expected_origin);
    for (size_t i = 0; i < tests.size(); ++i) {
      const TestCase& test = tests[i];
      const std::string field = prefix + "[" + std::to_string(i) + "]";
      const bool is_ai = test.origin == TestOrigin::ai_generated;
      if (is_ai != test.difficulty.has_value()) {
        defects.push_back({field + ".difficulty",
                           is_ai ? "ai_generated test requires a difficulty"
                                 : "difficulty is only valid on ai_generated tests"});
      }
      if (test.difficulty && (*test.difficulty < 1 || *test.difficulty > 5)) {
        defects.push_back({field + ".difficulty", "must be in 1..5"});
      }
      if (test.origin != expected_origin && test.origin != TestOrigin::ai_generated) {
        defects.push_back({field + ".origin", "origin does not match its list"});
      }
    }
  };
  check_tests(problem.public_tests, TestOrigin::public_test);
  check_tests(problem.private_tests, TestOrigin::private_test);
  return defects;
}

ProblemSet load_corpus(const std::filesystem::path& root) {
  const std::filesystem::path manifest_path = root / "manifest.yaml";
  if (!std::filesystem::exists(manifest_path)) {
    throw CorpusError("missing manifest: " + manifest_path.string());
  }
  YAML::Node manifest;
  try {
    manifest = YAML::LoadFile(manifest_path.string());
  } catch (const YAML::Exception& ex) {
    throw CorpusError("manifest.yaml: " + std::string(ex.what()));
  }
  if (!manifest.IsMap() || !manifest["name"] || !manifest["problems"]) {
    throw CorpusError("manifest.yaml: needs 'name' and 'problems' keys");
  }

  ProblemSet set;
  set.name = manifest["name"].as<std::string>();
  std::set<std::string> ids;
  for (const YAML::Node& entry : manifest["problems"]) {
    const std::string filename = entry.as<std::string>();
    Problem problem = parse_problem_file(root / "problems" / filename);
    const std::vector<Defect> defects = validate_problem(problem);
    if (!defects.empty()) {
      throw CorpusError("problem '" + problem.id + "' (" + filename +
                        "): " + defects.front().to_string());
    }
    if (!ids.insert(problem.id).second) {
      throw CorpusError("duplicate problem id '" + problem.id + "'");
    }
    set.problems.push_back(std::move(problem));
  }
  return set;
}

void store_corpus(const ProblemSet& set, const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "problems");
  std::ofstream manifest(root / "manifest.yaml");
  if (!manifest) throw CorpusError("cannot write manifest under " + root.string());
  manifest << "name: " << set.name << "\n";
  manifest << "problems:\n";
  for (const Problem& problem : set.problems) {
    manifest << "  - " << problem.id << ".yaml\n";
  }
  manifest.close();

  for (const Problem& problem : set.problems) {
    std::ofstream out(root / "problems" / (problem.id + ".yaml"));
    if (!out) throw CorpusError("cannot write problem file for '" + problem.id + "'");
    out << "id: " << problem.id << "\n";
    emit_text_field(out, 0, "title", problem.title);
    emit_text_field(out, 0, "description", problem.description);
    out << "time_limit_s: " << format_double(problem.time_limit.count()) << "\n";
    // The file format carries whole MiB; byte counts round up.
    out << "memory_limit_mb: " << ((problem.memory_limit + (1ull << 20) - 1) >> 20) << "\n";
    out << "solution_language: " << problem.solution_language << "\n";
    out << "judge_mode: "
        << (problem.judge_mode == JudgeMode::exact ? "exact" : "float_tolerant") << "\n";
    emit_tests(out, "public_tests", problem.public_tests);
    emit_tests(out, "private_tests", problem.private_tests);
  }
}

std::vector<std::pair<std::string, Defect>> scan_corpus(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, Defect>> findings;
  const std::filesystem::path manifest_path = root / "manifest.yaml";
  if (!std::filesystem::exists(manifest_path)) {
    findings.emplace_back("manifest.yaml", Defect{"manifest", "file missing"});
    return findings;
  }
  YAML::Node manifest;
  try {
    manifest = YAML::LoadFile(manifest_path.string());
  } catch (const YAML::Exception& ex) {
    findings.emplace_back("manifest.yaml", Defect{"manifest", ex.what()});
    return findings;
  }
  if (!manifest.IsMap() || !manifest["name"] || !manifest["problems"]) {
    findings.emplace_back("manifest.yaml", Defect{"manifest", "needs 'name' and 'problems' keys"});
    return findings;
  }
  std::set<std::string> ids;
  for (const YAML::Node& entry : manifest["problems"]) {
    const std::string filename = entry.as<std::string>();
    try {
      Problem problem = parse_problem_file(root / "problems" / filename);
      for (const Defect& defect : validate_problem(problem)) {
        findings.emplace_back(problem.id, defect);
      }
      if (!ids.insert(problem.id).second) {
        findings.emplace_back(problem.id, Defect{"id", "duplicate problem id"});
      }
    } catch (const CorpusError& ex) {
      findings.emplace_back(filename, Defect{"file", ex.what()});
    }
  }
  return findings;
}

}  // namespace flowsolve
