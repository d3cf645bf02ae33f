#include "flowsolve/bench.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <map>

#include "flowsolve/errors.hpp"
#include "flowsolve/verdict.hpp"
#include "flowsolve/yaml_text.hpp"

namespace flowsolve {

namespace {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::accepted: return "accepted";
    case Verdict::wrong_answer: return "wrong_answer";
    case Verdict::timeout: return "timeout";
    case Verdict::runtime_error: return "runtime_error";
    case Verdict::no_code: return "no_code";
  }
  return "unknown";
}

Verdict verdict_from_string(const std::string& text) {
  if (text == "accepted") return Verdict::accepted;
  if (text == "wrong_answer") return Verdict::wrong_answer;
  if (text == "timeout") return Verdict::timeout;
  if (text == "runtime_error") return Verdict::runtime_error;
  if (text == "no_code") return Verdict::no_code;
  throw BenchError("unknown verdict '" + text + "'");
}

JudgeOutcome judge(const CandidateCode& code, const Problem& problem, const Sandbox& sandbox,
                   const JudgeOptions& options) {
  JudgeOutcome outcome;
  if (code.source.empty()) {
    outcome.verdict = Verdict::no_code;
    outcome.detail = "no code to judge";
    return outcome;
  }

  RunLimits limits;
  limits.wall_time = problem.time_limit;
  limits.memory = problem.memory_limit;
  limits.max_output = options.max_output;

  outcome.verdict = Verdict::accepted;
  for (size_t i = 0; i < problem.private_tests.size(); ++i) {
    const TestCase& test = problem.private_tests[i];
    const ExecutionResult run =
        sandbox.run_candidate(code.source, code.language, test.input, limits);
    ++outcome.tests_run;

    if (run.status == RunStatus::setup_failure) {
      throw BenchError("sandbox setup failure on test " + std::to_string(i) + ": " +
                       run.stderr_text);
    }

    Verdict verdict = Verdict::accepted;
    std::string detail;
    if (run.status == RunStatus::timeout) {
      verdict = Verdict::timeout;
      detail = "timed out";
    } else if (run.status == RunStatus::nonzero_exit ||
               run.status == RunStatus::memory_exceeded) {
      verdict = Verdict::runtime_error;
      detail = to_string(run.status) + ": " + run.stderr_text.substr(0, 400);
    } else {
      const MatchResult match =
          compare(run.stdout_text, test.expected_output, problem.judge_mode, options.epsilon);
      if (!match.passed) {
        verdict = Verdict::wrong_answer;
        detail = match.detail;
      }
    }

    if (verdict != Verdict::accepted && outcome.verdict == Verdict::accepted) {
      outcome.verdict = verdict;
      outcome.failed_test = i;
      outcome.detail = "test " + std::to_string(i) + ": " + detail;
      if (!options.run_all) break;
    }
  }
  return outcome;
}

LedgerSummary summarize(const CallLedger& ledger) {
  LedgerSummary summary;
  summary.calls = static_cast<long>(ledger.size());
  summary.prompt_tokens = ledger.total_prompt_tokens();
  summary.completion_tokens = ledger.total_completion_tokens();
  return summary;
}

double pass_at_k(const std::vector<Attempt>& attempts, int k) {
  if (k <= 0) throw BenchError("k must be positive");
  // Group by problem id, keeping first-seen problem order and within-problem
  // attempt order.
  std::vector<std::string> problem_order;
  std::map<std::string, std::vector<const Attempt*>> by_problem;
  for (const Attempt& attempt : attempts) {
    auto [it, inserted] = by_problem.try_emplace(attempt.problem_id);
    if (inserted) problem_order.push_back(attempt.problem_id);
    it->second.push_back(&attempt);
  }
  if (problem_order.empty()) throw BenchError("no attempts to score");

  int solved = 0;
  for (const std::string& id : problem_order) {
    const std::vector<const Attempt*>& pool = by_problem[id];
    if (pool.size() < static_cast<size_t>(k)) {
      throw BenchError("problem '" + id + "' has " + std::to_string(pool.size()) +
                       " attempts, fewer than k=" + std::to_string(k));
    }
    for (int i = 0; i < k; ++i) {
      if (pool[i]->verdict == Verdict::accepted) {
        ++solved;
        break;
      }
    }
  }
  return static_cast<double>(solved) / static_cast<double>(problem_order.size());
}

void emit_report(const RunReport& report, const std::filesystem::path& path) {
  if (report.attempts.empty()) throw BenchError("report has no attempts");
  if (report.aggregate.pass_at_k < 0.0 || report.aggregate.pass_at_k > 1.0) {
    throw BenchError("pass_at_k must be within [0, 1]");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BenchError("cannot write report to " + path.string());

  out << "report_version: " << report.report_version << "\n";
  out << "corpus: " << report.corpus << "\n";
  emit_text_field(out, 0, "config", report.config_text);
  out << "attempts:\n";
  for (const Attempt& attempt : report.attempts) {
    out << "  - problem_id: " << attempt.problem_id << "\n";
    out << "    attempt_index: " << attempt.attempt_index << "\n";
    out << "    judged: " << (attempt.judged ? "true" : "false") << "\n";
    out << "    verdict: " << to_string(attempt.verdict) << "\n";
    out << "    calls: " << attempt.ledger.calls << "\n";
    out << "    prompt_tokens: " << attempt.ledger.prompt_tokens << "\n";
    out << "    completion_tokens: " << attempt.ledger.completion_tokens << "\n";
    if (attempt.final_code) {
      out << "    final_code:\n";
      out << "      language: " << attempt.final_code->language << "\n";
      out << "      stage: " << attempt.final_code->lineage.stage << "\n";
      out << "      attempt: " << attempt.final_code->lineage.attempt << "\n";
      if (attempt.final_code->lineage.sketch_name) {
        emit_text_field(out, 6, "sketch", *attempt.final_code->lineage.sketch_name);
      }
      emit_text_field(out, 6, "source", attempt.final_code->source);
    }
  }
  out << "aggregate:\n";
  out << "  k: " << report.aggregate.k << "\n";
  out << "  pass_at_k: " << format_double(report.aggregate.pass_at_k) << "\n";
  out << "  total_calls: " << report.aggregate.total_calls << "\n";
  out << "  total_prompt_tokens: " << report.aggregate.total_prompt_tokens << "\n";
  out << "  total_completion_tokens: " << report.aggregate.total_completion_tokens << "\n";
  out << "  wall_time_s: " << format_double(report.aggregate.wall_time_s) << "\n";
}

RunReport load_report(const std::filesystem::path& path) {
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& ex) {
    throw BenchError("report " + path.string() + ": " + ex.what());
  }
  RunReport report;
  report.report_version = doc["report_version"].as<int>(1);
  report.corpus = doc["corpus"].as<std::string>("");
  report.config_text = doc["config"] ? doc["config"].Scalar() : "";
  for (const YAML::Node& node : doc["attempts"]) {
    Attempt attempt;
    attempt.problem_id = node["problem_id"].as<std::string>();
    attempt.attempt_index = node["attempt_index"].as<int>();
    attempt.judged = node["judged"].as<bool>();
    attempt.verdict = verdict_from_string(node["verdict"].as<std::string>());
    attempt.ledger.calls = node["calls"].as<long>();
    attempt.ledger.prompt_tokens = node["prompt_tokens"].as<long>();
    attempt.ledger.completion_tokens = node["completion_tokens"].as<long>();
    if (YAML::Node code = node["final_code"]) {
      CandidateCode candidate;
      candidate.language = code["language"].as<std::string>();
      candidate.lineage.stage = code["stage"].as<std::string>();
      candidate.lineage.attempt = code["attempt"].as<int>();
      if (code["sketch"]) candidate.lineage.sketch_name = code["sketch"].Scalar();
      candidate.source = code["source"].Scalar();
      attempt.final_code = std::move(candidate);
    }
    report.attempts.push_back(std::move(attempt));
  }
  const YAML::Node aggregate = doc["aggregate"];
  if (aggregate) {
    report.aggregate.k = aggregate["k"].as<int>();
    report.aggregate.pass_at_k = aggregate["pass_at_k"].as<double>();
    report.aggregate.total_calls = aggregate["total_calls"].as<long>();
    report.aggregate.total_prompt_tokens = aggregate["total_prompt_tokens"].as<long>();
    report.aggregate.total_completion_tokens = aggregate["total_completion_tokens"].as<long>();
    report.aggregate.wall_time_s = aggregate["wall_time_s"].as<double>();
  }
  return report;
}

}  // namespace flowsolve
