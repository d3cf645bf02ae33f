#include "flowsolve/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "flowsolve/bench.hpp"
#include "flowsolve/config.hpp"
#include "flowsolve/corpus.hpp"
#include "flowsolve/errors.hpp"
#include "flowsolve/flow.hpp"
#include "flowsolve/gateway.hpp"
#include "flowsolve/sandbox.hpp"

namespace flowsolve {

namespace {

// Hands each attempt its own backend so scripted per-tag counters restart
// per solve run; the http backend is stateless and shared.
class BackendFactory {
 public:
  BackendFactory(Invocation::BackendKind kind, const std::filesystem::path& script_path,
                 const HttpBackendConfig& http_config)
      : kind_(kind), script_path_(script_path) {
    if (kind_ == Invocation::BackendKind::http) {
      http_ = std::make_shared<HttpBackend>(http_config);
    }
  }

  std::shared_ptr<Backend> make(const std::string& problem_id) {
    if (kind_ == Invocation::BackendKind::http) return http_;
    return std::make_shared<ScriptedBackend>(script_for(problem_id));
  }

 private:
  const Script& script_for(const std::string& problem_id) {
    std::lock_guard lock(mutex_);
    auto it = scripts_.find(problem_id);
    if (it != scripts_.end()) return it->second;
    std::filesystem::path path = script_path_;
    if (std::filesystem::is_directory(path)) path /= problem_id + ".yaml";
    return scripts_.emplace(problem_id, load_script(path)).first->second;
  }

  Invocation::BackendKind kind_;
  std::filesystem::path script_path_;
  std::shared_ptr<HttpBackend> http_;
  std::map<std::string, Script> scripts_;
  std::mutex mutex_;
};

Attempt run_attempt(const Problem& problem, int attempt_index, const EngineConfig& config,
                    const Sandbox& sandbox, BackendFactory& backends) {
  Gateway gateway(backends.make(problem.id), config.gateway);
  FlowConfig flow_config = config.flow;
  // Independent samples: later attempts run slightly hotter.
  flow_config.temperature_offset = 0.05 * attempt_index;
  FlowEngine engine(gateway, sandbox, flow_config);

  const FlowResult flow_result = engine.solve(problem);

  Attempt attempt;
  attempt.problem_id = problem.id;
  attempt.attempt_index = attempt_index;
  attempt.ledger = summarize(flow_result.ledger);
  if (flow_result.final_code) {
    attempt.final_code = flow_result.final_code;
    JudgeOptions judge_options;
    judge_options.epsilon = config.flow.epsilon;
    judge_options.max_output = config.flow.limits.max_output;
    attempt.verdict = judge(*flow_result.final_code, problem, sandbox, judge_options).verdict;
    attempt.judged = true;
  } else {
    attempt.verdict = Verdict::no_code;
    attempt.judged = true;
  }
  return attempt;
}

EngineConfig resolve_config(const Invocation& invocation) {
  EngineConfig config = invocation.config_path ? load_engine_config(*invocation.config_path)
                                               : default_engine_config();
  apply_env_overrides(config);
  return config;
}

int command_ingest_check(const Invocation& invocation) {
  const auto findings = scan_corpus(invocation.corpus);
  for (const auto& [where, defect] : findings) {
    std::cerr << where << ": " << defect.to_string() << "\n";
  }
  if (findings.empty()) {
    std::cerr << "corpus ok\n";
    return 0;
  }
  return 1;
}

int command_inspect(const Invocation& invocation) {
  const ProblemSet set = load_corpus(invocation.corpus);
  if (!invocation.problem_id) {
    std::cerr << "inspect needs --problem\n";
    return 2;
  }
  const Problem* problem = set.find(*invocation.problem_id);
  if (!problem) {
    std::cerr << "no problem '" << *invocation.problem_id << "' in corpus '" << set.name << "'\n";
    return 2;
  }
  std::cout << "id: " << problem->id << "\n";
  std::cout << "title: " << problem->title << "\n";
  std::cout << "time limit: " << problem->time_limit.count() << "s\n";
  std::cout << "memory limit: " << (problem->memory_limit >> 20) << " MiB\n";
  std::cout << "language: " << problem->solution_language << "\n";
  std::cout << "judge mode: "
            << (problem->judge_mode == JudgeMode::exact ? "exact" : "float_tolerant") << "\n";
  std::cout << "public tests: " << problem->public_tests.size()
            << ", private tests: " << problem->private_tests.size() << "\n";
  std::cout << "\n" << problem->description << "\n";
  for (size_t i = 0; i < problem->public_tests.size(); ++i) {
    std::cout << "\npublic test " << i << " input:\n" << problem->public_tests[i].input;
    std::cout << "\npublic test " << i << " expected output:\n"
              << problem->public_tests[i].expected_output << "\n";
  }
  return 0;
}

RunReport make_report(const EngineConfig& config, const std::string& corpus_name,
                      std::vector<Attempt> attempts, int k, double wall_time_s) {
  RunReport report;
  report.corpus = corpus_name;
  report.config_text = config.config_text.empty() ? "defaults" : config.config_text;
  report.attempts = std::move(attempts);
  report.aggregate.k = k;
  report.aggregate.pass_at_k = pass_at_k(report.attempts, k);
  for (const Attempt& attempt : report.attempts) {
    report.aggregate.total_calls += attempt.ledger.calls;
    report.aggregate.total_prompt_tokens += attempt.ledger.prompt_tokens;
    report.aggregate.total_completion_tokens += attempt.ledger.completion_tokens;
  }
  report.aggregate.wall_time_s = wall_time_s;
  return report;
}

int command_solve(const Invocation& invocation) {
  const EngineConfig config = resolve_config(invocation);
  const ProblemSet set = load_corpus(invocation.corpus);
  if (!invocation.problem_id) {
    std::cerr << "solve needs --problem\n";
    return 2;
  }
  const Problem* problem = set.find(*invocation.problem_id);
  if (!problem) {
    std::cerr << "no problem '" << *invocation.problem_id << "' in corpus '" << set.name << "'\n";
    return 2;
  }

  Sandbox sandbox(config.sandbox);
  BackendFactory backends(invocation.backend, invocation.script_path, config.http);

  const auto start = std::chrono::steady_clock::now();
  const Attempt attempt = run_attempt(*problem, 0, config, sandbox, backends);
  const double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::cerr << problem->id << ": " << to_string(attempt.verdict) << " (" << attempt.ledger.calls
            << " calls)\n";
  emit_report(make_report(config, set.name, {attempt}, 1, wall_s), invocation.output);
  std::cerr << "report written to " << invocation.output.string() << "\n";
  return attempt.verdict == Verdict::accepted ? 0 : 1;
}

int command_evaluate(const Invocation& invocation) {
  const EngineConfig config = resolve_config(invocation);
  ProblemSet set = load_corpus(invocation.corpus);
  if (invocation.problem_id) {
    const Problem* problem = set.find(*invocation.problem_id);
    if (!problem) {
      std::cerr << "no problem '" << *invocation.problem_id << "'\n";
      return 2;
    }
    set.problems = {*problem};
  }
  if (set.problems.empty()) {
    std::cerr << "corpus '" << set.name << "' has no problems\n";
    return 1;
  }

  Sandbox sandbox(config.sandbox);
  BackendFactory backends(invocation.backend, invocation.script_path, config.http);

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::vector<Attempt>> per_problem(set.problems.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> harness_failed{false};
  std::mutex log_mutex;

  auto worker = [&] {
    while (true) {
      const size_t index = next.fetch_add(1);
      if (index >= set.problems.size() || harness_failed.load()) return;
      const Problem& problem = set.problems[index];
      for (int attempt_index = 0; attempt_index < invocation.k; ++attempt_index) {
        try {
          per_problem[index].push_back(
              run_attempt(problem, attempt_index, config, sandbox, backends));
        } catch (const Error& ex) {
          std::lock_guard lock(log_mutex);
          std::cerr << problem.id << " attempt " << attempt_index << ": " << ex.what() << "\n";
          harness_failed.store(true);
          return;
        }
      }
      std::lock_guard lock(log_mutex);
      int accepted = 0;
      for (const Attempt& attempt : per_problem[index]) {
        if (attempt.verdict == Verdict::accepted) ++accepted;
      }
      std::cerr << problem.id << ": " << accepted << "/" << invocation.k << " accepted\n";
    }
  };

  const int worker_count = std::max(1, std::min<int>(invocation.workers,
                                                     static_cast<int>(set.problems.size())));
  std::vector<std::thread> threads;
  threads.reserve(worker_count);
  for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);
  for (std::thread& thread : threads) thread.join();
  if (harness_failed.load()) return 1;

  std::vector<Attempt> attempts;
  for (std::vector<Attempt>& chunk : per_problem) {
    for (Attempt& attempt : chunk) attempts.push_back(std::move(attempt));
  }
  const double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const RunReport report =
      make_report(config, set.name, std::move(attempts), invocation.k, wall_s);
  emit_report(report, invocation.output);
  std::cerr << "pass@" << invocation.k << " = " << report.aggregate.pass_at_k << " over "
            << set.problems.size() << " problems\n";
  std::cerr << "report written to " << invocation.output.string() << "\n";
  return 0;
}

}  // namespace

int run(const Invocation& invocation) {
  try {
    switch (invocation.command) {
      case Invocation::Command::ingest_check: return command_ingest_check(invocation);
      case Invocation::Command::inspect: return command_inspect(invocation);
      case Invocation::Command::solve: return command_solve(invocation);
      case Invocation::Command::evaluate: return command_evaluate(invocation);
    }
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"flow-engineering solver for competitive-programming-style problems"};
  app.require_subcommand(1);

  Invocation invocation;
  std::string backend_text = "http";

  auto add_common = [&](CLI::App* cmd, bool needs_backend) {
    cmd->add_option("--corpus", invocation.corpus, "corpus root directory")->required();
    cmd->add_option("--config", invocation.config_path, "YAML config file");
    if (needs_backend) {
      cmd->add_option("--backend", backend_text, "http or scripted:<path>");
      cmd->add_option("--output", invocation.output, "report output path");
    }
  };

  CLI::App* solve = app.add_subcommand("solve", "run the flow on one problem");
  add_common(solve, true);
  solve->add_option("--problem", invocation.problem_id, "problem id")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "pass@k over the corpus");
  add_common(evaluate, true);
  evaluate->add_option("--problem", invocation.problem_id, "restrict to one problem id");
  evaluate->add_option("--k", invocation.k, "attempts per problem")->check(CLI::PositiveNumber);
  evaluate->add_option("--workers", invocation.workers, "parallel problem workers")
      ->check(CLI::PositiveNumber);

  CLI::App* ingest = app.add_subcommand("ingest-check", "validate a corpus and list defects");
  add_common(ingest, false);

  CLI::App* inspect = app.add_subcommand("inspect", "pretty-print one problem");
  add_common(inspect, false);
  inspect->add_option("--problem", invocation.problem_id, "problem id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? 0 : 2;
  }

  if (solve->parsed()) invocation.command = Invocation::Command::solve;
  if (evaluate->parsed()) invocation.command = Invocation::Command::evaluate;
  if (ingest->parsed()) invocation.command = Invocation::Command::ingest_check;
  if (inspect->parsed()) invocation.command = Invocation::Command::inspect;

  if (backend_text == "http") {
    invocation.backend = Invocation::BackendKind::http;
  } else if (backend_text.rfind("scripted:", 0) == 0 && backend_text.size() > 9) {
    invocation.backend = Invocation::BackendKind::scripted;
    invocation.script_path = backend_text.substr(9);
  } else {
    std::cerr << "--backend must be 'http' or 'scripted:<path>'\n";
    return 2;
  }

  return run(invocation);
}

}  // namespace flowsolve
