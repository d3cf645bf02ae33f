#include "flowsolve/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

#include "flowsolve/errors.hpp"

namespace flowsolve {

namespace {

using Clock = std::chrono::steady_clock;

// Writing to a child that already exited must not kill the harness.
void ignore_sigpipe_once() {
  static const bool done = [] {
    struct sigaction action {};
    action.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &action, nullptr);
    return true;
  }();
  (void)done;
}

std::string substitute(const std::string& arg, const std::filesystem::path& source,
                       const std::filesystem::path& dir) {
  std::string out = arg;
  auto replace_all = [&](const std::string& token, const std::string& value) {
    size_t pos = 0;
    while ((pos = out.find(token, pos)) != std::string::npos) {
      out.replace(pos, token.size(), value);
      pos += value.size();
    }
  };
  replace_all("{source}", source.string());
  replace_all("{dir}", dir.string());
  return out;
}

std::filesystem::path make_scratch_dir(const std::filesystem::path& root) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  for (int tries = 0; tries < 16; ++tries) {
    std::filesystem::path dir =
        root / ("run-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
                std::to_string(rd() & 0xffffff));
    std::error_code ec;
    if (std::filesystem::create_directories(dir, ec)) return dir;
  }
  return {};
}

struct ProcessOutcome {
  bool timed_out = false;
  bool truncated = false;
  bool exec_failed = false;
  int wait_status = 0;
  long max_rss_bytes = 0;
  std::string out;
  std::string err;
  std::chrono::duration<double> duration{0.0};
  std::string setup_error;
};

// Fork/exec with stdin fed through a pipe, stdout/stderr captured up to
// max_output bytes each, SIGKILL to the process group at the deadline.
ProcessOutcome run_process(const std::vector<std::string>& argv, const std::string& stdin_data,
                           const std::filesystem::path& cwd, std::chrono::duration<double> wall,
                           std::uint64_t memory_bytes, std::uint64_t max_output) {
  ProcessOutcome outcome;

  int in_pipe[2], out_pipe[2], err_pipe[2], exec_pipe[2];
  if (pipe(in_pipe) || pipe(out_pipe) || pipe(err_pipe) || pipe2(exec_pipe, O_CLOEXEC)) {
    outcome.setup_error = std::string("pipe: ") + std::strerror(errno);
    return outcome;
  }

  const Clock::time_point start = Clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    outcome.setup_error = std::string("fork: ") + std::strerror(errno);
    return outcome;
  }

  if (pid == 0) {
    // Child: own process group so the whole tree can be killed at once.
    setpgid(0, 0);
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(in_pipe[0]); close(in_pipe[1]);
    close(out_pipe[0]); close(out_pipe[1]);
    close(err_pipe[0]); close(err_pipe[1]);

    if (chdir(cwd.c_str()) != 0) _exit(127);

    rlimit address_space{memory_bytes, memory_bytes};
    setrlimit(RLIMIT_AS, &address_space);
    const rlim_t cpu_seconds = static_cast<rlim_t>(std::ceil(wall.count())) + 1;
    rlimit cpu{cpu_seconds, cpu_seconds + 1};
    setrlimit(RLIMIT_CPU, &cpu);
    rlimit core{0, 0};
    setrlimit(RLIMIT_CORE, &core);

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const std::string& arg : argv) args.push_back(const_cast<char*>(arg.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    const int err = errno;
    ssize_t ignored = write(exec_pipe[1], &err, sizeof(err));
    (void)ignored;
    _exit(127);
  }

  // Parent.
  close(in_pipe[0]);
  close(out_pipe[1]);
  close(err_pipe[1]);
  close(exec_pipe[1]);
  fcntl(in_pipe[1], F_SETFL, O_NONBLOCK);

  const Clock::time_point deadline =
      start + std::chrono::duration_cast<Clock::duration>(wall);
  size_t stdin_written = 0;
  bool stdin_open = true;
  bool out_open = true, err_open = true;
  size_t out_dropped = 0, err_dropped = 0;

  auto drain = [&](int fd, std::string& sink, bool& open, size_t& dropped) {
    char buf[8192];
    const ssize_t n = read(fd, buf, sizeof(buf));
    if (n <= 0) {
      if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        close(fd);
        open = false;
      }
      return;
    }
    const size_t room = sink.size() < max_output ? max_output - sink.size() : 0;
    const size_t keep = std::min(room, static_cast<size_t>(n));
    sink.append(buf, keep);
    dropped += static_cast<size_t>(n) - keep;
  };

  if (stdin_data.empty()) {
    close(in_pipe[1]);
    stdin_open = false;
  }

  while (out_open || err_open) {
    pollfd fds[3];
    nfds_t nfds = 0;
    int out_index = -1, err_index = -1, in_index = -1;
    if (out_open) { fds[nfds] = {out_pipe[0], POLLIN, 0}; out_index = static_cast<int>(nfds++); }
    if (err_open) { fds[nfds] = {err_pipe[0], POLLIN, 0}; err_index = static_cast<int>(nfds++); }
    if (stdin_open) { fds[nfds] = {in_pipe[1], POLLOUT, 0}; in_index = static_cast<int>(nfds++); }

    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) {
      outcome.timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      break;
    }
    const int timeout_ms = static_cast<int>(std::min<long long>(remaining.count(), 200));
    const int ready = poll(fds, nfds, timeout_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) continue;

    if (out_index >= 0 && (fds[out_index].revents & (POLLIN | POLLHUP))) {
      drain(out_pipe[0], outcome.out, out_open, out_dropped);
    }
    if (err_index >= 0 && (fds[err_index].revents & (POLLIN | POLLHUP))) {
      drain(err_pipe[0], outcome.err, err_open, err_dropped);
    }
    if (in_index >= 0 && (fds[in_index].revents & (POLLOUT | POLLERR | POLLHUP))) {
      if (fds[in_index].revents & (POLLERR | POLLHUP)) {
        close(in_pipe[1]);
        stdin_open = false;
      } else {
        const ssize_t n = write(in_pipe[1], stdin_data.data() + stdin_written,
                                stdin_data.size() - stdin_written);
        if (n > 0) stdin_written += static_cast<size_t>(n);
        if (n < 0 && errno != EAGAIN && errno != EINTR) {
          close(in_pipe[1]);
          stdin_open = false;
        } else if (stdin_written == stdin_data.size()) {
          close(in_pipe[1]);
          stdin_open = false;
        }
      }
    }
  }
  if (stdin_open) close(in_pipe[1]);
  if (out_open) close(out_pipe[0]);
  if (err_open) close(err_pipe[0]);

  // A candidate may close its streams and keep running, so the reap loop
  // enforces the deadline too.
  int status = 0;
  rusage usage{};
  for (;;) {
    const pid_t reaped = wait4(pid, &status, WNOHANG, &usage);
    if (reaped == pid) break;
    if (reaped < 0 && errno != EINTR) break;
    if (outcome.timed_out || Clock::now() >= deadline) {
      if (!outcome.timed_out) {
        outcome.timed_out = true;
        kill(-pid, SIGKILL);
        kill(pid, SIGKILL);
      }
      while (wait4(pid, &status, 0, &usage) < 0 && errno == EINTR) {
      }
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  outcome.wait_status = status;
  outcome.max_rss_bytes = usage.ru_maxrss * 1024L;
  outcome.duration = Clock::now() - start;
  outcome.truncated = out_dropped > 0 || err_dropped > 0;

  int exec_errno = 0;
  if (read(exec_pipe[0], &exec_errno, sizeof(exec_errno)) == sizeof(exec_errno)) {
    outcome.exec_failed = true;
    outcome.setup_error = std::string("exec: ") + std::strerror(exec_errno);
  }
  close(exec_pipe[0]);
  return outcome;
}

bool looks_out_of_memory(const ProcessOutcome& outcome, std::uint64_t memory_bytes) {
  if (outcome.err.find("MemoryError") != std::string::npos) return true;
  if (outcome.err.find("bad_alloc") != std::string::npos) return true;
  return outcome.max_rss_bytes > 0 &&
         static_cast<std::uint64_t>(outcome.max_rss_bytes) >= memory_bytes * 9 / 10;
}

}  // namespace

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::ok: return "ok";
    case RunStatus::nonzero_exit: return "nonzero_exit";
    case RunStatus::timeout: return "timeout";
    case RunStatus::memory_exceeded: return "memory_exceeded";
    case RunStatus::output_truncated: return "output_truncated";
    case RunStatus::setup_failure: return "setup_failure";
  }
  return "unknown";
}

SandboxConfig default_sandbox_config() {
  SandboxConfig config;
  RunnerSpec python;
  python.run = {"python3", "{source}"};
  python.source_file = "solution.py";
  config.runners["python"] = python;

  RunnerSpec cat;
  cat.run = {"cat"};
  cat.source_file = "payload.txt";
  config.runners["cat"] = cat;
  return config;
}

Sandbox::Sandbox(SandboxConfig config)
    : config_(std::move(config)),
      slots_(config_.max_concurrent > 0 ? config_.max_concurrent : 1) {
  ignore_sigpipe_once();
  if (config_.scratch_root.empty()) {
    config_.scratch_root = std::filesystem::temp_directory_path() / "flowsolve-sandbox";
  }
}

ExecutionResult Sandbox::run_candidate(const std::string& source, const std::string& language,
                                       const std::string& stdin_data,
                                       const RunLimits& limits) const {
  ExecutionResult result;

  auto runner_it = config_.runners.find(language);
  if (runner_it == config_.runners.end()) {
    result.status = RunStatus::setup_failure;
    result.stderr_text = "no runner registered for language '" + language + "'";
    return result;
  }
  const RunnerSpec& runner = runner_it->second;

  Semaphore::Slot slot(slots_);

  std::error_code ec;
  std::filesystem::create_directories(config_.scratch_root, ec);
  const std::filesystem::path scratch = make_scratch_dir(config_.scratch_root);
  if (scratch.empty()) {
    result.status = RunStatus::setup_failure;
    result.stderr_text = "could not create scratch directory under " +
                         config_.scratch_root.string();
    return result;
  }
  struct ScratchGuard {
    std::filesystem::path dir;
    ~ScratchGuard() {
      std::error_code ignore;
      std::filesystem::remove_all(dir, ignore);
    }
  } guard{scratch};

  const std::filesystem::path source_path = scratch / runner.source_file;
  {
    std::ofstream out(source_path, std::ios::binary);
    if (!out) {
      result.status = RunStatus::setup_failure;
      result.stderr_text = "could not write source file " + source_path.string();
      return result;
    }
    out << source;
  }

  auto expand = [&](const std::vector<std::string>& argv) {
    std::vector<std::string> expanded;
    expanded.reserve(argv.size());
    for (const std::string& arg : argv) expanded.push_back(substitute(arg, source_path, scratch));
    return expanded;
  };

  if (!runner.compile.empty()) {
    ProcessOutcome compiled = run_process(expand(runner.compile), "", scratch,
                                          config_.compile_time_limit, limits.memory,
                                          limits.max_output);
    if (!compiled.setup_error.empty()) {
      result.status = RunStatus::setup_failure;
      result.stderr_text = compiled.setup_error;
      return result;
    }
    if (compiled.timed_out || !WIFEXITED(compiled.wait_status) ||
        WEXITSTATUS(compiled.wait_status) != 0) {
      result.status = RunStatus::nonzero_exit;
      result.stdout_text = compiled.out;
      result.stderr_text = compiled.err;
      result.duration = compiled.duration;
      if (WIFEXITED(compiled.wait_status)) result.exit_code = WEXITSTATUS(compiled.wait_status);
      return result;
    }
  }

  ProcessOutcome ran = run_process(expand(runner.run), stdin_data, scratch, limits.wall_time,
                                   limits.memory, limits.max_output);
  if (!ran.setup_error.empty()) {
    result.status = RunStatus::setup_failure;
    result.stderr_text = ran.setup_error;
    return result;
  }

  result.stdout_text = std::move(ran.out);
  result.stderr_text = std::move(ran.err);
  result.duration = ran.duration;

  if (ran.timed_out) {
    result.status = RunStatus::timeout;
    if (result.duration < limits.wall_time) result.duration = limits.wall_time;
    return result;
  }

  if (WIFEXITED(ran.wait_status)) {
    result.exit_code = WEXITSTATUS(ran.wait_status);
  } else if (WIFSIGNALED(ran.wait_status)) {
    result.exit_code = 128 + WTERMSIG(ran.wait_status);
  }

  const bool clean_exit = WIFEXITED(ran.wait_status) && WEXITSTATUS(ran.wait_status) == 0;
  if (!clean_exit) {
    result.status = looks_out_of_memory(ran, limits.memory) ? RunStatus::memory_exceeded
                                                            : RunStatus::nonzero_exit;
    return result;
  }
  result.status = ran.truncated ? RunStatus::output_truncated : RunStatus::ok;
  return result;
}

}  // namespace flowsolve
