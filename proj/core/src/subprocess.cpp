#include "flowpilot/subprocess.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "flowpilot/error.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

std::optional<fs::path> find_executable(const std::string& program) {
  if (program.empty()) return std::nullopt;
  if (program.find('/') != std::string::npos) {
    if (::access(program.c_str(), X_OK) == 0 && !fs::is_directory(program)) return fs::path(program);
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  for (const auto& dir : text::split(path ? path : "/usr/bin:/bin", ':')) {
    if (dir.empty()) continue;
    fs::path candidate = fs::path(dir) / program;
    if (::access(candidate.c_str(), X_OK) == 0 && !fs::is_directory(candidate)) return candidate;
  }
  return std::nullopt;
}

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
  require(!argv.empty(), "run_process needs a program");
  const auto exe = find_executable(argv[0]);
  if (!exe) fail(ErrorCode::BackendNotFound, "executable '" + argv[0] + "' not found");

  int out_fd = -1;
  int pipe_fds[2] = {-1, -1};
  if (options.log_file) {
    out_fd = ::open(options.log_file->c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (out_fd < 0) fail(ErrorCode::PreconditionViolation, "cannot open log file " + options.log_file->string());
  } else {
    if (::pipe2(pipe_fds, O_CLOEXEC) != 0) fail(ErrorCode::PreconditionViolation, "pipe() failed");
  }

  std::vector<std::string> env_strings;
  for (char** e = environ; *e; ++e) {
    std::string entry(*e);
    const auto key = entry.substr(0, entry.find('='));
    if (!options.extra_env.count(key)) env_strings.push_back(std::move(entry));
  }
  for (const auto& [k, v] : options.extra_env) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::vector<std::string> args = argv;
  std::vector<char*> cargv;
  for (auto& a : args) cargv.push_back(a.data());
  cargv.push_back(nullptr);
  const std::string exe_str = exe->string();
  const std::string wd = options.working_directory.string();

  const pid_t pid = ::fork();
  if (pid < 0) fail(ErrorCode::PreconditionViolation, std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    const int target = options.log_file ? out_fd : pipe_fds[1];
    ::dup2(target, STDOUT_FILENO);
    ::dup2(target, STDERR_FILENO);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (!wd.empty() && ::chdir(wd.c_str()) != 0) ::_exit(126);
    ::execve(exe_str.c_str(), cargv.data(), envp.data());
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  if (out_fd >= 0) ::close(out_fd);
  if (pipe_fds[1] >= 0) ::close(pipe_fds[1]);

  ProcessResult result;
  const auto start = std::chrono::steady_clock::now();
  bool killed = false;
  int status = 0;
  char buffer[4096];
  while (true) {
    if (pipe_fds[0] >= 0) {
      pollfd p{pipe_fds[0], POLLIN, 0};
      if (::poll(&p, 1, 20) > 0) {
        const auto n = ::read(pipe_fds[0], buffer, sizeof buffer);
        if (n > 0) result.output.append(buffer, static_cast<std::size_t>(n));
      }
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (!killed) {
      const bool over_time = options.timeout && std::chrono::steady_clock::now() - start > *options.timeout;
      const bool stop = options.stop.stop_requested();
      if (over_time || stop) {
        result.timed_out = over_time;
        result.cancelled = stop && !over_time;
        ::killpg(pid, SIGKILL);
        killed = true;
      }
    }
  }
  if (pipe_fds[0] >= 0) {
    ssize_t n;
    while ((n = ::read(pipe_fds[0], buffer, sizeof buffer)) > 0) result.output.append(buffer, static_cast<std::size_t>(n));
    ::close(pipe_fds[0]);
  }
  // Reap anything the child left in its group.
  if (killed) ::killpg(pid, SIGKILL);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  return result;
}

}  // namespace flowpilot
