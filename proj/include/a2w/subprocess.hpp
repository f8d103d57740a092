#pragma once

#include <sys/types.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "a2w/util.hpp"

namespace a2w {

class SpawnError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kTimeoutExitCode = 124;

struct SpawnOptions {
  std::vector<std::string> argv;
  fs::path working_dir;
  // Run inside fresh user+network namespaces (no interfaces). Falls back to
  // pointing proxy variables at a closed port where namespaces are refused
  // or would leave the working dir or argv paths unreadable.
  bool deny_network = false;
  std::vector<std::pair<std::string, std::string>> env;
};

/// A child process in its own process group, with piped stdio. Destruction
/// kills the whole group and reaps the child.
class ChildProcess {
 public:
  static ChildProcess spawn(const SpawnOptions& opts);

  ChildProcess(ChildProcess&& other) noexcept;
  ChildProcess& operator=(ChildProcess&& other) noexcept;
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ~ChildProcess();

  pid_t pid() const { return pid_; }

  bool write_all(std::string_view data);
  void close_stdin();

  enum class ReadStatus { Line, Eof, Timeout };
  /// Reads one '\n'-terminated line from stdout (without the newline) while
  /// draining stderr into a bounded tail buffer.
  ReadStatus read_line(std::string& line, double timeout_seconds);
  /// Appends whatever stdout bytes arrive within the timeout to `sink`.
  /// Returns Line when bytes were appended.
  ReadStatus read_some(std::string& sink, double timeout_seconds);
  void drain_stderr() { pump_stderr(); }

  const std::string& stderr_tail() const { return stderr_; }

  std::optional<int> try_wait();
  /// Kills the process group (SIGKILL) and reaps the child.
  void kill_group();

 private:
  ChildProcess() = default;
  void release();
  void pump_stderr();

  pid_t pid_ = -1;
  int in_ = -1, out_ = -1, err_ = -1;
  std::string out_buf_;
  std::string stderr_;
  std::optional<int> status_;
};

struct ExecOutcome {
  int exit_code = 0;  // kTimeoutExitCode when timed out; 128+N when killed by signal N
  std::string stdout_tail;
  std::string stderr_tail;
  double duration_seconds = 0.0;
  bool timed_out = false;
};

/// Runs to completion or until the wall-clock deadline, then kills the group.
ExecOutcome run_process(const SpawnOptions& opts, double timeout_seconds, std::size_t max_output_bytes);

}  // namespace a2w
