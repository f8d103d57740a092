#include "a2w/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

namespace a2w {

namespace {

constexpr std::size_t kStderrKeep = 16 * 1024;

void write_proc_file(const char* path, const std::string& content) {
  int fd = ::open(path, O_WRONLY);
  if (fd < 0) return;
  [[maybe_unused]] auto n = ::write(fd, content.data(), content.size());
  ::close(fd);
}

void enter_private_network(const std::string& uid_map, const std::string& gid_map) {
  write_proc_file("/proc/self/setgroups", "deny");
  write_proc_file("/proc/self/uid_map", uid_map);
  write_proc_file("/proc/self/gid_map", gid_map);
}

// A fresh user namespace drops DAC overrides, so paths owned by another uid
// (a 0700 home directory, say) can become unreachable. Probe in a throwaway
// child before committing the real one.
bool private_network_usable(const std::vector<std::string>& paths, const std::string& uid_map,
                            const std::string& gid_map) {
  pid_t pid = ::fork();
  if (pid < 0) return false;
  if (pid == 0) {
    if (::unshare(CLONE_NEWUSER | CLONE_NEWNET) != 0) _exit(2);
    enter_private_network(uid_map, gid_map);
    for (const auto& p : paths) {
      if (::access(p.c_str(), R_OK) != 0) _exit(1);
    }
    _exit(0);
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

void keep_tail(std::string& buf, std::size_t keep) {
  if (buf.size() > 2 * keep) buf.erase(0, buf.size() - keep);
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

}  // namespace

ChildProcess ChildProcess::spawn(const SpawnOptions& opts) {
  if (opts.argv.empty()) throw SpawnError("empty argv");
  int in[2], out[2], err[2];
  if (::pipe2(in, O_CLOEXEC) || ::pipe2(out, O_CLOEXEC) || ::pipe2(err, O_CLOEXEC)) {
    throw SpawnError(std::string("pipe: ") + std::strerror(errno));
  }
  // Everything the child touches is prepared before fork.
  std::vector<char*> argv;
  for (const auto& a : opts.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  const std::string wd = opts.working_dir.string();
  const uid_t uid = ::getuid();
  const gid_t gid = ::getgid();
  const std::string uid_map = std::to_string(uid) + " " + std::to_string(uid) + " 1\n";
  const std::string gid_map = std::to_string(gid) + " " + std::to_string(gid) + " 1\n";

  bool use_netns = false;
  if (opts.deny_network) {
    std::vector<std::string> probe;
    if (!wd.empty()) probe.push_back(fs::absolute(opts.working_dir).string());
    for (const auto& a : opts.argv) {
      std::error_code ec;
      if (fs::path(a).is_absolute() && fs::exists(a, ec)) probe.push_back(a);
    }
    use_netns = private_network_usable(probe, uid_map, gid_map);
  }

  pid_t pid = ::fork();
  if (pid < 0) throw SpawnError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in[0], 0);
    ::dup2(out[1], 1);
    ::dup2(err[1], 2);
    if (!wd.empty() && ::chdir(wd.c_str()) != 0) _exit(127);
    for (const auto& [k, v] : opts.env) ::setenv(k.c_str(), v.c_str(), 1);
    if (opts.deny_network) {
      if (use_netns && ::unshare(CLONE_NEWUSER | CLONE_NEWNET) == 0) {
        enter_private_network(uid_map, gid_map);
      } else {
        for (const char* k : {"http_proxy", "https_proxy", "HTTP_PROXY", "HTTPS_PROXY", "ALL_PROXY", "all_proxy"}) {
          ::setenv(k, "http://127.0.0.1:9", 1);
        }
        ::unsetenv("no_proxy");
        ::unsetenv("NO_PROXY");
      }
    }
    ::execvp(argv[0], argv.data());
    _exit(127);
  }
  ::setpgid(pid, pid);
  ::close(in[0]);
  ::close(out[1]);
  ::close(err[1]);
  ChildProcess c;
  c.pid_ = pid;
  c.in_ = in[1];
  c.out_ = out[0];
  c.err_ = err[0];
  set_nonblocking(c.out_);
  set_nonblocking(c.err_);
  return c;
}

ChildProcess::ChildProcess(ChildProcess&& o) noexcept { *this = std::move(o); }

ChildProcess& ChildProcess::operator=(ChildProcess&& o) noexcept {
  if (this != &o) {
    release();
    pid_ = std::exchange(o.pid_, -1);
    in_ = std::exchange(o.in_, -1);
    out_ = std::exchange(o.out_, -1);
    err_ = std::exchange(o.err_, -1);
    out_buf_ = std::move(o.out_buf_);
    stderr_ = std::move(o.stderr_);
    status_ = o.status_;
  }
  return *this;
}

ChildProcess::~ChildProcess() { release(); }

void ChildProcess::release() {
  if (pid_ > 0) kill_group();
  for (int* fd : {&in_, &out_, &err_}) {
    if (*fd >= 0) ::close(*fd);
    *fd = -1;
  }
  pid_ = -1;
}

bool ChildProcess::write_all(std::string_view data) {
  if (in_ < 0) return false;
  // A dead reader must not kill us with SIGPIPE.
  struct sigaction ign{}, old{};
  ign.sa_handler = SIG_IGN;
  ::sigaction(SIGPIPE, &ign, &old);
  bool ok = true;
  while (!data.empty()) {
    auto n = ::write(in_, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      ok = false;
      break;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  ::sigaction(SIGPIPE, &old, nullptr);
  return ok;
}

void ChildProcess::close_stdin() {
  if (in_ >= 0) ::close(in_);
  in_ = -1;
}

void ChildProcess::pump_stderr() {
  if (err_ < 0) return;
  char buf[4096];
  for (;;) {
    auto n = ::read(err_, buf, sizeof buf);
    if (n > 0) {
      stderr_.append(buf, static_cast<std::size_t>(n));
      keep_tail(stderr_, kStderrKeep);
      continue;
    }
    if (n == 0) {
      ::close(err_);
      err_ = -1;
    }
    return;
  }
}

ChildProcess::ReadStatus ChildProcess::read_some(std::string& sink, double timeout_seconds) {
  if (!out_buf_.empty()) {
    sink += out_buf_;
    out_buf_.clear();
    return ReadStatus::Line;
  }
  const double deadline = now_seconds() + timeout_seconds;
  for (;;) {
    if (out_ < 0) {
      pump_stderr();
      return ReadStatus::Eof;
    }
    double left = deadline - now_seconds();
    if (left <= 0) return ReadStatus::Timeout;
    pollfd fds[2] = {{out_, POLLIN, 0}, {err_, POLLIN, 0}};
    int nfds = err_ >= 0 ? 2 : 1;
    int rc = ::poll(fds, nfds, static_cast<int>(left * 1000) + 1);
    if (rc < 0 && errno != EINTR) return ReadStatus::Eof;
    if (nfds == 2 && fds[1].revents) pump_stderr();
    if (fds[0].revents) {
      char buf[8192];
      auto n = ::read(out_, buf, sizeof buf);
      if (n > 0) {
        sink.append(buf, static_cast<std::size_t>(n));
        return ReadStatus::Line;
      }
      if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        ::close(out_);
        out_ = -1;
      }
    }
  }
}

ChildProcess::ReadStatus ChildProcess::read_line(std::string& line, double timeout_seconds) {
  const double deadline = now_seconds() + timeout_seconds;
  for (;;) {
    if (auto nl = out_buf_.find('\n'); nl != std::string::npos) {
      line = out_buf_.substr(0, nl);
      out_buf_.erase(0, nl + 1);
      return ReadStatus::Line;
    }
    std::string chunk;
    double left = std::max(0.0, deadline - now_seconds());
    // read_some would hand back the partial buffer; read straight from the pipe.
    std::string saved = std::move(out_buf_);
    out_buf_.clear();
    auto st = read_some(chunk, left);
    out_buf_ = std::move(saved) + chunk;
    if (st == ReadStatus::Line) continue;
    return st;
  }
}

std::optional<int> ChildProcess::try_wait() {
  if (status_) return status_;
  if (pid_ <= 0) return std::nullopt;
  int st = 0;
  if (::waitpid(pid_, &st, WNOHANG) == pid_) status_ = decode_status(st);
  return status_;
}

void ChildProcess::kill_group() {
  if (pid_ <= 0) return;
  ::kill(-pid_, SIGKILL);
  if (!status_) {
    int st = 0;
    while (::waitpid(pid_, &st, 0) < 0 && errno == EINTR) {
    }
    status_ = decode_status(st);
  }
}

ExecOutcome run_process(const SpawnOptions& opts, double timeout_seconds, std::size_t max_output_bytes) {
  const double start = now_seconds();
  const double deadline = start + timeout_seconds;
  ChildProcess child = ChildProcess::spawn(opts);
  child.close_stdin();

  ExecOutcome r;
  std::string out;
  for (;;) {
    double left = deadline - now_seconds();
    if (left <= 0) {
      r.timed_out = !child.try_wait().has_value();
      break;
    }
    auto st = child.read_some(out, std::min(left, 0.05));
    if (st == ChildProcess::ReadStatus::Line) {
      keep_tail(out, max_output_bytes);
      continue;
    }
    if (st == ChildProcess::ReadStatus::Eof) {
      while (!child.try_wait() && now_seconds() < deadline) ::usleep(1000);
      r.timed_out = !child.try_wait().has_value();
      break;
    }
    if (child.try_wait()) {
      // Exited, but a background grandchild may still hold stdout open.
      while (child.read_some(out, 0.05) == ChildProcess::ReadStatus::Line) keep_tail(out, max_output_bytes);
      break;
    }
  }
  child.kill_group();
  child.drain_stderr();
  r.exit_code = r.timed_out ? kTimeoutExitCode : child.try_wait().value_or(-1);
  r.stdout_tail = utf8_tail(out, max_output_bytes);
  r.stderr_tail = utf8_tail(child.stderr_tail(), max_output_bytes);
  r.duration_seconds = now_seconds() - start;
  return r;
}

}  // namespace a2w
