#pragma once

// Client side of the JSON-lines stdio protocol spoken by the environment
// harness (see docs/harness_protocol.md).

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "a2w/core.hpp"
#include "a2w/env.hpp"
#include "a2w/subprocess.hpp"
#include "a2w/toolbelt.hpp"

namespace a2w {

/// The harness process died, closed its stdout or stopped answering.
class HarnessCrash : public Error {
 public:
  HarnessCrash(const std::string& what, std::string stderr_tail)
      : Error(what), stderr_tail_(std::move(stderr_tail)) {}
  const std::string& stderr_tail() const noexcept { return stderr_tail_; }

 private:
  std::string stderr_tail_;
};

/// The harness answered with something that is not a valid response.
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

/// The hosted artifact raised; carries the harness's error record.
class ArtifactError : public EnvError {
 public:
  ArtifactError(std::string type, const std::string& message, std::string traceback_tail)
      : EnvError(std::move(type), message), traceback_(std::move(traceback_tail)) {}
  const std::string& traceback_tail() const noexcept { return traceback_; }

 private:
  std::string traceback_;
};

struct HarnessErrorInfo {
  std::string type;
  std::string message;
  std::string traceback_tail;
};

struct HarnessResponse {
  std::int64_t id = 0;
  bool ok = false;
  json result;                              // when ok
  std::optional<HarnessErrorInfo> error;    // when !ok
};

/// Decodes a protocol number: finite JSON numbers, or the strings "nan",
/// "inf", "-inf".
double decode_number(const json& v);
/// Encodes a double, mapping non-finite values to their string tags.
json encode_number(double x);
std::vector<double> decode_numbers(const json& v);
bool has_nonfinite(const json& v);

HarnessResponse parse_response_line(std::string_view line);

/// argv with every "{artifact}" replaced by the artifact path.
std::vector<std::string> expand_harness_command(const std::vector<std::string>& command, const fs::path& artifact);

class HarnessClient {
 public:
  HarnessClient(const std::vector<std::string>& command, const fs::path& artifact, double request_timeout_seconds = 10.0);
  ~HarnessClient();
  HarnessClient(const HarnessClient&) = delete;
  HarnessClient& operator=(const HarnessClient&) = delete;

  /// Sends one request and waits for the matching response.
  HarnessResponse call(const std::string& op, json payload = json::object());
  /// Like call() but throws ArtifactError for error responses.
  json call_ok(const std::string& op, json payload = json::object());

  /// Asks for a clean exit, then kills the process group regardless.
  void shutdown();
  bool alive();
  std::string stderr_tail() const;
  const fs::path& artifact() const { return artifact_; }
  const std::vector<std::string>& command() const { return command_; }
  double request_timeout() const { return timeout_; }

 private:
  std::vector<std::string> command_;
  fs::path artifact_;
  double timeout_;
  std::optional<ChildProcess> child_;
  std::int64_t next_id_ = 1;
  bool down_ = false;
};

/// EnvHandle backed by a harness session. clone() starts a second session
/// and replays the last seed and observed state into it.
class RemoteEnv : public EnvHandle {
 public:
  RemoteEnv(std::vector<std::string> command, fs::path artifact, double request_timeout_seconds = 10.0);

  EnvSpace spaces() const override;
  State reset(std::uint64_t seed) override;
  void set_state(const State& s) override;
  StepResult step(const Action& a) override;
  std::unique_ptr<EnvHandle> clone() const override;

  HarnessClient& client() { return *client_; }

 private:
  std::vector<std::string> command_;
  fs::path artifact_;
  double timeout_;
  std::unique_ptr<HarnessClient> client_;
  mutable std::optional<EnvSpace> spaces_;
  std::optional<std::uint64_t> seed_;
  std::optional<State> state_;
};

class RemoteGame : public GameHandle {
 public:
  RemoteGame(std::vector<std::string> command, fs::path artifact, double request_timeout_seconds = 10.0);

  std::string init() override;
  std::vector<std::string> actions() override;
  GameStep step(const std::string& action) override;

  HarnessClient& client() { return client_; }

 private:
  HarnessClient client_;
};

struct TestRunSummary {
  int exit_code = -1;
  int passed = 0;
  int failed = 0;
  std::string first_failure_id;
  std::string log_tail;
  bool no_tests = false;
};

TestRunSummary run_tests_via_harness(HarnessClient& client, const std::vector<std::string>& test_paths);

struct PlayRecord {
  int step = 0;
  json state;        // observation before the action
  json action;
  json observation;  // after the action
  double reward = 0.0;
  bool done = false;
  bool won = false;
  bool nonfinite = false;
  std::string error;  // "Type: message" when the artifact raised on this step
};

struct PlayLog {
  std::string kind;  // "code_env" or "text_game"
  json initial_observation;
  std::vector<PlayRecord> records;
  bool crashed = false;
  std::string error_type;
  std::string error_message;
  std::string stderr_tail;
  bool nonfinite = false;
  bool timed_out = false;

  bool has_errors() const;
};

void to_json(json& j, const PlayRecord& r);
void from_json(const json& j, PlayRecord& r);
void to_json(json& j, const PlayLog& l);
void from_json(const json& j, PlayLog& l);

/// Drives one bounded interaction: reset (or game_init), then up to
/// `session_budget` steps using `probes` first and seeded random actions
/// after. The harness is always terminated before returning. Artifact and
/// harness failures are captured in the log, not thrown.
PlayLog play_env(const std::vector<std::string>& harness_command, const fs::path& artifact, Representation kind,
                 const PlayConfig& cfg, const std::vector<json>& probes = {});

}  // namespace a2w
