#include "a2w/harness.hpp"

#include "a2w/cwm.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace a2w {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

json encode_action(const Space& space, const Action& a) {
  if (space.kind == Space::Kind::Discrete && a.size() == 1) return static_cast<std::int64_t>(a[0]);
  json arr = json::array();
  for (double x : a) arr.push_back(x);
  return arr;
}

}  // namespace

double decode_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  if (v.is_string()) {
    auto s = to_lower(v.get<std::string>());
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf" || s == "+inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-infinity") return -std::numeric_limits<double>::infinity();
  }
  throw ProtocolViolation("expected a number, got " + v.dump());
}

json encode_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

std::vector<double> decode_numbers(const json& v) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& e : v) {
      if (e.is_array()) {
        auto inner = decode_numbers(e);
        out.insert(out.end(), inner.begin(), inner.end());
      } else {
        out.push_back(decode_number(e));
      }
    }
  } else {
    out.push_back(decode_number(v));
  }
  return out;
}

bool has_nonfinite(const json& v) {
  if (v.is_string()) {
    auto s = to_lower(v.get<std::string>());
    return s == "nan" || s == "-nan" || s.find("inf") != std::string::npos;
  }
  if (v.is_number_float()) return !std::isfinite(v.get<double>());
  if (v.is_array()) {
    for (const auto& e : v) {
      if (has_nonfinite(e)) return true;
    }
  }
  return false;
}

HarnessResponse parse_response_line(std::string_view line) {
  auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolViolation("harness sent a non-JSON line: " + std::string(utf8_prefix(line, 200)));
  if (!j.contains("id") || !j["id"].is_number_integer() || !j.contains("ok") || !j["ok"].is_boolean()) {
    throw ProtocolViolation("harness response lacks id/ok: " + std::string(utf8_prefix(line, 200)));
  }
  HarnessResponse r;
  r.id = j["id"].get<std::int64_t>();
  r.ok = j["ok"].get<bool>();
  if (r.ok) {
    if (!j.contains("result") || j.contains("error")) throw ProtocolViolation("ok response must carry exactly a result");
    r.result = j["result"];
  } else {
    if (!j.contains("error") || !j["error"].is_object() || j.contains("result")) {
      throw ProtocolViolation("error response must carry exactly an error object");
    }
    const auto& e = j["error"];
    r.error = HarnessErrorInfo{e.value("type", "Error"), e.value("message", ""), e.value("traceback_tail", "")};
  }
  return r;
}

std::vector<std::string> expand_harness_command(const std::vector<std::string>& command, const fs::path& artifact) {
  std::vector<std::string> out;
  bool used = false;
  for (auto arg : command) {
    for (std::size_t p; (p = arg.find("{artifact}")) != std::string::npos;) {
      arg.replace(p, 10, artifact.string());
      used = true;
    }
    out.push_back(std::move(arg));
  }
  if (!used) out.push_back(artifact.string());
  return out;
}

// ---- client ----

HarnessClient::HarnessClient(const std::vector<std::string>& command, const fs::path& artifact,
                             double request_timeout_seconds)
    : command_(command), artifact_(artifact), timeout_(request_timeout_seconds) {
  SpawnOptions opts;
  opts.argv = expand_harness_command(command, fs::absolute(artifact));
  opts.working_dir = fs::absolute(artifact).parent_path();
  opts.deny_network = true;
  opts.env = {{"PYTHONDONTWRITEBYTECODE", "1"}, {"PYTHONUNBUFFERED", "1"}};
  child_.emplace(ChildProcess::spawn(opts));
}

HarnessClient::~HarnessClient() { shutdown(); }

bool HarnessClient::alive() { return child_ && !down_ && !child_->try_wait().has_value(); }

std::string HarnessClient::stderr_tail() const { return child_ ? child_->stderr_tail() : std::string(); }

HarnessResponse HarnessClient::call(const std::string& op, json payload) {
  if (!child_ || down_) throw HarnessCrash("harness session already closed", stderr_tail());
  const std::int64_t id = next_id_++;
  json req = json::object();
  req["id"] = id;
  req["op"] = op;
  for (auto& [k, v] : payload.items()) req[k] = v;
  if (!child_->write_all(req.dump() + "\n")) {
    child_->kill_group();
    down_ = true;
    throw HarnessCrash("harness closed its input before '" + op + "'", stderr_tail());
  }
  std::string line;
  auto st = child_->read_line(line, timeout_);
  if (st != ChildProcess::ReadStatus::Line) {
    child_->kill_group();
    child_->drain_stderr();
    down_ = true;
    if (st == ChildProcess::ReadStatus::Timeout) {
      throw HarnessCrash("harness did not answer '" + op + "' within " + std::to_string(timeout_) + "s", stderr_tail());
    }
    auto code = child_->try_wait();
    throw HarnessCrash("harness exited during '" + op + "'" + (code ? " with status " + std::to_string(*code) : ""),
                       stderr_tail());
  }
  auto r = parse_response_line(line);
  if (r.id == 0 && !r.ok) {
    // Startup failure, announced before any request was read.
    down_ = true;
    throw ArtifactError(r.error->type, r.error->message, r.error->traceback_tail);
  }
  if (r.id != id) throw ProtocolViolation("response id " + std::to_string(r.id) + " does not match request " + std::to_string(id));
  return r;
}

json HarnessClient::call_ok(const std::string& op, json payload) {
  auto r = call(op, std::move(payload));
  if (!r.ok) throw ArtifactError(r.error->type, r.error->message, r.error->traceback_tail);
  return r.result;
}

void HarnessClient::shutdown() {
  if (!child_) return;
  if (!down_ && !child_->try_wait()) {
    json req{{"id", next_id_++}, {"op", "shutdown"}};
    if (child_->write_all(req.dump() + "\n")) {
      child_->close_stdin();
      std::string line;
      child_->read_line(line, std::min(timeout_, 2.0));
    }
  }
  down_ = true;
  child_->kill_group();
  child_->drain_stderr();
}

// ---- remote env / game ----

RemoteEnv::RemoteEnv(std::vector<std::string> command, fs::path artifact, double request_timeout_seconds)
    : command_(std::move(command)),
      artifact_(std::move(artifact)),
      timeout_(request_timeout_seconds),
      client_(std::make_unique<HarnessClient>(command_, artifact_, timeout_)) {}

EnvSpace RemoteEnv::spaces() const {
  if (!spaces_) {
    auto r = client_->call_ok("spaces");
    try {
      spaces_ = r.get<EnvSpace>();
    } catch (const json::exception& e) {
      throw ProtocolViolation(std::string("malformed spaces result: ") + e.what());
    }
  }
  return *spaces_;
}

State RemoteEnv::reset(std::uint64_t seed) {
  auto r = client_->call_ok("reset", json{{"seed", seed}});
  seed_ = seed;
  state_ = decode_numbers(r.at("observation"));
  return *state_;
}

void RemoteEnv::set_state(const State& s) {
  json arr = json::array();
  for (double x : s) arr.push_back(encode_number(x));
  client_->call_ok("set_state", json{{"state", arr}});
  state_ = s;
}

StepResult RemoteEnv::step(const Action& a) {
  auto r = client_->call_ok("step", json{{"action", encode_action(spaces().action, a)}});
  StepResult out;
  out.next = decode_numbers(r.at("observation"));
  out.reward = decode_number(r.at("reward"));
  out.done = r.at("done").get<bool>();
  state_ = out.next;
  return out;
}

// New session brought to the same point: same seed, then the last known
// (fully observed) state.
std::unique_ptr<EnvHandle> RemoteEnv::clone() const {
  auto copy = std::make_unique<RemoteEnv>(command_, artifact_, timeout_);
  if (seed_) copy->reset(*seed_);
  if (state_) copy->set_state(*state_);
  return copy;
}

RemoteGame::RemoteGame(std::vector<std::string> command, fs::path artifact, double request_timeout_seconds)
    : client_(command, artifact, request_timeout_seconds) {}

std::string RemoteGame::init() { return client_.call_ok("game_init").value("observation", ""); }

std::vector<std::string> RemoteGame::actions() {
  return client_.call_ok("game_actions").at("actions").get<std::vector<std::string>>();
}

GameStep RemoteGame::step(const std::string& action) {
  auto r = client_.call_ok("game_step", json{{"action", action}});
  GameStep g;
  g.observation = r.value("observation", "");
  g.score = r.contains("score") ? decode_number(r["score"]) : 0.0;
  g.done = r.value("done", false);
  g.won = r.value("won", false);
  return g;
}

TestRunSummary run_tests_via_harness(HarnessClient& client, const std::vector<std::string>& test_paths) {
  auto r = client.call_ok("run_tests", json{{"paths", test_paths}});
  TestRunSummary s;
  s.exit_code = r.value("exit_code", -1);
  s.passed = r.value("passed", 0);
  s.failed = r.value("failed", 0);
  s.first_failure_id = r.value("first_failure_id", "");
  s.log_tail = r.value("log_tail", "");
  s.no_tests = r.value("no_tests", false);
  return s;
}

// ---- play_env ----

bool PlayLog::has_errors() const {
  if (crashed) return true;
  for (const auto& r : records) {
    if (!r.error.empty()) return true;
  }
  return false;
}

void to_json(json& j, const PlayRecord& r) {
  j = json{{"step", r.step},         {"state", r.state}, {"action", r.action}, {"observation", r.observation},
           {"reward", encode_number(r.reward)}, {"done", r.done}, {"won", r.won}, {"nonfinite", r.nonfinite},
           {"error", r.error}};
}

void from_json(const json& j, PlayRecord& r) {
  r.step = j.at("step").get<int>();
  r.state = j.value("state", json());
  r.action = j.value("action", json());
  r.observation = j.value("observation", json());
  r.reward = j.contains("reward") ? decode_number(j["reward"]) : 0.0;
  r.done = j.value("done", false);
  r.won = j.value("won", false);
  r.nonfinite = j.value("nonfinite", false);
  r.error = j.value("error", "");
}

void to_json(json& j, const PlayLog& l) {
  j = json{{"kind", l.kind},
           {"initial_observation", l.initial_observation},
           {"records", l.records},
           {"crashed", l.crashed},
           {"error_type", l.error_type},
           {"error_message", l.error_message},
           {"stderr_tail", l.stderr_tail},
           {"nonfinite", l.nonfinite},
           {"timed_out", l.timed_out}};
}

void from_json(const json& j, PlayLog& l) {
  l.kind = j.value("kind", "code_env");
  l.initial_observation = j.value("initial_observation", json());
  l.records = j.value("records", std::vector<PlayRecord>{});
  l.crashed = j.value("crashed", false);
  l.error_type = j.value("error_type", "");
  l.error_message = j.value("error_message", "");
  l.stderr_tail = j.value("stderr_tail", "");
  l.nonfinite = j.value("nonfinite", false);
  l.timed_out = j.value("timed_out", false);
}

namespace {

void mark_failure(PlayLog& log, const std::string& type, const std::string& message, const std::string& stderr_tail) {
  log.crashed = true;
  log.error_type = type;
  log.error_message = message;
  log.stderr_tail = utf8_tail(stderr_tail, kMaxLogTailBytes);
}

void play_code_env(HarnessClient& c, PlayLog& log, const PlayConfig& cfg, const std::vector<json>& probes,
                   double deadline) {
  std::optional<Space> action_space;
  {
    auto r = c.call("spaces");
    if (r.ok) {
      try {
        action_space = r.result.at("action").get<Space>();
      } catch (const std::exception&) {
      }
    }
  }
  auto reset = [&](std::uint64_t seed) -> std::optional<json> {
    auto r = c.call("reset", json{{"seed", seed}});
    if (!r.ok) {
      mark_failure(log, r.error->type, r.error->message, r.error->traceback_tail);
      return std::nullopt;
    }
    return r.result.value("observation", json());
  };
  auto obs = reset(cfg.seed);
  if (!obs) return;
  log.initial_observation = *obs;
  log.nonfinite = has_nonfinite(*obs);
  json state = *obs;

  Rng rng(mix_seed(cfg.seed, 7));
  for (int i = 0; i < cfg.session_budget; ++i) {
    if (now_seconds() > deadline) {
      log.timed_out = true;
      break;
    }
    json action;
    if (static_cast<std::size_t>(i) < probes.size()) {
      action = probes[i];
    } else if (action_space) {
      action = encode_action(*action_space, sample_action(*action_space, rng));
    } else {
      action = 0;
    }
    PlayRecord rec;
    rec.step = i + 1;
    rec.state = state;
    rec.action = action;
    auto r = c.call("step", json{{"action", action}});
    if (!r.ok) {
      rec.error = r.error->type + ": " + r.error->message;
      log.records.push_back(std::move(rec));
      continue;
    }
    rec.observation = r.result.value("observation", json());
    try {
      rec.reward = decode_number(r.result.at("reward"));
      rec.done = r.result.at("done").get<bool>();
    } catch (const std::exception& e) {
      rec.error = std::string("SchemaError: step result malformed: ") + e.what();
    }
    rec.nonfinite = r.result.value("nonfinite", false) || has_nonfinite(rec.observation) ||
                    (r.result.contains("reward") && has_nonfinite(r.result["reward"]));
    log.nonfinite = log.nonfinite || rec.nonfinite;
    state = rec.observation;
    bool done = rec.done;
    log.records.push_back(std::move(rec));
    if (done) {
      auto again = reset(mix_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1));
      if (!again) return;
      state = *again;
    }
  }
}

void play_text_game(HarnessClient& c, PlayLog& log, const PlayConfig& cfg, const std::vector<json>& probes,
                    double deadline) {
  auto init = c.call("game_init");
  if (!init.ok) {
    mark_failure(log, init.error->type, init.error->message, init.error->traceback_tail);
    return;
  }
  log.initial_observation = init.result.value("observation", json(""));
  json state = log.initial_observation;
  Rng rng(mix_seed(cfg.seed, 7));
  for (int i = 0; i < cfg.session_budget; ++i) {
    if (now_seconds() > deadline) {
      log.timed_out = true;
      break;
    }
    PlayRecord rec;
    rec.step = i + 1;
    rec.state = state;
    std::string action;
    if (static_cast<std::size_t>(i) < probes.size()) {
      action = probes[i].is_string() ? probes[i].get<std::string>() : probes[i].dump();
    } else {
      auto acts = c.call("game_actions");
      if (!acts.ok) {
        rec.error = acts.error->type + ": " + acts.error->message;
        log.records.push_back(std::move(rec));
        break;
      }
      auto list = acts.result.value("actions", std::vector<std::string>{});
      if (list.empty()) break;
      std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
      action = list[pick(rng)];
    }
    rec.action = action;
    auto r = c.call("game_step", json{{"action", action}});
    if (!r.ok) {
      rec.error = r.error->type + ": " + r.error->message;
      log.records.push_back(std::move(rec));
      continue;
    }
    rec.observation = r.result.value("observation", json(""));
    rec.reward = r.result.contains("score") ? decode_number(r.result["score"]) : 0.0;
    rec.done = r.result.value("done", false);
    rec.won = r.result.value("won", false);
    state = rec.observation;
    bool done = rec.done;
    log.records.push_back(std::move(rec));
    if (done) break;
  }
}

}  // namespace

PlayLog play_env(const std::vector<std::string>& harness_command, const fs::path& artifact, Representation kind,
                 const PlayConfig& cfg, const std::vector<json>& probes) {
  if (kind == Representation::PddlDomain) throw PreconditionError("play_env serves code environments and text games only");
  PlayLog log;
  log.kind = to_string(kind);
  const double deadline = now_seconds() + cfg.session_timeout_seconds;
  std::unique_ptr<HarnessClient> client;
  try {
    client = std::make_unique<HarnessClient>(harness_command, artifact, cfg.request_timeout_seconds);
    if (kind == Representation::CodeEnv) play_code_env(*client, log, cfg, probes, deadline);
    else play_text_game(*client, log, cfg, probes, deadline);
    client->shutdown();
  } catch (const ArtifactError& e) {
    mark_failure(log, e.type(), e.what(), e.traceback_tail());
  } catch (const HarnessCrash& e) {
    mark_failure(log, "HarnessCrash", e.what(), e.stderr_tail());
  } catch (const ProtocolViolation& e) {
    mark_failure(log, "ProtocolViolation", e.what(), client ? client->stderr_tail() : "");
  } catch (const SpawnError& e) {
    mark_failure(log, "HarnessCrash", e.what(), "");
  }
  if (client) client->shutdown();
  return log;
}

}  // namespace a2w
