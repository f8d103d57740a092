// Stand-in for the Python environment harness. Speaks the JSON-lines
// protocol on stdin/stdout and picks its behaviour from marker comments in
// the artifact:
//
//   # fixture: cliffwalking | toygame
//   # option: NAME[=VALUE]
//
// cliffwalking options: load_error, raise_on_reset, raise_on_step,
// crash_on_step, hang_on_step, reward_offset=X, nonfinite, wrong_shape,
// no_cliff_reset, wrong_done.
// toygame options: raise_on_init, raise_verb=VERB, unwinnable, empty_actions.

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <regex>
#include <thread>

#include "a2w/cwm.hpp"
#include "a2w/harness.hpp"
#include "a2w/textgame.hpp"

using namespace a2w;

namespace {

std::map<std::string, std::string> g_opts;
std::string g_fixture;

bool opt(const std::string& k) { return g_opts.count(k) > 0; }

void send(const json& j) {
  std::cout << j.dump() << "\n" << std::flush;
}

void ok(const json& id, json result) { send({{"id", id}, {"ok", true}, {"result", std::move(result)}}); }

void fail(const json& id, const std::string& type, const std::string& msg) {
  send({{"id", id},
        {"ok", false},
        {"error", {{"type", type}, {"message", msg}, {"traceback_tail", "Traceback (most recent call last):\n  " + type + ": " + msg}}}});
}

void read_markers(const std::string& src) {
  std::regex fixture_re(R"(#\s*fixture:\s*(\S+))");
  std::regex option_re(R"(#\s*option:\s*([a-z_]+)(?:=(\S+))?)");
  std::smatch m;
  if (std::regex_search(src, m, fixture_re)) g_fixture = m[1];
  for (auto it = std::sregex_iterator(src.begin(), src.end(), option_re); it != std::sregex_iterator(); ++it) {
    g_opts[(*it)[1]] = (*it)[2];
  }
}

struct Cliff {
  CliffWalkingEnv env;

  json spaces() { return json(env.spaces()); }

  json observation(int pos) {
    if (opt("wrong_shape")) return json::array({pos, 0});
    return pos;
  }

  int parse_action(const json& a) {
    json v = a.is_array() && a.size() == 1 ? a[0] : a;
    if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() > 3) throw EnvError("ValueError", "invalid action " + a.dump());
    return v.get<int>();
  }

  json step(const json& action) {
    int a = parse_action(action);
    int before = env.position();
    auto r = env.step({static_cast<double>(a)});
    int pos = static_cast<int>(r.next[0]);
    double reward = r.reward;
    bool done = r.done;
    if (opt("no_cliff_reset") && reward == -100.0) {
      // falls in but stays on the cliff cell
      int row = before / 12, col = before % 12;
      if (a == 0) --row;
      if (a == 1) ++col;
      if (a == 2) ++row;
      if (a == 3) --col;
      pos = row * 12 + col;
      env.set_state({static_cast<double>(pos)});
    }
    if (g_opts.count("reward_offset")) reward += std::stod(g_opts["reward_offset"]);
    if (opt("wrong_done")) done = !done;
    json res{{"observation", observation(pos)}, {"reward", reward}, {"done", done}};
    if (opt("nonfinite")) {
      res["reward"] = "nan";
      res["nonfinite"] = true;
    }
    return res;
  }
};

// pytest through the shell; summary counts parsed from its output.
json run_pytest(const std::vector<std::string>& paths, const fs::path& dir) {
  std::string cmd = "cd '" + dir.string() + "' && python3 -m pytest -q -p no:cacheprovider";
  for (const auto& p : paths) cmd += " '" + p + "'";
  cmd += " 2>&1";
  std::string out;
  FILE* f = popen(cmd.c_str(), "r");
  if (!f) throw EnvError("OSError", "cannot start pytest");
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), f)) > 0) out.append(buf.data(), n);
  int status = pclose(f);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
  std::smatch m;
  int passed = 0, failed = 0;
  if (std::regex_search(out, m, std::regex(R"((\d+) passed)"))) passed = std::stoi(m[1]);
  if (std::regex_search(out, m, std::regex(R"((\d+) failed)"))) failed = std::stoi(m[1]);
  std::string first;
  if (std::regex_search(out, m, std::regex(R"(FAILED (\S+))"))) first = m[1];
  return {{"exit_code", code},    {"passed", passed},   {"failed", failed},
          {"first_failure_id", first}, {"log_tail", utf8_tail(out, 2000)}, {"no_tests", code == 5}};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: fake_harness ARTIFACT\n";
    return 2;
  }
  fs::path artifact = argv[1];
  std::string src;
  try {
    src = read_file(artifact);
  } catch (const std::exception& e) {
    fail(0, "FileNotFoundError", e.what());
    return 1;
  }
  read_markers(src);
  if (opt("load_error") || (g_fixture != "cliffwalking" && g_fixture != "toygame")) {
    fail(0, opt("load_error") ? "SyntaxError" : "LoadError", "artifact defines no Environment or game entry point");
    return 1;
  }

  Cliff cliff;
  ToyGame::Options to;
  to.raise_on_init = opt("raise_on_init");
  to.raise_verb = g_opts.count("raise_verb") ? g_opts["raise_verb"] : "";
  to.winnable = !opt("unwinnable");
  ToyGame toy(to);

  std::string line;
  while (std::getline(std::cin, line)) {
    auto req = json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object() || !req.contains("id") || !req.contains("op")) {
      fail(-1, "ProtocolError", "malformed request line");
      continue;
    }
    json id = req["id"];
    std::string op = req["op"].is_string() ? req["op"].get<std::string>() : "";
    try {
      if (op == "shutdown") {
        ok(id, json::object());
        return 0;
      } else if (op == "run_tests") {
        ok(id, run_pytest(req.value("paths", std::vector<std::string>{}), fs::absolute(artifact).parent_path()));
      } else if (g_fixture == "cliffwalking") {
        if (op == "spaces") {
          ok(id, cliff.spaces());
        } else if (op == "reset") {
          if (opt("raise_on_reset")) throw EnvError("RuntimeError", "reset exploded");
          auto s = cliff.env.reset(req.value("seed", std::uint64_t{0}));
          ok(id, {{"observation", cliff.observation(static_cast<int>(s[0]))}});
        } else if (op == "set_state") {
          auto st = req.value("state", json::array());
          if (!st.is_array() || st.size() != 1) throw EnvError("ValueError", "state must have length 1");
          cliff.env.set_state(decode_numbers(st));
          ok(id, json::object());
        } else if (op == "step") {
          if (opt("crash_on_step")) {
            std::cerr << "Fatal Python error: Segmentation fault\n";
            std::_Exit(139);
          }
          if (opt("hang_on_step")) std::this_thread::sleep_for(std::chrono::hours(1));
          if (opt("raise_on_step")) throw EnvError("IndexError", "list index out of range");
          ok(id, cliff.step(req.value("action", json())));
        } else {
          fail(id, "ProtocolError", "unsupported op '" + op + "'");
        }
      } else {
        if (op == "game_init") {
          ok(id, {{"observation", toy.init()}});
        } else if (op == "game_actions") {
          ok(id, {{"actions", opt("empty_actions") ? std::vector<std::string>{} : toy.actions()}});
        } else if (op == "game_step") {
          auto s = toy.step(req.value("action", ""));
          ok(id, {{"observation", s.observation}, {"score", s.score}, {"done", s.done}, {"won", s.won}});
        } else {
          fail(id, "ProtocolError", "unsupported op '" + op + "'");
        }
      }
    } catch (const EnvError& e) {
      std::string msg = e.what();
      auto p = msg.find(": ");
      fail(id, e.type(), p == std::string::npos ? msg : msg.substr(p + 2));
    } catch (const std::exception& e) {
      fail(id, "RuntimeError", e.what());
    }
  }
  return 0;
}
