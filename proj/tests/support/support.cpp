#include "support.hpp"

#include <cstdlib>
#include <functional>
#include <map>

namespace a2w::testsupport {

fs::path fixtures_dir() { return A2W_FIXTURES; }
std::string fake_harness() { return A2W_FAKE_HARNESS; }
std::string cli_binary() { return A2W_CLI; }

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "a2w-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw Error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::shared_ptr<ScriptedGateway> script(const std::vector<json>& entries) {
  std::vector<ScriptEntry> out;
  for (const auto& e : entries) out.push_back(parse_script_entry(e));
  return std::make_shared<ScriptedGateway>(std::move(out));
}

std::string developer_final(const std::string& path, const std::string& source) {
  return "The environment is ready.\n<final>\n<code_file_path>" + path + "</code_file_path>\n<entrypoint_code>\n```python\n" +
         source + "```\n</entrypoint_code>\n</final>";
}

namespace {

json tool(const std::string& match, const std::string& name, json args) {
  return {{"match", match}, {"tool_call", {{"name", name}, {"arguments", std::move(args)}}}, {"usage", {120, 30}},
          {"repeat", true}};
}

json reply(const std::string& match, const std::string& text, bool repeat = true) {
  return {{"match", match}, {"reply", text}, {"usage", {200, 60}}, {"repeat", repeat}};
}

const char* kTaskText =
    "Implement the CliffWalking grid world as a Python class named Environment with reset(seed), "
    "set_state(state) and step(action) returning (observation, reward, done).";

const char* kPage =
    "<html><head><title>Cliff Walking</title><script>var tracking = 1;</script></head><body>"
    "<h1>Cliff Walking</h1><p>The grid has 4 rows and 12 columns. The agent starts in cell 36 and the goal is "
    "cell 47.</p><p>Each move costs -1. Stepping into the cliff costs -100 and sends the agent back to the "
    "start.</p></body></html>";

}  // namespace

void write_dry_run_bundle(const fs::path& dir) {
  fs::create_directories(dir / "search");
  fs::create_directories(dir / "pages");
  json results = json::array({
      {{"title", "gym/cliffwalking.py at master"}, {"url", kBlockedUrl}, {"snippet", "Source of the environment."}},
      {{"title", "Cliff Walking - Gymnasium Documentation"}, {"url", kDocsUrl},
       {"snippet", "The player starts at the bottom left and must reach the bottom right."}},
      {{"title", "Cliff walking notes"}, {"url", "https://notes.example.edu/rl/cliff-walking"},
       {"snippet", "Each step costs one point; the cliff costs one hundred."}},
      {{"title", "Cliff Walking - Gymnasium Documentation"}, {"url", kDocsUrl}, {"snippet", "duplicate entry"}},
  });
  write_file_atomic(FixtureSearchBackend::fixture_path(dir / "search", kSearchQuery), results.dump(2));
  write_file_atomic(FixtureTransport::fixture_path(dir / "pages", kDocsUrl), kPage);
  // Served if anything ever asked for it; the recording transport would see it.
  write_file_atomic(FixtureTransport::fixture_path(dir / "pages", kBlockedUrl), "<html><body>leaked source</body></html>");

  const auto code_dir = fixtures_dir() / "code";
  const std::string good = read_file(code_dir / "cliffwalking_env.py");
  const std::string bad = read_file(code_dir / "cliffwalking_buggy.py");
  const std::string tests = read_file(code_dir / "test_env.py");

  json research_final{
      {"evidence",
       json::array({{{"title", "Cliff Walking - Gymnasium Documentation"},
                     {"url", kDocsUrl},
                     {"snippet", "Stepping into the cliff costs -100 and sends the agent back to the start."},
                     {"confidence", "high"}}})},
      {"report",
       "CliffWalking: 4 x 12 grid, start 36, goal 47. Actions 0 up, 1 right, 2 down, 3 left. Every move costs -1; "
       "entering a cliff cell (37..46) costs -100 and puts the agent on 36. The episode ends only at 47."}};

  std::vector<json> entries{
      // developer first: later contexts embed feedback text
      reply("[develop]\nTask cliff-ok", developer_final("env.py", bad), false),
      reply("[develop]\nTask cliff-ok", developer_final("env.py", good)),
      reply("[develop]\nTask cliff-bad", developer_final("env.py", bad)),
      reply("[extract-questions]", "<questions>\nWhat does stepping into the cliff do?\nWhere does an episode end?\n</questions>"),
      reply("[select-question]", "<question>What does stepping into the cliff do?</question>"),
      tool("[research-round]", "browser_search", {{"query", kSearchQuery}, {"k", 5}}),
      tool("Gymnasium Documentation", "browser_open", {{"url", kBlockedUrl}}),
      tool("host is denylisted", "browser_open", {{"url", kDocsUrl}}),
      reply("sends the agent back to the start", "<final>" + research_final.dump() + "</final>"),
      tool("[unit-test]", "file_tool", {{"action", "save"}, {"path", "tests/test_env.py"}, {"content", tests}}),
      tool("saved tests/test_env.py", "run_code", {{"command", "python3 -m pytest -q -p no:cacheprovider tests/test_env.py"}}),
      reply("\"exit_code\":0,", R"(<final>{"success": true, "analysis": "All unit tests pass.", "suggest_fix": ""}</final>)"),
      reply("\"exit_code\":",
            R"(<final>{"success": false, "analysis": "A unit test fails.", "suggest_fix": "Put the agent on cell 36 after it enters the cliff."}</final>)"),
      tool("[simulation-test]", "play_env", {{"path", "env.py"}, {"kind", "code_env"}, {"actions", {1, 0, 2, 1}}}),
      reply("\"initial_observation\"",
            R"(<final>{"success": true, "analysis": "The probed transitions look plausible.", "suggest_fix": ""}</final>)"),
  };
  std::string text;
  for (const auto& e : entries) text += e.dump() + "\n";
  write_file_atomic(dir / "script.jsonl", text);

  json task_ok{{"task_id", "cliff-ok"},      {"description", kTaskText}, {"representation", "code_env"},
               {"env_name", "CliffWalking"}, {"turn_budget", 3},         {"research_rounds", 1}};
  json task_bad = task_ok;
  task_bad["task_id"] = "cliff-bad";
  json cfg{{"search", {{"backend", "fixture"}, {"fixture_dir", "search"}}},
           {"fetch", {{"backend", "fixture"}, {"fixture_dir", "pages"}}},
           {"harness_command", {fake_harness(), "{artifact}"}},
           {"sandbox", {{"timeout_seconds", 60}}},
           {"play", {{"session_budget", 8}, {"seed", 3}}},
           {"frozen_clock", "2025-01-01T00:00:00Z"},
           {"runs_root", "runs"},
           {"tasks", {task_ok, task_bad}}};
  write_file_atomic(dir / "config.json", cfg.dump(2) + "\n");
}

DryRun run_dry_pipeline(const fs::path& dir, const fs::path& runs_root) {
  auto cfg = load_config(dir / "config.json");
  DryRun out;
  out.fetches = std::make_shared<RecordingTransport>(std::make_shared<FixtureTransport>(cfg.fetch.fixture_dir));
  auto tools = make_toolbelt_context(cfg, out.fetches);
  auto opts = make_pipeline_options(cfg);
  opts.runs_root = runs_root;
  out.runs_root = runs_root;
  auto gw = load_script(dir / "script.jsonl");
  out.outcome = run_batch(cfg.tasks, [&](const TaskSpec&) -> Gateway& { return *gw; }, tools, opts, 1);
  return out;
}

std::size_t levenshtein_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<std::size_t(std::size_t, std::size_t)> lev = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto& m = memo[i][j];
    if (m >= 0) return static_cast<std::size_t>(m);
    std::size_t best;
    if (a[i] == b[j]) {
      best = lev(i + 1, j + 1);
    } else {
      best = 1 + std::min({lev(i + 1, j), lev(i, j + 1), lev(i + 1, j + 1)});
    }
    m = static_cast<long>(best);
    return best;
  };
  return lev(0, 0);
}

PddlDomainAst alpha_rename(const PddlDomainAst& d) {
  PddlDomainAst out = d;
  for (auto& act : out.actions) {
    std::map<std::string, std::string> names;
    for (std::size_t k = 0; k < act.params.size(); ++k) {
      auto fresh = "?v_" + act.name + "_" + std::to_string(k);
      names[act.params[k].name] = fresh;
      act.params[k].name = fresh;
    }
    for (auto* lits : {&act.precondition, &act.effect}) {
      for (auto& l : *lits) {
        for (auto& arg : l.atom.args) {
          if (auto it = names.find(arg); it != names.end()) arg = it->second;
        }
      }
    }
  }
  return out;
}

}  // namespace a2w::testsupport
