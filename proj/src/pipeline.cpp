#include "a2w/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <regex>
#include <sstream>
#include <thread>

#include "a2w/cwm.hpp"
#include "a2w/pddl.hpp"

namespace a2w {

TurnBudgets default_budgets(Representation r) {
  switch (r) {
    case Representation::PddlDomain: return {2, 2};
    case Representation::TextGame: return {2, 2};
    case Representation::CodeEnv: return {3, 2};
  }
  return {};
}

namespace {

struct StageTimer {
  StageEnv& env;
  std::string stage;
  double start;
  StageUsage usage;

  StageTimer(StageEnv& e, std::string s) : env(e), stage(std::move(s)), start(e.options.clock.elapsed_seconds()) {}
  ~StageTimer() {
    if (!env.usage) return;
    usage.wall_time_seconds = std::max(0.0, env.options.clock.elapsed_seconds() - start);
    env.usage->add(stage, usage);
  }
  void add(const TokenUsage& u) {
    usage.input_tokens += u.input_tokens;
    usage.output_tokens += u.output_tokens;
  }
};

void note_fault(StageEnv& env, const std::string& what) {
  if (env.faults) env.faults->push_back(what);
}

std::string chat(StageEnv& env, StageTimer& timer, const std::string& system, const std::string& user) {
  std::vector<ChatMessage> msgs{ChatMessage::system(system), ChatMessage::user(user)};
  auto c = env.gateway.complete(msgs, env.options.decoding);
  timer.add(c.usage);
  return c.reply.content;
}

AgentRole role_for(RoleName name, const PipelineOptions& o) {
  auto r = default_role(name);
  r.max_steps = o.max_steps;
  return r;
}

void save_transcript(const Toolbelt& tb, const std::string& name, const Transcript& t) {
  write_transcript_jsonl(tb.working_dir() / "transcripts" / (name + ".jsonl"), t);
}

std::vector<std::string> parse_question_lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    std::size_t k = 0;
    while (k < t.size() && (t[k] == '-' || t[k] == '*' || t[k] == '.' || t[k] == ')' ||
                            std::isdigit(static_cast<unsigned char>(t[k])) || t[k] == ' ')) {
      ++k;
    }
    t = trim(t.substr(k));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

// {"success":..,"analysis":..,"suggest_fix":..} from a <final> payload.
json verdict_json(const AgentResult& r) {
  if (!r.has_final) return json();
  auto j = json::parse(trim(r.final_output), nullptr, false);
  return j.is_object() ? j : json();
}

std::string strip_code_fence(std::string code) {
  auto t = trim(code);
  if (t.starts_with("```")) {
    auto nl = t.find('\n');
    t = nl == std::string::npos ? std::string() : t.substr(nl + 1);
    if (auto end = t.rfind("```"); end != std::string::npos) t = t.substr(0, end);
  }
  t = trim(t);
  return t.empty() ? t : t + "\n";
}

// Most telling line of a test log: an exception line beats a FAILED line,
// which beats any mention of "error".
std::string last_matching_line(std::string_view log) {
  static const std::regex exception_re(R"(\b[A-Za-z_]*(Error|Exception)\b:)");
  std::istringstream in{std::string(log)};
  std::string line, best, last;
  int best_rank = 0;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty()) continue;
    last = t;
    int rank = 0;
    if (std::regex_search(t, exception_re)) {
      rank = 3;
    } else if (t.find("FAILED") != std::string::npos) {
      rank = 2;
    } else if (t.find("Error") != std::string::npos || t.find("error") != std::string::npos) {
      rank = 1;
    }
    if (rank && rank >= best_rank) {
      best = t;
      best_rank = rank;
    }
  }
  return best.empty() ? last : best;
}

std::string pddl_fix_hint(PddlErrorClass c) {
  switch (c) {
    case PddlErrorClass::UndefinedConstant: return "Declare every predicate, constant and variable before using it.";
    case PddlErrorClass::TypeMismatch: return "Check predicate arities and that argument types match the declarations.";
    case PddlErrorClass::IncorrectParentheses: return "Balance the parentheses and keep each section well formed.";
    case PddlErrorClass::UndefinedType: return "Declare the missing type in (:types ...).";
    case PddlErrorClass::UnsupportedFeature: return "Stay within STRIPS with typing and negative preconditions.";
    case PddlErrorClass::DuplicateDefinition: return "Remove or rename the duplicated definition.";
  }
  return "Fix the domain so that it validates.";
}

std::string kind_name(Representation r) { return to_string(r); }

}  // namespace

ResearchReport knowledge_synthesis(const TaskSpec& task, StageEnv env, const fs::path& work_dir) {
  ResearchReport r;
  const int rounds = env.options.research_override.value_or(task.research_rounds);
  if (rounds < 0) throw PreconditionError("research_rounds must be non-negative");
  r.report_text = "Task restatement:\n" + task.description;
  if (rounds == 0) return r;

  StageTimer timer(env, "research");
  const std::string planner_system =
      "You plan the background research for building a world model. Be brief and concrete.";
  try {
    auto reply = chat(env, timer, planner_system,
                      "[extract-questions]\nTask:\n" + task.description +
                          "\n\nList the open questions whose answers are needed to implement this world model "
                          "exactly, one per line, inside <questions></questions>.");
    r.questions = parse_question_lines(extract_tag(reply, "questions").value_or(reply));
  } catch (const std::exception& e) {
    r.errors.push_back(std::string("question extraction failed: ") + e.what());
    note_fault(env, std::string("research: ") + e.what());
    return r;
  }

  Toolbelt tb(env.tools, work_dir);
  for (int round = 1; round <= rounds; ++round) {
    std::string q;
    try {
      std::string open;
      for (const auto& x : r.questions) open += "- " + x + "\n";
      auto reply = chat(env, timer, planner_system,
                        "[select-question]\nReport so far:\n" + r.report_text + "\n\nQuestions:\n" + open +
                            "\nReply with the most useful unanswered question inside <question></question>, or "
                            "an empty <question></question> when the report already answers everything.");
      q = extract_tag(reply, "question").value_or("");
    } catch (const std::exception& e) {
      r.errors.push_back("round " + std::to_string(round) + ": question selection failed: " + e.what());
      note_fault(env, std::string("research: ") + e.what());
      continue;
    }
    if (q.empty()) break;
    ++r.rounds_used;

    std::string ctx = "[research-round]\nQuestion: " + q + "\n\nTask:\n" + task.description +
                      "\n\nCurrent report:\n" + r.report_text +
                      "\n\nSearch the web, open the most trustworthy results, and answer with one <final> block "
                      "holding a JSON object {\"evidence\": [{\"title\", \"url\", \"snippet\", \"confidence\"}], "
                      "\"report\": \"the full updated report\"}.";
    try {
      auto res = run_agent(role_for(RoleName::DeepResearcher, env.options), ctx, env.gateway, tb, env.options.decoding);
      timer.add(res.usage);
      save_transcript(tb, "research_round_" + std::to_string(round), res.transcript);
      if (!res.has_final) {
        r.errors.push_back("round " + std::to_string(round) + ": no final report");
        continue;
      }
      auto j = json::parse(trim(res.final_output), nullptr, false);
      if (!j.is_object()) {
        r.errors.push_back("round " + std::to_string(round) + ": final block is not a JSON object");
        continue;
      }
      for (const auto& ev : j.value("evidence", json::array())) {
        EvidenceEntry e;
        e.title = ev.value("title", "");
        e.url = ev.value("url", "");
        e.snippet = ev.value("snippet", "");
        e.retrieved_at = env.options.clock.now();
        try {
          e.confidence = confidence_from_string(ev.value("confidence", "medium"));
        } catch (const ParseError&) {
          e.confidence = Confidence::Low;
        }
        auto bad = validate_evidence(e, env.tools->denylist);
        if (bad.empty()) {
          r.evidence_log.push_back(std::move(e));
        } else {
          r.errors.push_back("round " + std::to_string(round) + ": evidence rejected: " + bad.front());
        }
      }
      auto updated = j.value("report", "");
      if (!trim(updated).empty()) r.report_text = updated;
    } catch (const std::exception& e) {
      r.errors.push_back("round " + std::to_string(round) + ": " + e.what());
      if (dynamic_cast<const GatewayError*>(&e)) note_fault(env, std::string("research: ") + e.what());
    }
  }
  return r;
}

std::string developer_context(const TaskSpec& task, const ResearchReport& report, std::string_view feedback) {
  std::string s = "[develop]\nTask " + task.task_id + " (" + kind_name(task.representation) + "):\n" +
                  task.description + "\n\nResearch report:\n" + report.report_text + "\n\nFeedback from the last turn:\n";
  s += feedback.empty() ? std::string("(none yet)") : std::string(feedback);
  return s;
}

DevelopResult generate_model(const TaskSpec& task, const ResearchReport& report, std::string_view feedback,
                             int turn_index, StageEnv env, Toolbelt& toolbelt) {
  DevelopResult out;
  out.context = developer_context(task, report, feedback);
  StageTimer timer(env, "develop");
  try {
    out.agent = run_agent(role_for(RoleName::ModelDeveloper, env.options), out.context, env.gateway, toolbelt,
                          env.options.decoding);
  } catch (const std::exception& e) {
    note_fault(env, std::string("develop: ") + e.what());
    out.agent.final_output = std::string("error: ") + e.what();
    return out;
  }
  timer.add(out.agent.usage);
  save_transcript(toolbelt, "developer", out.agent.transcript);
  if (!out.agent.has_final) return out;

  auto path = extract_tag(out.agent.final_output, "code_file_path");
  auto code = extract_tag(out.agent.final_output, "entrypoint_code");
  if (!path || !code || path->empty() || !is_contained_relative_path(*path)) return out;
  std::string source = strip_code_fence(*code);
  if (source.empty()) return out;
  try {
    file_tool(toolbelt.working_dir(), FileAction::Save, *path, source);
  } catch (const std::exception&) {
    return out;
  }
  WorldModelArtifact a;
  a.artifact_id = task.task_id + "/turn_" + std::to_string(turn_index);
  a.representation = task.representation;
  a.source = std::move(source);
  a.entrypoint_path = *path;
  a.turn_index = turn_index;
  a.parent_task = task.task_id;
  out.artifact = std::move(a);
  return out;
}

SubReport run_unit_tests(const WorldModelArtifact& artifact, const TaskSpec& task, const ResearchReport& report,
                         StageEnv env, Toolbelt& toolbelt) {
  if (artifact.representation == Representation::PddlDomain) {
    StageTimer timer(env, "unit_test");
    if (auto err = check_domain(artifact.source)) {
      return make_sub_report(false, std::string("The domain does not validate: ") + err->what(),
                             pddl_fix_hint(err->error_class()), err->what());
    }
    auto d = parse_domain(artifact.source);
    return make_sub_report(true,
                           "The domain parses and validates (" + std::to_string(d.predicates.size()) + " predicates, " +
                               std::to_string(d.actions.size()) + " actions).",
                           "", "");
  }

  StageTimer timer(env, "unit_test");
  const auto before = toolbelt.exec_log().size();
  std::string ctx = "[unit-test]\nTask:\n" + task.description + "\n\nResearch report:\n" + report.report_text +
                    "\n\nArtifact under test: " + artifact.entrypoint_path + "\n```\n" + artifact.source +
                    "```\nWrite tests/test_env.py with file_tool, run it with run_code (for example "
                    "`python3 -m pytest -q tests/test_env.py`), then report.";
  AgentResult res;
  try {
    res = run_agent(role_for(RoleName::UnitTester, env.options), ctx, env.gateway, toolbelt, env.options.decoding);
  } catch (const std::exception& e) {
    note_fault(env, std::string("unit_test: ") + e.what());
    return make_sub_report(false, std::string("The unit tester failed to run: ") + e.what(),
                           "Re-run the unit tests.", e.what());
  }
  timer.add(res.usage);
  save_transcript(toolbelt, "unit_tester", res.transcript);

  auto verdict = verdict_json(res);
  std::string agent_analysis = verdict.is_object() ? verdict.value("analysis", "") : "";
  std::string agent_fix = verdict.is_object() ? verdict.value("suggest_fix", "") : "";

  if (!fs::exists(toolbelt.working_dir() / "tests" / "test_env.py")) {
    return make_sub_report(false, "No test file was written at tests/test_env.py.",
                           "Write the unit tests to tests/test_env.py and run them.", "");
  }
  const auto& log = toolbelt.exec_log();
  if (log.size() == before) {
    return make_sub_report(false, "The test suite was never executed.", "Run the tests with run_code.", "");
  }
  const auto& last = log.back();
  std::string out = last.result.stdout_tail + last.result.stderr_tail;
  bool pass = last.result.exit_code == 0 && !last.result.timed_out;
  std::string summary = "`" + last.command + "` exited with status " + std::to_string(last.result.exit_code);
  if (last.result.timed_out) summary += " (timed out)";
  if (!pass) summary += ": " + last_matching_line(out);
  std::string analysis = agent_analysis.empty() ? summary + "." : agent_analysis + "\n" + summary + ".";
  if (!pass && agent_fix.empty()) agent_fix = "Make the failing test pass without weakening it.";
  return make_sub_report(pass, analysis, pass ? "" : agent_fix, out);
}

bool numbers_close(double a, double b, double tol) {
  if (!std::isfinite(a) || !std::isfinite(b)) return false;
  const double d = std::abs(a - b);
  return d <= tol || d <= tol * std::max(std::abs(a), std::abs(b));
}

std::vector<std::string> check_transitions(const PlayLog& log, EnvHandle& reference, double tol) {
  std::vector<std::string> issues;
  const bool discrete = reference.spaces().observation.kind == Space::Kind::Discrete;
  for (const auto& rec : log.records) {
    if (!rec.error.empty()) continue;
    std::string where = "step " + std::to_string(rec.step) + " (state " + rec.state.dump() + ", action " +
                        rec.action.dump() + ")";
    StepResult want;
    try {
      reference.set_state(decode_numbers(rec.state));
      want = reference.step(decode_numbers(rec.action));
    } catch (const std::exception& e) {
      issues.push_back(where + ": the reference rejects this transition: " + e.what());
      continue;
    }
    std::vector<double> got;
    try {
      got = decode_numbers(rec.observation);
    } catch (const std::exception&) {
      issues.push_back(where + ": observation is not numeric");
      continue;
    }
    std::ostringstream msg;
    if (got.size() != want.next.size()) {
      msg << " observation shape mismatch: " << got.size() << " value(s), expected " << want.next.size() << ";";
    } else {
      bool obs_ok = true;
      for (std::size_t i = 0; obs_ok && i < got.size(); ++i) {
        obs_ok = discrete ? got[i] == want.next[i] : numbers_close(got[i], want.next[i], tol);
      }
      if (!obs_ok) msg << " next state " << rec.observation.dump() << " expected " << json(want.next).dump() << ";";
    }
    if (!numbers_close(rec.reward, want.reward, tol)) msg << " reward " << rec.reward << " expected " << want.reward << ";";
    if (rec.done != want.done) msg << " done " << std::boolalpha << rec.done << " expected " << want.done << ";";
    if (!msg.str().empty()) issues.push_back(where + ":" + msg.str());
  }
  return issues;
}

SubReport run_simulation_test(const WorldModelArtifact& artifact, const TaskSpec& task, StageEnv env,
                              Toolbelt& toolbelt) {
  StageTimer timer(env, "simulation_test");
  if (artifact.representation == Representation::PddlDomain) {
    try {
      auto d = parse_domain(artifact.source);
      if (!solvability_probe(d)) {
        return make_sub_report(false, "The empty-goal probe problem is rejected by the domain.",
                               "Keep the domain usable with an empty problem.", "");
      }
      return make_sub_report(true, "The empty-goal probe problem is accepted and trivially solved.", "", "");
    } catch (const PddlError& e) {
      return make_sub_report(false, std::string("The domain does not validate: ") + e.what(),
                             pddl_fix_hint(e.error_class()), e.what());
    }
  }

  const auto kind = kind_name(artifact.representation);
  const auto before = toolbelt.play_log().size();
  std::string ctx = "[simulation-test]\nTask:\n" + task.description + "\n\nArtifact: " + artifact.entrypoint_path +
                    " (" + kind + ")\nCall play_env once with {\"path\": \"" + artifact.entrypoint_path +
                    "\", \"kind\": \"" + kind + "\"}, then judge the interaction log.";
  AgentResult res;
  std::vector<std::string> problems;
  try {
    res = run_agent(role_for(RoleName::SimulationTester, env.options), ctx, env.gateway, toolbelt,
                    env.options.decoding);
    timer.add(res.usage);
    save_transcript(toolbelt, "simulation_tester", res.transcript);
  } catch (const std::exception& e) {
    note_fault(env, std::string("simulation_test: ") + e.what());
    problems.push_back(std::string("the simulation tester failed to run: ") + e.what());
  }

  if (toolbelt.play_log().size() == before) {
    try {
      toolbelt.invoke("play_env", json{{"path", artifact.entrypoint_path}, {"kind", kind}});
    } catch (const std::exception& e) {
      note_fault(env, std::string("play_env: ") + e.what());
      return make_sub_report(false, std::string("The artifact could not be played: ") + e.what(),
                             "Make sure the artifact loads in the harness.", e.what());
    }
  }
  PlayLog log = toolbelt.play_log().back().get<PlayLog>();

  if (log.crashed) problems.push_back("the session failed: " + log.error_type + ": " + log.error_message);
  if (log.timed_out) problems.push_back("the play session timed out");
  int raised = 0;
  std::string first_error;
  for (const auto& rec : log.records) {
    if (!rec.error.empty() && raised++ == 0) first_error = rec.error;
  }
  if (raised) problems.push_back(std::to_string(raised) + " step(s) raised an exception, first: " + first_error);
  if (log.nonfinite) problems.push_back("non-finite values (nan or inf) appeared in observations or rewards");

  if (artifact.representation == Representation::CodeEnv && task.env_name && !log.crashed) {
    std::unique_ptr<EnvHandle> ref;
    try {
      ref = reference_env(*task.env_name);
    } catch (const UnknownEnv&) {
    }
    if (ref) {
      auto issues = check_transitions(log, *ref);
      if (!issues.empty()) {
        std::string s = std::to_string(issues.size()) + " transition(s) disagree with the specification:";
        for (std::size_t i = 0; i < issues.size() && i < 3; ++i) s += "\n  " + issues[i];
        problems.push_back(s);
      }
    }
  }

  auto verdict = verdict_json(res);
  std::string agent_analysis, agent_fix;
  if (!verdict.is_object()) {
    if (problems.empty()) problems.push_back("the simulation tester returned no verdict");
  } else {
    agent_analysis = verdict.value("analysis", "");
    agent_fix = verdict.value("suggest_fix", "");
    if (!verdict.value("success", false)) problems.push_back("the simulation tester reports: " + agent_analysis);
  }

  std::string raw = json(log).dump();
  if (problems.empty()) {
    std::string a = "Played " + std::to_string(log.records.size()) +
                    " step(s) without exceptions; every checked transition matches the specification.";
    if (!agent_analysis.empty()) a += "\n" + agent_analysis;
    return make_sub_report(true, a, "", raw);
  }
  std::string a;
  for (const auto& p : problems) a += (a.empty() ? "" : "\n") + ("- " + p);
  if (agent_fix.empty()) agent_fix = "Fix the behaviours listed in the analysis.";
  return make_sub_report(false, a, agent_fix, raw);
}

std::string merge_feedback(const SubReport& unit, const SubReport& sim) {
  auto section = [](const char* name, const SubReport& s) {
    std::string out = std::string("## ") + name + ": " + (s.pass ? "passed" : "FAILED") + "\n";
    if (!s.analysis.empty()) out += s.analysis + "\n";
    if (!s.pass) out += "Suggested fix: " + s.suggest_fix + "\n";
    return out;
  };
  std::string text = unit.pass && sim.pass ? "Both test suites passed.\n\n" : "";
  text += section("Unit tests", unit) + "\n" + section("Simulation test", sim);
  return truncate_with_marker(text, kMaxFeedbackBytes);
}

void to_json(json& j, const TurnRecord& t) {
  j = json{{"turn_index", t.turn_index}, {"empty", t.empty}};
  j["artifact"] = t.artifact ? json(*t.artifact) : json();
  j["report"] = t.report ? json(*t.report) : json();
}

void from_json(const json& j, TurnRecord& t) {
  t.turn_index = j.at("turn_index").get<int>();
  t.empty = j.value("empty", false);
  t.artifact.reset();
  t.report.reset();
  if (j.contains("artifact") && !j["artifact"].is_null()) t.artifact = j["artifact"].get<WorldModelArtifact>();
  if (j.contains("report") && !j["report"].is_null()) t.report = j["report"].get<TestReport>();
}

void to_json(json& j, const RunRecord& r) {
  j = json{{"task_id", r.task_id}, {"research", r.research}, {"turns", r.turns},
           {"trajectory", r.trajectory}, {"converged", r.converged}, {"faults", r.faults}};
  j["final"] = r.final_artifact ? json(*r.final_artifact) : json();
}

void from_json(const json& j, RunRecord& r) {
  r.task_id = j.at("task_id").get<std::string>();
  r.research = j.at("research").get<ResearchReport>();
  r.turns = j.at("turns").get<std::vector<TurnRecord>>();
  r.trajectory = j.at("trajectory").get<InteractionTrajectory>();
  r.converged = j.at("converged").get<bool>();
  r.faults = j.value("faults", std::vector<std::string>{});
  r.final_artifact.reset();
  if (j.contains("final") && !j["final"].is_null()) r.final_artifact = j["final"].get<WorldModelArtifact>();
}

void write_trajectory_jsonl(const fs::path& path, const InteractionTrajectory& t) {
  std::vector<json> lines;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    json s = t.steps[i];
    s["task_id"] = t.task_id;
    s["t"] = i;
    lines.push_back(std::move(s));
  }
  write_jsonl(path, lines);
}

RunRecord refine(const TaskSpec& task_in, Gateway& gateway, std::shared_ptr<const ToolbeltContext> tools,
                 const PipelineOptions& options) {
  TaskSpec task = task_in;
  if (options.turns_override) task.turn_budget = *options.turns_override;
  if (options.research_override) task.research_rounds = *options.research_override;
  if (auto v = validate_task(task); !v.empty()) throw PreconditionError("invalid task " + task.task_id + ": " + v.front());
  if (!is_contained_relative_path(task.task_id)) throw PreconditionError("task_id must be a plain relative name");

  RunRecord rec;
  rec.task_id = task.task_id;
  UsageStats usage;
  StageEnv env{gateway, tools, options, &usage, &rec.faults};

  const fs::path run_dir = options.runs_root / task.task_id;
  fs::remove_all(run_dir);
  fs::create_directories(run_dir);

  rec.research = knowledge_synthesis(task, env, run_dir / "research");
  write_file_atomic(run_dir / "research.json", json(rec.research).dump(2) + "\n");

  auto& traj = rec.trajectory;
  traj.task_id = task.task_id;
  traj.context = developer_context(task, rec.research, "");

  std::string feedback;
  std::string prev_hash = "none";
  std::optional<TestReport> last_report;
  bool last_executed = false;

  for (int k = 1; k <= task.turn_budget; ++k) {
    const fs::path turn_dir = run_dir / ("turn_" + std::to_string(k));
    fs::create_directories(turn_dir);
    Toolbelt tb(tools, turn_dir);
    TurnRecord turn;
    turn.turn_index = k;
    const std::string state = (feedback.empty() ? std::string("(no feedback yet)") : feedback) + "\nartifact: " + prev_hash;

    auto dev = generate_model(task, rec.research, feedback, k, env, tb);
    if (!dev.artifact) {
      turn.empty = true;
      traj.steps.push_back({state, std::string(kEmptyTurnMarker), "The developer produced no artifact; turn skipped."});
      write_file_atomic(turn_dir / "reports.json", json(turn).dump(2) + "\n");
      rec.turns.push_back(std::move(turn));
      continue;
    }

    TestReport report;
    report.unit = run_unit_tests(*dev.artifact, task, rec.research, env, tb);
    report.simulation = run_simulation_test(*dev.artifact, task, env, tb);
    report.merged_feedback = merge_feedback(report.unit, report.simulation);

    if (task.representation == Representation::PddlDomain) {
      last_executed = executability(dev.artifact->source);
    } else {
      const auto& ex = tb.exec_log();
      bool played_ok = tb.play_log().empty() || !tb.play_log().back().value("crashed", false);
      last_executed = !ex.empty() && !ex.back().result.timed_out && played_ok;
    }

    traj.steps.push_back({state, dev.artifact->source, report.merged_feedback});
    feedback = report.merged_feedback;
    prev_hash = fnv1a_hex(dev.artifact->source);
    rec.final_artifact = dev.artifact;
    last_report = report;
    turn.artifact = std::move(dev.artifact);
    turn.report = report;
    write_file_atomic(turn_dir / "reports.json", json(turn).dump(2) + "\n");
    rec.turns.push_back(std::move(turn));
    if (report.passed()) {
      rec.converged = true;
      break;
    }
  }

  traj.final_artifact = rec.final_artifact;
  traj.final_report = last_report;
  traj.executed = rec.final_artifact.has_value() && last_executed;
  traj.verifier = rec.converged && traj.executed ? 1 : 0;
  traj.usage = usage;

  write_trajectory_jsonl(run_dir / "trajectory.jsonl", traj);
  write_file_atomic(run_dir / "run_record.json", json(rec).dump(2) + "\n");
  return rec;
}

BatchOutcome run_batch(const std::vector<TaskSpec>& tasks, const std::function<Gateway&(const TaskSpec&)>& gateway_for,
                       std::shared_ptr<const ToolbeltContext> tools, const PipelineOptions& options, int parallel) {
  BatchOutcome out;
  std::vector<std::optional<RunRecord>> slots(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
      try {
        slots[i] = refine(tasks[i], gateway_for(tasks[i]), tools, options);
      } catch (const std::exception& e) {
        errors[i] = tasks[i].task_id + ": " + e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallel, static_cast<int>(tasks.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (slots[i]) {
      for (const auto& f : slots[i]->faults) out.faults.push_back(tasks[i].task_id + ": " + f);
      out.runs.push_back(std::move(*slots[i]));
    }
    if (!errors[i].empty()) out.faults.push_back(errors[i]);
  }
  return out;
}

}  // namespace a2w
