#include <gtest/gtest.h>

#include "a2w/pipeline.hpp"
#include "support.hpp"

using namespace a2w;
using namespace a2w::testsupport;

namespace {

std::shared_ptr<ToolbeltContext> code_tools() {
  auto ctx = std::make_shared<ToolbeltContext>();
  ctx->harness_command = {fake_harness(), "{artifact}"};
  ctx->play.session_budget = 6;
  ctx->search = std::make_shared<FixtureSearchBackend>(fixtures_dir() / "none");
  ctx->fetch = std::make_shared<FixtureTransport>(fixtures_dir() / "none");
  return ctx;
}

TaskSpec pddl_task(int turns = 2) {
  TaskSpec t;
  t.task_id = "snack";
  t.description = "Children wait for sandwiches; some need gluten-free ones.";
  t.representation = Representation::PddlDomain;
  t.turn_budget = turns;
  return t;
}

TaskSpec cliff_task() {
  TaskSpec t;
  t.task_id = "cliff";
  t.description = "CliffWalking as a Python Environment class.";
  t.representation = Representation::CodeEnv;
  t.env_name = "CliffWalking";
  t.turn_budget = 3;
  return t;
}

WorldModelArtifact save_artifact(const fs::path& dir, const std::string& rel, const std::string& source,
                                 Representation kind = Representation::CodeEnv) {
  file_tool(dir, FileAction::Save, rel, source);
  WorldModelArtifact a;
  a.artifact_id = "t/turn_1";
  a.representation = kind;
  a.source = source;
  a.entrypoint_path = rel;
  a.turn_index = 1;
  a.parent_task = "t";
  return a;
}

std::string code(const std::string& name) { return read_file(fixtures_dir() / "code" / name); }

std::vector<json> unit_tester_entries(const std::string& test_source) {
  return {
      {{"match", "[unit-test]"},
       {"tool_call",
        {{"name", "file_tool"}, {"arguments", {{"action", "save"}, {"path", "tests/test_env.py"}, {"content", test_source}}}}}},
      {{"match", "saved tests/test_env.py"},
       {"tool_call", {{"name", "run_code"}, {"arguments", {{"command", "python3 -m pytest -q -p no:cacheprovider tests/test_env.py"}}}}}},
      {{"match", "*"}, {"reply", R"(<final>{"success": true, "analysis": "", "suggest_fix": ""}</final>)"}},
  };
}

std::vector<json> sim_tester_entries(json actions = json::array({1, 0, 2})) {
  return {
      {{"match", "[simulation-test]"},
       {"tool_call", {{"name", "play_env"}, {"arguments", {{"path", "env.py"}, {"kind", "code_env"}, {"actions", actions}}}}}},
      {{"match", "*"}, {"reply", R"(<final>{"success": true, "analysis": "looks fine", "suggest_fix": ""}</final>)"}},
  };
}

struct Fixture {
  TempDir tmp;
  PipelineOptions opts;
  UsageStats usage;
  std::vector<std::string> faults;
  std::shared_ptr<ToolbeltContext> tools = code_tools();

  Fixture() {
    opts.runs_root = tmp / "runs";
    opts.clock = Clock::frozen(parse_iso8601("2025-01-01T00:00:00Z"));
  }
  StageEnv env(Gateway& gw) { return StageEnv{gw, tools, opts, &usage, &faults}; }
};

}  // namespace

// ---- knowledge synthesis ----

TEST(KnowledgeSynthesis, ZeroRoundsRestatesTheTask) {
  Fixture f;
  auto gw = script({});
  auto task = pddl_task();
  task.research_rounds = 0;
  auto r = knowledge_synthesis(task, f.env(*gw), f.tmp.path());
  EXPECT_EQ(r.report_text, "Task restatement:\n" + task.description);
  EXPECT_TRUE(r.evidence_log.empty());
  EXPECT_EQ(r.rounds_used, 0);
}

TEST(KnowledgeSynthesis, EmptyQuestionEndsAfterOneRound) {
  Fixture f;
  auto gw = script({
      {{"match", "[extract-questions]"}, {"reply", "<questions>\nhow big is the grid?\n</questions>"}},
      {{"match", "[select-question]"}, {"reply", "<question>how big is the grid?</question>"}},
      {{"match", "[research-round]"},
       {"reply", R"(<final>{"evidence": [{"title": "grid", "url": "https://example.org/grid", "snippet": "4 by 12", "confidence": "high"}], "report": "4 by 12 grid"}</final>)"}},
      {{"match", "[select-question]"}, {"reply", "<question></question>"}},
  });
  auto task = cliff_task();
  task.research_rounds = 3;
  auto r = knowledge_synthesis(task, f.env(*gw), f.tmp.path());
  EXPECT_EQ(r.rounds_used, 1);
  ASSERT_EQ(r.evidence_log.size(), 1u) << (r.errors.empty() ? "" : r.errors[0]);
  EXPECT_EQ(r.report_text, "4 by 12 grid");
  EXPECT_EQ(gw->remaining(), 0u);
}

TEST(KnowledgeSynthesis, ThreeRoundsKeepEvidenceInOrder) {
  Fixture f;
  std::vector<json> entries{{{"match", "[extract-questions]"}, {"reply", "<questions>\nq1\nq2\nq3\n</questions>"}}};
  for (int i = 1; i <= 3; ++i) {
    auto n = std::to_string(i);
    entries.push_back({{"match", "[select-question]"}, {"reply", "<question>q" + n + "</question>"}});
    json fin{{"evidence", {{{"title", "source " + n}, {"url", "https://example.org/" + n}, {"snippet", "s"}, {"confidence", "medium"}}}},
             {"report", "after round " + n}};
    entries.push_back({{"match", "[research-round]"}, {"reply", "<final>" + fin.dump() + "</final>"}});
  }
  auto gw = script(entries);
  auto task = cliff_task();
  task.research_rounds = 3;
  auto r = knowledge_synthesis(task, f.env(*gw), f.tmp.path());
  ASSERT_EQ(r.evidence_log.size(), 3u) << (r.errors.empty() ? "" : r.errors[0]);
  EXPECT_EQ(r.evidence_log[0].title, "source 1");
  EXPECT_EQ(r.evidence_log[1].title, "source 2");
  EXPECT_EQ(r.evidence_log[2].title, "source 3");
  EXPECT_EQ(r.rounds_used, 3);
  EXPECT_EQ(r.report_text, "after round 3");
  EXPECT_EQ(format_iso8601(r.evidence_log[0].retrieved_at), "2025-01-01T00:00:00Z");
}

TEST(KnowledgeSynthesis, FailedRoundIsRecordedNotFatal) {
  Fixture f;
  auto gw = script({
      {{"match", "[extract-questions]"}, {"reply", "<questions>\nq1\n</questions>"}},
      {{"match", "[select-question]"}, {"reply", "<question>q1</question>"}},
      {{"match", "[research-round]"}, {"reply", "<final>not json</final>"}},
      {{"match", "[select-question]"}, {"reply", "<question></question>"}},
  });
  auto task = cliff_task();
  task.research_rounds = 2;
  auto r = knowledge_synthesis(task, f.env(*gw), f.tmp.path());
  EXPECT_EQ(r.rounds_used, 1);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].find("round 1"), std::string::npos);
}

TEST(KnowledgeSynthesis, DenylistedEvidenceIsRejected) {
  Fixture f;
  auto gw = script({
      {{"match", "[extract-questions]"}, {"reply", "<questions>\nq\n</questions>"}},
      {{"match", "[select-question]"}, {"reply", "<question>q</question>"}},
      {{"match", "[research-round]"},
       {"reply", R"(<final>{"evidence": [{"title": "gold", "url": "https://github.com/openai/gym/blob/master/x.py", "snippet": "s"}], "report": "r"}</final>)"}},
  });
  auto task = cliff_task();
  task.research_rounds = 1;
  auto r = knowledge_synthesis(task, f.env(*gw), f.tmp.path());
  EXPECT_TRUE(r.evidence_log.empty());
  ASSERT_FALSE(r.errors.empty());
}

// ---- model generation ----

TEST(GenerateModel, FinalCodeIsSaved) {
  Fixture f;
  auto gw = script({{{"match", "*"}, {"reply", developer_final("env.py", code("cliffwalking_env.py"))}}});
  Toolbelt tb(f.tools, f.tmp.path());
  auto res = generate_model(cliff_task(), ResearchReport{}, "", 1, f.env(*gw), tb);
  ASSERT_TRUE(res.artifact);
  EXPECT_EQ(res.artifact->source, code("cliffwalking_env.py"));
  EXPECT_EQ(res.artifact->entrypoint_path, "env.py");
  EXPECT_EQ(read_file(f.tmp / "env.py"), code("cliffwalking_env.py"));
  EXPECT_EQ(res.artifact->artifact_id, "cliff/turn_1");
}

TEST(GenerateModel, NoFinalBlockGivesNoArtifact) {
  Fixture f;
  f.opts.max_steps = 3;
  auto gw = script({{{"match", "*"}, {"reply", "still thinking"}, {"repeat", true}}});
  Toolbelt tb(f.tools, f.tmp.path());
  auto res = generate_model(cliff_task(), ResearchReport{}, "", 1, f.env(*gw), tb);
  EXPECT_FALSE(res.artifact);
  EXPECT_TRUE(res.agent.step_cap_reached);
}

TEST(GenerateModel, FeedbackReachesTheDeveloperVerbatim) {
  Fixture f;
  const std::string feedback = "## Unit tests: FAILED\nstep(1) from 36 returned 37, expected 36.";
  // the script only answers when the prompt carries the feedback
  auto gw = script({{{"match", feedback}, {"reply", developer_final("env.py", code("cliffwalking_env.py"))}}});
  Toolbelt tb(f.tools, f.tmp.path());
  auto res = generate_model(cliff_task(), ResearchReport{}, feedback, 2, f.env(*gw), tb);
  ASSERT_TRUE(res.artifact);
  EXPECT_NE(res.context.find(feedback), std::string::npos);
}

TEST(GenerateModel, PathOutsideWorkdirIsRefused) {
  Fixture f;
  auto gw = script({{{"match", "*"}, {"reply", developer_final("../escape.py", "x = 1\n")}}});
  Toolbelt tb(f.tools, f.tmp.path());
  auto res = generate_model(cliff_task(), ResearchReport{}, "", 1, f.env(*gw), tb);
  EXPECT_FALSE(res.artifact);
}

// ---- unit tests ----

TEST(UnitTests, PassingSuite) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", code("cliffwalking_env.py"));
  auto gw = script(unit_tester_entries(code("test_env.py")));
  auto r = run_unit_tests(a, cliff_task(), ResearchReport{}, f.env(*gw), tb);
  EXPECT_TRUE(r.pass) << r.analysis;
  EXPECT_TRUE(fs::exists(f.tmp / "tests/test_env.py"));
}

TEST(UnitTests, ImportFailureIsNamed) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", "import gridworld_helpers_missing\n" + code("cliffwalking_env.py"));
  auto gw = script(unit_tester_entries(code("test_env.py")));
  auto r = run_unit_tests(a, cliff_task(), ResearchReport{}, f.env(*gw), tb);
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.analysis.find("gridworld_helpers_missing"), std::string::npos) << r.analysis;
  EXPECT_FALSE(r.suggest_fix.empty());
}

TEST(UnitTests, UnbalancedPddlFailsExecutability) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto src = read_file(fixtures_dir() / "pddl/malformed/incorrect_parentheses.pddl");
  auto a = save_artifact(f.tmp.path(), "domain.pddl", src, Representation::PddlDomain);
  auto gw = script({});
  auto r = run_unit_tests(a, pddl_task(), ResearchReport{}, f.env(*gw), tb);
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.analysis.find("incorrect-parentheses"), std::string::npos);
}

TEST(UnitTests, NoTestFileFails) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", code("cliffwalking_env.py"));
  auto gw = script({{{"match", "*"}, {"reply", R"(<final>{"success": true}</final>)"}}});
  auto r = run_unit_tests(a, cliff_task(), ResearchReport{}, f.env(*gw), tb);
  EXPECT_FALSE(r.pass);
}

// ---- simulation test ----

TEST(SimulationTest, ReferenceArtifactPasses) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", code("cliffwalking_env.py"));
  auto gw = script(sim_tester_entries());
  auto r = run_simulation_test(a, cliff_task(), f.env(*gw), tb);
  EXPECT_TRUE(r.pass) << r.analysis;
}

TEST(SimulationTest, NonFiniteRewardsFail) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", "# option: nonfinite\n" + code("cliffwalking_env.py"));
  auto gw = script(sim_tester_entries());
  auto r = run_simulation_test(a, cliff_task(), f.env(*gw), tb);
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.analysis.find("non-finite"), std::string::npos) << r.analysis;
}

TEST(SimulationTest, TinyRewardErrorIsWithinTolerance) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", "# option: reward_offset=-0.00001\n" + code("cliffwalking_env.py"));
  auto gw = script(sim_tester_entries());
  auto r = run_simulation_test(a, cliff_task(), f.env(*gw), tb);
  EXPECT_TRUE(r.pass) << r.analysis;
}

TEST(SimulationTest, WrongDynamicsAreCaughtEvenWithALenientJudge) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", code("cliffwalking_buggy.py"));
  auto gw = script(sim_tester_entries());
  auto r = run_simulation_test(a, cliff_task(), f.env(*gw), tb);
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.analysis.find("next state 37 expected [36.0]"), std::string::npos) << r.analysis;
}

TEST(SimulationTest, CrashingHarnessFails) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", "# option: raise_on_reset\n" + code("cliffwalking_env.py"));
  auto gw = script(sim_tester_entries());
  auto r = run_simulation_test(a, cliff_task(), f.env(*gw), tb);
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.analysis.find("RuntimeError"), std::string::npos) << r.analysis;
}

TEST(SimulationTest, PlaysItselfWhenTheTesterForgets) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto a = save_artifact(f.tmp.path(), "env.py", code("cliffwalking_env.py"));
  auto gw = script({{{"match", "*"}, {"reply", R"(<final>{"success": true, "analysis": "", "suggest_fix": ""}</final>)"}}});
  auto r = run_simulation_test(a, cliff_task(), f.env(*gw), tb);
  EXPECT_TRUE(r.pass) << r.analysis;
  EXPECT_EQ(tb.play_log().size(), 1u);
}

TEST(SimulationTest, PddlUsesTheSolvabilityProbe) {
  Fixture f;
  Toolbelt tb(f.tools, f.tmp.path());
  auto src = read_file(fixtures_dir() / "pddl/gold/child_snack.pddl");
  auto a = save_artifact(f.tmp.path(), "domain.pddl", src, Representation::PddlDomain);
  auto gw = script({});
  EXPECT_TRUE(run_simulation_test(a, pddl_task(), f.env(*gw), tb).pass);
}

TEST(CheckTransitions, DescribesEveryDisagreement) {
  PlayLog log;
  PlayRecord ok{1, 36, 0, 24, -1.0, false};
  PlayRecord bad_reward{2, 24, 1, 25, -2.0, false};
  PlayRecord bad_done{3, 46, 1, 47, -1.0, false};
  log.records = {ok, bad_reward, bad_done};
  CliffWalkingEnv ref;
  auto issues = check_transitions(log, ref);
  ASSERT_EQ(issues.size(), 2u);
  EXPECT_NE(issues[0].find("reward -2 expected -1"), std::string::npos) << issues[0];
  EXPECT_NE(issues[1].find("done false expected true"), std::string::npos) << issues[1];
}

TEST(NumbersClose, AbsoluteOrRelative) {
  EXPECT_TRUE(numbers_close(-100.0, -100.00001));
  EXPECT_TRUE(numbers_close(5000.0, 5004.0));
  EXPECT_FALSE(numbers_close(1.0, 1.01));
  EXPECT_FALSE(numbers_close(std::nan(""), std::nan("")));
}

// ---- feedback ----

TEST(MergeFeedback, BothPass) {
  auto ok = make_sub_report(true, "fine", "", "");
  auto f = merge_feedback(ok, ok);
  EXPECT_TRUE(f.starts_with("Both test suites passed."));
}

TEST(MergeFeedback, UnitSectionComesFirst) {
  auto bad = make_sub_report(false, "test_goal failed", "fix the goal check", "");
  auto ok = make_sub_report(true, "fine", "", "");
  auto f = merge_feedback(bad, ok);
  auto unit = f.find("## Unit tests: FAILED");
  auto sim = f.find("## Simulation test: passed");
  ASSERT_NE(unit, std::string::npos);
  ASSERT_NE(sim, std::string::npos);
  EXPECT_LT(unit, sim);
  EXPECT_NE(f.find("fix the goal check"), std::string::npos);
}

TEST(MergeFeedback, LongReportsAreTruncated) {
  std::string huge(20000, 'x');
  auto bad = make_sub_report(false, huge, huge, huge);
  auto f = merge_feedback(bad, bad);
  EXPECT_LE(f.size(), kMaxFeedbackBytes);
  EXPECT_TRUE(f.ends_with(kTruncationMarker));
}

// ---- refine ----

namespace {

std::vector<json> develop_replies(const std::vector<std::string>& finals) {
  std::vector<json> out;
  for (const auto& s : finals) out.push_back({{"match", "[develop]"}, {"reply", s}});
  return out;
}

std::string pddl_final(const std::string& file) {
  return "<final><code_file_path>domain.pddl</code_file_path><entrypoint_code>" +
         read_file(fixtures_dir() / "pddl" / file) + "</entrypoint_code></final>";
}

}  // namespace

TEST(Refine, PassOnFirstTurn) {
  Fixture f;
  auto gw = script(develop_replies({pddl_final("gold/child_snack.pddl")}));
  auto run = refine(pddl_task(), *gw, f.tools, f.opts);
  EXPECT_EQ(run.turns.size(), 1u);
  EXPECT_TRUE(run.converged);
  EXPECT_EQ(run.trajectory.verifier, 1);
  EXPECT_TRUE(fs::exists(f.opts.runs_root / "snack/turn_1/domain.pddl"));
  EXPECT_TRUE(fs::exists(f.opts.runs_root / "snack/turn_1/reports.json"));
  EXPECT_TRUE(fs::exists(f.opts.runs_root / "snack/trajectory.jsonl"));
  EXPECT_TRUE(fs::exists(f.opts.runs_root / "snack/run_record.json"));
}

TEST(Refine, FailingEveryTurnKeepsTheLastArtifact) {
  Fixture f;
  auto gw = script(develop_replies({pddl_final("malformed/undefined_type.pddl"), pddl_final("malformed/type_mismatch.pddl"),
                                    pddl_final("malformed/undefined_constant.pddl")}));
  auto run = refine(pddl_task(3), *gw, f.tools, f.opts);
  ASSERT_EQ(run.turns.size(), 3u);
  EXPECT_FALSE(run.converged);
  EXPECT_EQ(run.trajectory.verifier, 0);
  ASSERT_TRUE(run.final_artifact);
  EXPECT_EQ(run.final_artifact->turn_index, 3);
  EXPECT_EQ(run.final_artifact->source, read_file(fixtures_dir() / "pddl/malformed/undefined_constant.pddl"));
  // every turn kept its own copy
  for (int k = 1; k <= 3; ++k) EXPECT_TRUE(fs::exists(f.opts.runs_root / ("snack/turn_" + std::to_string(k)) / "domain.pddl"));
  for (std::size_t k = 0; k < run.turns.size(); ++k) EXPECT_EQ(run.turns[k].turn_index, static_cast<int>(k) + 1);
}

TEST(Refine, EmptyTurnThenSuccess) {
  Fixture f;
  auto gw = script(develop_replies({"<final>I could not finish.</final>", pddl_final("gold/child_snack.pddl")}));
  auto run = refine(pddl_task(), *gw, f.tools, f.opts);
  ASSERT_EQ(run.turns.size(), 2u);
  EXPECT_TRUE(run.turns[0].empty);
  ASSERT_EQ(run.trajectory.steps.size(), 2u);
  EXPECT_EQ(run.trajectory.steps[0].developer_action, kEmptyTurnMarker);
  EXPECT_TRUE(run.converged);
  EXPECT_EQ(run.trajectory.verifier, 1);
}

TEST(Refine, TurnOverrideCapsTheLoop) {
  Fixture f;
  f.opts.turns_override = 1;
  auto gw = script(develop_replies({pddl_final("malformed/undefined_type.pddl"), pddl_final("gold/child_snack.pddl")}));
  auto run = refine(pddl_task(2), *gw, f.tools, f.opts);
  EXPECT_EQ(run.turns.size(), 1u);
  EXPECT_FALSE(run.converged);
}

TEST(Refine, SecondTurnSeesFirstTurnFeedback) {
  Fixture f;
  auto gw = script({{{"match", "[develop]"}, {"reply", pddl_final("malformed/undefined_type.pddl")}},
                    {{"match", "type 'seed' is not declared"}, {"reply", pddl_final("gold/child_snack.pddl")}}});
  auto run = refine(pddl_task(), *gw, f.tools, f.opts);
  EXPECT_TRUE(run.converged);
  EXPECT_EQ(run.turns.size(), 2u);
}

TEST(Refine, RunRecordRoundTrips) {
  Fixture f;
  auto gw = script(develop_replies({pddl_final("gold/child_snack.pddl")}));
  auto run = refine(pddl_task(), *gw, f.tools, f.opts);
  auto loaded = json::parse(read_file(f.opts.runs_root / "snack/run_record.json")).get<RunRecord>();
  EXPECT_EQ(json(loaded), json(run));
}

TEST(Refine, GatewayFailureIsAFaultNotAThrow) {
  Fixture f;
  auto gw = script({});
  auto run = refine(pddl_task(), *gw, f.tools, f.opts);
  EXPECT_FALSE(run.converged);
  EXPECT_FALSE(run.faults.empty());
}

TEST(DefaultBudgets, PerRepresentation) {
  EXPECT_EQ(default_budgets(Representation::PddlDomain).refinement_turns, 2);
  EXPECT_EQ(default_budgets(Representation::TextGame).refinement_turns, 2);
  EXPECT_EQ(default_budgets(Representation::CodeEnv).refinement_turns, 3);
}

// ---- scripted end-to-end run ----

TEST(DryRun, ConvergesFailsAndReplaysIdentically) {
  TempDir tmp;
  write_dry_run_bundle(tmp.path());
  auto first = run_dry_pipeline(tmp.path(), tmp / "runs_a");
  auto second = run_dry_pipeline(tmp.path(), tmp / "runs_b");
  ASSERT_TRUE(first.outcome.faults.empty()) << first.outcome.faults.front();
  ASSERT_EQ(first.outcome.runs.size(), 2u);

  const auto& ok = first.outcome.runs[0];
  EXPECT_EQ(ok.task_id, "cliff-ok");
  EXPECT_TRUE(ok.converged);
  EXPECT_EQ(ok.turns.size(), 2u);
  EXPECT_EQ(ok.trajectory.verifier, 1);
  EXPECT_EQ(ok.research.evidence_log.size(), 1u);

  const auto& bad = first.outcome.runs[1];
  EXPECT_FALSE(bad.converged);
  EXPECT_EQ(bad.turns.size(), 3u);
  EXPECT_EQ(bad.trajectory.verifier, 0);

  for (const auto* id : {"cliff-ok", "cliff-bad"}) {
    auto a = read_file(first.runs_root / id / "trajectory.jsonl");
    auto b = read_file(second.runs_root / id / "trajectory.jsonl");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, b) << id;
  }
  for (const auto& url : first.fetches->requested()) EXPECT_NE(url, kBlockedUrl);
  EXPECT_FALSE(first.fetches->requested().empty());
}
