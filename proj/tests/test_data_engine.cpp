#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "a2w/data_engine.hpp"
#include "support.hpp"

using namespace a2w;
using namespace a2w::testsupport;

namespace {

SubReport sub(bool pass, const std::string& analysis = "") { return {pass, analysis, "", ""}; }

TestReport report(bool unit, bool sim, const std::string& unit_msg = "", const std::string& sim_msg = "") {
  return {sub(unit, unit_msg), sub(sim, sim_msg), ""};
}

// A run whose turns all fail except, when `accepted`, the last one.
RunRecord make_run(const std::string& id, bool accepted, int turns = 1) {
  RunRecord r;
  r.task_id = id;
  r.trajectory.task_id = id;
  r.trajectory.context = "Build " + id;
  for (int t = 1; t <= turns; ++t) {
    WorldModelArtifact a{id + "-t" + std::to_string(t), Representation::CodeEnv, "code v" + std::to_string(t),
                         "env.py", t, id};
    bool pass = accepted && t == turns;
    TestReport rep = report(pass, pass, pass ? "" : "turn " + std::to_string(t) + " failed");
    rep.merged_feedback = pass ? "Both test suites passed." : "feedback " + std::to_string(t);
    r.turns.push_back({t, false, a, rep});
    r.trajectory.steps.push_back({"turn " + std::to_string(t), "code v" + std::to_string(t), rep.merged_feedback});
    r.trajectory.final_artifact = a;
    r.trajectory.final_report = rep;
  }
  r.final_artifact = r.trajectory.final_artifact;
  r.trajectory.executed = true;
  r.converged = accepted;
  r.trajectory.verifier = verify(r.trajectory);
  return r;
}

fs::path store(const fs::path& root, const RunRecord& r) {
  auto dir = root / r.task_id;
  fs::create_directories(dir);
  write_file_atomic(dir / "run_record.json", json(r).dump(2));
  return dir;
}

std::vector<SftRecord> read_sft(const fs::path& p) {
  std::vector<SftRecord> out;
  for (const auto& j : read_jsonl(p)) out.push_back(j.get<SftRecord>());
  return out;
}

std::string words(const std::string& prefix, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + prefix + std::to_string(i);
  return s;
}

}  // namespace

// ---- verify ----

TEST(Verify, ConvergedRun) { EXPECT_EQ(verify(make_run("a", true).trajectory), 1); }

TEST(Verify, UnitPassSimFail) {
  auto t = make_run("a", true).trajectory;
  t.final_report->simulation.pass = false;
  EXPECT_EQ(verify(t), 0);
}

TEST(Verify, NoFinalArtifact) {
  auto t = make_run("a", true).trajectory;
  t.final_artifact.reset();
  EXPECT_EQ(verify(t), 0);
}

TEST(Verify, NeverExecuted) {
  auto t = make_run("a", true).trajectory;
  t.executed = false;
  EXPECT_EQ(verify(t), 0);
}

// ---- export ----

TEST(ExportSft, FiltersByVerifier) {
  TempDir tmp;
  std::vector<fs::path> dirs{store(tmp / "runs", make_run("r1", true)), store(tmp / "runs", make_run("r2", false, 3)),
                             store(tmp / "runs", make_run("r3", true, 2))};
  auto res = export_sft(dirs, tmp / "sft.jsonl");
  EXPECT_EQ(res.exported, 2u);
  EXPECT_EQ(res.rejected, 1u);
  auto recs = read_sft(tmp / "sft.jsonl");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].task_id, "r1");
  EXPECT_EQ(recs[1].task_id, "r3");
  for (const auto& r : recs) EXPECT_EQ(r.verifier, 1);
}

TEST(ExportSft, FeedbackPrecedesTheRevision) {
  auto rec = make_sft_record(make_run("two", true, 2));
  ASSERT_EQ(rec.messages.size(), 5u);
  EXPECT_EQ(rec.messages[0].role, Role::System);
  EXPECT_EQ(rec.messages[1].content, "Build two");
  EXPECT_EQ(rec.messages[2].content, "code v1");
  EXPECT_EQ(rec.messages[3].role, Role::User);
  EXPECT_NE(rec.messages[3].content.find("feedback 1"), std::string::npos);
  EXPECT_EQ(rec.messages[4].content, "code v2");
  EXPECT_EQ(rec.messages.back().role, Role::Assistant);
  ASSERT_EQ(rec.reward_summary.size(), 2u);
  EXPECT_EQ(rec.reward_summary[0]["unit_pass"], false);
  EXPECT_EQ(rec.reward_summary[1]["simulation_pass"], true);
  EXPECT_EQ(rec.meta["turns"], 2);
}

TEST(ExportSft, NothingAccepted) {
  TempDir tmp;
  std::vector<fs::path> dirs{store(tmp / "runs", make_run("r1", false))};
  auto res = export_sft(dirs, tmp / "sft.jsonl");
  EXPECT_EQ(res.exported, 0u);
  ASSERT_TRUE(fs::exists(tmp / "sft.jsonl"));
  EXPECT_EQ(read_file(tmp / "sft.jsonl"), "");
}

TEST(ExportSft, CorruptRunIsSkippedAndCounted) {
  TempDir tmp;
  auto good = store(tmp / "runs", make_run("ok", true));
  fs::create_directories(tmp / "runs/bad");
  write_file_atomic(tmp / "runs/bad/run_record.json", "{ truncated");
  auto dirs = discover_run_dirs(tmp / "runs");
  ASSERT_EQ(dirs.size(), 2u);
  auto res = export_sft(dirs, tmp / "sft.jsonl");
  EXPECT_EQ(res.exported, 1u);
  EXPECT_EQ(res.corrupt, 1u);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_NE(res.warnings[0].find("bad"), std::string::npos);
}

TEST(ExportSft, MembershipEqualsTheAcceptedSet) {
  std::mt19937 rng(31);
  for (int round = 0; round < 20; ++round) {
    TempDir tmp;
    std::set<std::string> accepted;
    std::vector<fs::path> dirs;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      const bool ok = rng() % 2;
      auto run = make_run("run" + std::to_string(i), ok, 1 + static_cast<int>(rng() % 3));
      if (rng() % 5 == 0) run.trajectory.executed = false;
      if (verify(run.trajectory)) accepted.insert(run.task_id);
      dirs.push_back(store(tmp / "runs", run));
    }
    export_sft(dirs, tmp / "sft.jsonl");
    std::set<std::string> got;
    for (const auto& r : read_sft(tmp / "sft.jsonl")) got.insert(r.task_id);
    ASSERT_EQ(got, accepted) << "round " << round;
  }
}

TEST(ExportSft, DryRunExportsOnlyTheConvergedTask) {
  TempDir tmp;
  write_dry_run_bundle(tmp.path());
  auto dry = run_dry_pipeline(tmp.path(), tmp / "runs");
  auto res = export_sft(discover_run_dirs(tmp / "runs"), tmp / "sft.jsonl");
  auto recs = read_sft(tmp / "sft.jsonl");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].task_id, "cliff-ok");
  EXPECT_EQ(res.rejected, 1u);
}

TEST(SftRecord, JsonRoundTrip) {
  auto rec = make_sft_record(make_run("x", true, 2));
  EXPECT_EQ(json(json(rec).get<SftRecord>()), json(rec));
}

// ---- contamination ----

TEST(Contamination, IdenticalTexts) {
  auto t = words("w", 20);
  auto c = ngram_contamination(t, t);
  EXPECT_TRUE(c.contaminated);
  EXPECT_EQ(whitespace_tokens(c.witness).size(), 10u);
}

TEST(Contamination, ShortTextsAreClean) {
  auto t = words("w", 9);
  EXPECT_FALSE(ngram_contamination(t, t).contaminated);
  EXPECT_FALSE(ngram_contamination(words("w", 30), t).contaminated);
}

TEST(Contamination, PlantedPhraseIsTheWitness) {
  const std::string phrase = "the agent steps off the cliff and returns to start";
  auto gold = words("g", 200) + " " + phrase + " " + words("h", 50);
  auto retrieved = words("r", 300) + "\n" + phrase + "\t" + words("s", 20);
  auto c = ngram_contamination(gold, retrieved);
  ASSERT_TRUE(c.contaminated);
  EXPECT_EQ(c.witness, phrase);
}

TEST(Contamination, DisjointThousandTokenTexts) {
  EXPECT_FALSE(ngram_contamination(words("a", 1000), words("b", 1000)).contaminated);
}

TEST(Contamination, CaseIsPreserved) {
  auto t = words("w", 12);
  auto upper = t;
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  EXPECT_FALSE(ngram_contamination(t, upper).contaminated);
}

TEST(Contamination, SymmetricAndMonotone) {
  std::mt19937 rng(8);
  auto text = [&](int len) {
    std::string s;
    for (int i = 0; i < len; ++i) s += (i ? " " : "") + std::string(1, static_cast<char>('a' + rng() % 3));
    return s;
  };
  for (int i = 0; i < 300; ++i) {
    auto a = text(static_cast<int>(rng() % 30));
    auto b = text(static_cast<int>(rng() % 30));
    const int n = 1 + static_cast<int>(rng() % 4);
    const bool ab = ngram_contamination(a, b, n).contaminated;
    ASSERT_EQ(ab, ngram_contamination(b, a, n).contaminated);
    if (ab) {
      ASSERT_TRUE(ngram_contamination(a + " " + text(5), b, n).contaminated);
      ASSERT_TRUE(ngram_contamination(a, text(5) + " " + b, n).contaminated);
    }
  }
}

TEST(Contamination, NMustBePositive) { EXPECT_THROW(ngram_contamination("a", "a", 0), PreconditionError); }

// ---- win / tie / loss ----

TEST(Wtl, OneOfEach) {
  EXPECT_EQ(pairwise_wtl(std::vector<double>{1, 0, 0.5}, std::vector<double>{0, 1, 0.5}), (WtlOutcome{1, 1, 1, ""}));
}

TEST(Wtl, AllTies) {
  std::vector<double> a{0.2, 0.4, 1.0, -3};
  for (double eps : {0.0, 0.1, 5.0}) EXPECT_EQ(pairwise_wtl(a, a, eps), (WtlOutcome{0, 4, 0, ""}));
}

TEST(Wtl, AllWins) {
  std::vector<double> b{0.2, 0.4, 1.0}, a;
  for (double x : b) a.push_back(x + 1);
  EXPECT_EQ(pairwise_wtl(a, b, 0.0, "f1_avg"), (WtlOutcome{3, 0, 0, "f1_avg"}));
}

TEST(Wtl, TieTolerance) { EXPECT_EQ(pairwise_wtl(std::vector<double>{0.30, 0.5}, std::vector<double>{0.25, 0.2}, 0.1), (WtlOutcome{1, 1, 0, ""})); }

TEST(Wtl, MismatchedInstances) {
  EXPECT_THROW(pairwise_wtl(std::vector<double>{1, 2}, std::vector<double>{1}), MismatchedInstances);
  std::map<std::string, double> a{{"x", 1}, {"y", 2}}, b{{"x", 1}, {"z", 2}};
  EXPECT_THROW(pairwise_wtl(a, b), MismatchedInstances);
  std::map<std::string, double> c{{"y", 0}, {"x", 1}};
  EXPECT_EQ(pairwise_wtl(a, c), (WtlOutcome{1, 1, 0, ""}));
}

TEST(Wtl, Csv) {
  EXPECT_EQ(wtl_csv({{2, 1, 0, "r"}}), "metric,wins,ties,losses\nr,2,1,0\n");
}

// ---- failure taxonomy ----

TEST(Classify, PddlUndefinedConstant) {
  auto e = classify_failure(report(false, true, "undefined-constant at 4:12: constant 'kitchen' is not declared"),
                            Representation::PddlDomain);
  EXPECT_EQ(e.category, "undefined-constant");
  EXPECT_FALSE(e.low_confidence);
}

TEST(Classify, CodeEnvWrongShape) {
  auto e = classify_failure(report(true, false, "", "step 0: observation has shape (2,), expected a scalar"),
                            Representation::CodeEnv);
  EXPECT_EQ(e.category, "schema-mismatch");
}

TEST(Classify, CodeEnvStateMismatch) {
  auto e = classify_failure(report(true, false, "", "step 3: next state 37 expected [36.0]"), Representation::CodeEnv, 2);
  EXPECT_EQ(e.category, "dynamics-error");
  EXPECT_FALSE(e.low_confidence);
  EXPECT_EQ(e.turn_index, 2);
}

TEST(Classify, UnknownSignalIsLowConfidence) {
  auto e = classify_failure(report(false, false, "it went wrong", "???"), Representation::TextGame);
  EXPECT_EQ(e.category, "state-bug");
  EXPECT_TRUE(e.low_confidence);
}

TEST(Classify, BothPassedIsNoFailure) {
  EXPECT_THROW(classify_failure(report(true, true), Representation::CodeEnv), NoFailure);
}

TEST(Classify, CategoryAlwaysInTheClosedSet) {
  const std::vector<std::string> messages{"TypeError: step() takes 1 positional argument", "non-finite reward",
                                          "NameError: name 'pot' is not defined", "SyntaxError: invalid syntax",
                                          "duplicate-definition of predicate", "reward -1 expected -100", "x"};
  for (auto kind : {Representation::PddlDomain, Representation::CodeEnv, Representation::TextGame}) {
    const auto& cats = failure_categories(kind);
    for (const auto& m : messages) {
      auto e = classify_failure(report(false, true, m), kind);
      EXPECT_NE(std::find(cats.begin(), cats.end(), e.category), cats.end()) << m;
    }
  }
}

TEST(Taxonomy, CountsPerKind) {
  std::vector<ErrorClass> errs{classify_failure(report(false, true, "SyntaxError"), Representation::TextGame),
                               classify_failure(report(false, true, "SyntaxError"), Representation::TextGame),
                               classify_failure(report(false, true, "??"), Representation::CodeEnv)};
  auto j = taxonomy_report(errs);
  EXPECT_EQ(j["approximation"], true);
  EXPECT_EQ(j["total"], 3);
  EXPECT_EQ(j["kinds"][to_string(Representation::TextGame)]["syntax-error"], 2);
  EXPECT_EQ(j["low_confidence"], 1);
  EXPECT_NE(taxonomy_csv(errs).find(",syntax-error,2,1.0000\n"), std::string::npos);
}

TEST(Taxonomy, CollectSkipsPassingTurns) {
  auto runs = std::vector<RunRecord>{make_run("a", true, 3), make_run("b", false, 2)};
  EXPECT_EQ(collect_failures(runs).size(), 4u);
}

TEST(Usage, AggregatesAndPrints) {
  RunRecord a, b;
  a.trajectory.usage.add("develop", {100, 20, 1.5});
  b.trajectory.usage.add("develop", {50, 5, 0.5});
  b.trajectory.usage.add("research", {10, 1, 0.25});
  auto u = aggregate_usage({a, b});
  EXPECT_EQ(u.total(), (StageUsage{160, 26, 2.25}));
  EXPECT_EQ(usage_csv(u),
            "stage,input_tokens,output_tokens,wall_time_seconds\ndevelop,150,25,2\nresearch,10,1,0.25\ntotal,160,26,2.25\n");
}
