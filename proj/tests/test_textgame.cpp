#include <gtest/gtest.h>

#include <set>

#include "a2w/textgame.hpp"
#include "support.hpp"

using namespace a2w;
using namespace a2w::testsupport;

namespace {

// Two verbs, two actions each, never ends.
class TwoVerbGame : public GameHandle {
 public:
  std::string init() override { return "A crossroads with fruit."; }
  std::vector<std::string> actions() override { return {"go north", "go south", "eat apple", "eat pear"}; }
  GameStep step(const std::string& a) override { return {"You " + a + ".", 0, false, false}; }
};

class SilentGame : public GameHandle {
 public:
  std::string init() override { return "Nothing here."; }
  std::vector<std::string> actions() override { return {}; }
  GameStep step(const std::string&) override { return {"", 0, false, false}; }
};

CrawlPath path_with_verb(const std::string& verb, int k) {
  return {verb, {{verb + " thing" + std::to_string(k), "ok", false}}};
}

json take(const std::string& action) { return {{"name", "take_action"}, {"arguments", {{"action", action}}}}; }

std::shared_ptr<ScriptedGateway> winning_player() {
  return script({{{"match", "Opening observation"}, {"tool_call", take("take pea")}},
                 {{"match", "*"}, {"tool_call", take("put pea in pot")}},
                 {{"match", "*"}, {"reply", "<final>done</final>"}, {"repeat", true}}});
}

}  // namespace

// ---- technical validity ----

TEST(TechnicalValidity, ToyGamePassesEveryGate) {
  ToyGame g;
  auto t = technical_validity(g, CrawlConfig{});
  EXPECT_EQ(t.init, 1);
  EXPECT_EQ(t.possible_actions, 1);
  EXPECT_EQ(t.runnable, 1);
  EXPECT_TRUE(t.errors.empty());
}

TEST(TechnicalValidity, RaisingConstructorZeroesAllGates) {
  ToyGame g({.raise_on_init = true});
  auto t = technical_validity(g, CrawlConfig{});
  EXPECT_EQ(t.init, 0);
  EXPECT_EQ(t.possible_actions, 0);
  EXPECT_EQ(t.runnable, 0);
  ASSERT_FALSE(t.errors.empty());
}

TEST(TechnicalValidity, RaisingVerbFailsOnlyRunnable) {
  ToyGame g({.raise_verb = "pour"});
  auto t = technical_validity(g, CrawlConfig{});
  EXPECT_EQ(t.init, 1);
  EXPECT_EQ(t.possible_actions, 1);
  EXPECT_EQ(t.runnable, 0);
}

TEST(TechnicalValidity, GatesAreMonotone) {
  for (auto crawl : {CrawlResult{{}, true, false, true}, CrawlResult{{}, false, true, true}}) {
    auto t = technical_validity(crawl);
    EXPECT_LE(t.runnable, t.possible_actions);
    EXPECT_LE(t.possible_actions, t.init);
  }
}

// ---- crawl ----

TEST(Crawl, TwoVerbsDepthTwoCapOne) {
  TwoVerbGame g;
  CrawlConfig c;
  c.max_depth = 2;
  c.per_verb_cap = 1;
  auto r = crawl_paths(g, c);
  EXPECT_LE(r.paths.size(), 4u);
  std::set<std::string> verbs;
  for (const auto& p : r.paths) {
    verbs.insert(p.verb);
    EXPECT_EQ(p.steps.size(), 2u);
  }
  EXPECT_EQ(verbs, (std::set<std::string>{"go", "eat"}));
}

TEST(Crawl, OneNodeGivesOnePath) {
  TwoVerbGame g;
  CrawlConfig c;
  c.max_nodes = 1;
  auto r = crawl_paths(g, c);
  EXPECT_EQ(r.paths.size(), 1u);
  EXPECT_EQ(r.nodes, 1);
}

TEST(Crawl, EmptyRootIsFlagged) {
  SilentGame g;
  auto r = crawl_paths(g, CrawlConfig{});
  EXPECT_TRUE(r.paths.empty());
  EXPECT_TRUE(r.empty_root);
}

TEST(Crawl, ErrorsBecomeObservations) {
  ToyGame g({.raise_verb = "pour"});
  auto r = crawl_paths(g, CrawlConfig{});
  bool found = false;
  for (const auto& p : r.paths) {
    if (p.verb != "pour") continue;
    ASSERT_TRUE(p.steps.back().error);
    EXPECT_NE(p.steps.back().observation.find("AttributeError"), std::string::npos);
    found = true;
  }
  EXPECT_TRUE(found);
}

TEST(Crawl, DeterministicForASeed) {
  TwoVerbGame g;
  CrawlConfig c;
  c.seed = 12;
  auto a = crawl_paths(g, c);
  auto b = crawl_paths(g, c);
  EXPECT_EQ(a.paths, b.paths);
  EXPECT_LE(static_cast<int>(a.paths.size()), c.max_nodes);
}

TEST(Crawl, ActionVerb) {
  EXPECT_EQ(action_verb("  Put pea in pot"), "put");
  EXPECT_EQ(action_verb(""), "");
}

// ---- alignment ----

TEST(Alignment, AlwaysYes) {
  std::vector<CrawlPath> paths;
  for (int i = 0; i < 10; ++i) paths.push_back(path_with_verb("v" + std::to_string(i % 3), i));
  auto judge = script({{{"match", "[physical-alignment]"}, {"reply", "Yes. Plausible."}, {"repeat", true}}});
  CrawlConfig c;
  c.sample_size = 10;
  auto r = physical_alignment(paths, "garden game", *judge, c);
  EXPECT_EQ(r.sampled, 10);
  EXPECT_EQ(r.value, 1.0);
}

TEST(Alignment, ThreeOfTen) {
  std::vector<CrawlPath> paths;
  for (int i = 0; i < 10; ++i) paths.push_back(path_with_verb("v" + std::to_string(i), i));
  std::vector<json> entries;
  for (int i = 0; i < 10; ++i) entries.push_back({{"match", "*"}, {"reply", i < 3 ? "Yes" : "No, water does not do that."}});
  auto judge = script(entries);
  CrawlConfig c;
  c.sample_size = 10;
  EXPECT_DOUBLE_EQ(physical_alignment(paths, "garden game", *judge, c).value, 0.3);
}

TEST(Alignment, JudgeFailureCountsAsNotAligned) {
  std::vector<CrawlPath> paths{path_with_verb("a", 0), path_with_verb("b", 1)};
  auto judge = script({{{"match", "*"}, {"reply", "Yes"}}});  // second call exhausts the script
  CrawlConfig c;
  c.sample_size = 2;
  auto r = physical_alignment(paths, "t", *judge, c);
  EXPECT_DOUBLE_EQ(r.value, 0.5);
  EXPECT_EQ(r.errors.size(), 1u);
}

TEST(StratifiedSample, MinorityVerbIsIncluded) {
  std::vector<CrawlPath> paths;
  for (int i = 0; i < 7; ++i) paths.push_back(path_with_verb("a", i));
  paths.push_back(path_with_verb("b", 0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = stratified_sample(paths, 4, seed);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(std::count_if(s.begin(), s.end(), [](const CrawlPath& p) { return p.verb == "b"; }), 1) << seed;
  }
}

TEST(StratifiedSample, SmallerThanTheSample) {
  std::vector<CrawlPath> paths{path_with_verb("a", 0), path_with_verb("b", 0)};
  EXPECT_EQ(stratified_sample(paths, 16, 0).size(), 2u);
}

// ---- compliance ----

TEST(Compliance, UnanimousYes) {
  auto judge = script({{{"match", "*"}, {"reply", "Yes, all present."}, {"repeat", true}}});
  auto s = specification_compliance("code", "spec", *judge);
  EXPECT_EQ(s.critical_objects, 1);
  EXPECT_EQ(s.critical_actions, 1);
  EXPECT_EQ(s.distractors, 1);
}

TEST(Compliance, MajorityOfThree) {
  auto judge = script({{{"match", "[critical-objects]"}, {"reply", "Yes"}},
                       {{"match", "[critical-objects]"}, {"reply", "No"}},
                       {{"match", "[critical-objects]"}, {"reply", "Yes"}},
                       {{"match", "*"}, {"reply", "No"}, {"repeat", true}}});
  auto s = specification_compliance("code", "spec", *judge);
  EXPECT_EQ(s.critical_objects, 1);
  EXPECT_EQ(s.critical_actions, 0);
  EXPECT_EQ(s.distractors, 0);
}

TEST(Compliance, MaybeIsNo) {
  auto judge = script({{{"match", "*"}, {"reply", "maybe"}, {"repeat", true}}});
  auto s = specification_compliance("code", "spec", *judge);
  EXPECT_EQ(s.critical_objects + s.critical_actions + s.distractors, 0);
}

TEST(Verdict, FirstWordOnly) {
  EXPECT_TRUE(parse_verdict("Yes"));
  EXPECT_TRUE(parse_verdict("**YES** because"));
  EXPECT_TRUE(parse_verdict("yes."));
  EXPECT_FALSE(parse_verdict("No, yes"));
  EXPECT_FALSE(parse_verdict("Yesterday"));
  EXPECT_FALSE(parse_verdict(""));
}

// ---- winnability ----

TEST(Winnability, TwoMovesWithinHorizonFive) {
  ToyGame g;
  auto player = winning_player();
  CrawlConfig c;
  c.horizon = 5;
  auto r = winnability(g, *player, c);
  EXPECT_EQ(r.winnable, 1);
  EXPECT_EQ(r.moves, 2);
}

TEST(Winnability, HorizonOneIsTooShort) {
  ToyGame g;
  auto player = winning_player();
  CrawlConfig c;
  c.horizon = 1;
  auto r = winnability(g, *player, c);
  EXPECT_EQ(r.winnable, 0);
  EXPECT_EQ(r.moves, 1);
}

TEST(Winnability, NoWinState) {
  ToyGame g({.winnable = false});
  auto player = winning_player();
  EXPECT_EQ(winnability(g, *player, CrawlConfig{}).winnable, 0);
}

TEST(Winnability, PlayerFailureIsZero) {
  ToyGame g;
  auto player = script({});
  auto r = winnability(g, *player, CrawlConfig{});
  EXPECT_EQ(r.winnable, 0);
  EXPECT_FALSE(r.error.empty());
}

// ---- whole evaluation ----

TEST(EvaluateGame, CrashingGameGetsGatedZeros) {
  ToyGame g({.raise_on_init = true});
  auto judge = script({{{"match", "*"}, {"reply", "Yes"}, {"repeat", true}}});
  auto player = winning_player();
  auto s = evaluate_game(g, "src", "spec", *judge, *player, CrawlConfig{});
  json j = s;
  EXPECT_EQ(j["technical"], json({{"init", 0}, {"possible_actions", 0}, {"runnable", 0}}));
  EXPECT_EQ(j["winnable"], 0);
  EXPECT_EQ(j["alignment"], 0.0);
}

TEST(EvaluateGame, ToyGameScoresWell) {
  ToyGame g;
  auto judge = script({{{"match", "*"}, {"reply", "Yes"}, {"repeat", true}}});
  auto player = winning_player();
  auto s = evaluate_game(g, "src", "spec", *judge, *player, CrawlConfig{});
  EXPECT_EQ(s.technical.runnable, 1);
  EXPECT_EQ(s.compliance.distractors, 1);
  EXPECT_EQ(s.winnable, 1);
  EXPECT_EQ(s.alignment, 1.0);
}

TEST(CrawlConfig, Validation) {
  EXPECT_TRUE(validate_crawl(CrawlConfig{}).empty());
  CrawlConfig c;
  c.votes = 0;
  EXPECT_EQ(validate_crawl(c).size(), 1u);
}
