#pragma once

// Text-game evaluation: gated technical validity from a bounded crawl,
// judged specification compliance and physical alignment, and agent-played
// winnability.

#include <map>
#include <string>
#include <vector>

#include "a2w/agent.hpp"
#include "a2w/env.hpp"

namespace a2w {

struct CrawlConfig {
  int max_depth = 4;
  int max_nodes = 200;
  int per_verb_cap = 3;
  int sample_size = 16;
  int horizon = 25;  // winnability
  int votes = 3;     // compliance majority
  std::uint64_t seed = 0;
};

std::vector<std::string> validate_crawl(const CrawlConfig& cfg);

struct CrawlStep {
  std::string action;
  std::string observation;
  bool error = false;

  bool operator==(const CrawlStep&) const = default;
};

struct CrawlPath {
  std::string verb;  // first token of the final action
  std::vector<CrawlStep> steps;

  bool operator==(const CrawlPath&) const = default;
};

struct CrawlResult {
  std::vector<CrawlPath> paths;
  bool init_ok = false;
  bool actions_ok = false;  // every enumeration succeeded
  bool steps_ok = false;    // every step succeeded
  bool empty_root = false;
  int nodes = 0;
  std::vector<std::string> errors;
};

/// First whitespace-separated token, lowercased.
std::string action_verb(std::string_view action);

/// Breadth-first crawl. Every node is reached by re-initializing the game and
/// replaying its prefix. At each node at most `per_verb_cap` actions per verb
/// are expanded; errors become observations. Returned paths are the leaves
/// (depth limit, terminal, error or node budget), at most `max_nodes`.
CrawlResult crawl_paths(GameHandle& game, const CrawlConfig& cfg);

struct TechnicalScores {
  int init = 0;
  int possible_actions = 0;
  int runnable = 0;
  std::vector<std::string> errors;
};

/// Gated: a failed gate zeroes every later one.
TechnicalScores technical_validity(const CrawlResult& crawl);
TechnicalScores technical_validity(GameHandle& game, const CrawlConfig& cfg);

/// "yes"/"no" as the first word of the reply; anything else is No.
bool parse_verdict(std::string_view reply);

/// Balanced sample: paths grouped by verb, groups visited round-robin in
/// verb order, seeded shuffle inside each group.
std::vector<CrawlPath> stratified_sample(const std::vector<CrawlPath>& paths, int sample_size, std::uint64_t seed);

struct AlignmentResult {
  double value = 0.0;
  int sampled = 0;
  int aligned = 0;
  std::vector<std::string> errors;
};

AlignmentResult physical_alignment(const std::vector<CrawlPath>& paths, std::string_view task_text, Gateway& judge,
                                   const CrawlConfig& cfg);

struct ComplianceScores {
  int critical_objects = 0;
  int critical_actions = 0;
  int distractors = 0;
  std::vector<std::string> errors;
};

/// Three judged questions, each decided by a majority over `votes` calls.
ComplianceScores specification_compliance(std::string_view game_source, std::string_view spec_text, Gateway& judge,
                                          int votes = 3);

struct WinnabilityResult {
  int winnable = 0;
  int moves = 0;
  Transcript transcript;
  std::string error;
};

/// A GamePlayer agent gets `take_action` and at most `horizon` moves.
WinnabilityResult winnability(GameHandle& game, Gateway& player, const CrawlConfig& cfg);

struct GameScores {
  TechnicalScores technical;
  ComplianceScores compliance;
  int winnable = 0;
  double alignment = 0.0;
};

void to_json(json& j, const GameScores& s);

GameScores evaluate_game(GameHandle& game, std::string_view game_source, std::string_view spec_text, Gateway& judge,
                         Gateway& player, const CrawlConfig& cfg);

/// Small native game for tests: pick up a pea, plant it in a pot.
/// Winning sequence: "take pea", "put pea in pot".
class ToyGame : public GameHandle {
 public:
  struct Options {
    bool raise_on_init = false;
    std::string raise_verb;  // step() raises for actions with this verb
    bool winnable = true;
  };

  ToyGame() = default;
  explicit ToyGame(Options o) : opt_(std::move(o)) {}

  std::string init() override;
  std::vector<std::string> actions() override;
  GameStep step(const std::string& action) override;

 private:
  Options opt_;
  bool started_ = false;
  bool held_ = false;
  bool planted_ = false;
  bool done_ = false;
  int score_ = 0;
};

}  // namespace a2w
