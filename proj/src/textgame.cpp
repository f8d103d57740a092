#include "a2w/textgame.hpp"

#include <algorithm>
#include <deque>
#include <random>

#include "a2w/cwm.hpp"

namespace a2w {

std::vector<std::string> validate_crawl(const CrawlConfig& cfg) {
  std::vector<std::string> v;
  if (cfg.max_depth < 1) v.push_back("max_depth must be positive");
  if (cfg.max_nodes < 1) v.push_back("max_nodes must be positive");
  if (cfg.per_verb_cap < 1) v.push_back("per_verb_cap must be positive");
  if (cfg.sample_size < 1) v.push_back("sample_size must be positive");
  if (cfg.horizon < 1) v.push_back("horizon must be positive");
  if (cfg.votes < 1) v.push_back("votes must be positive");
  return v;
}

std::string action_verb(std::string_view action) {
  auto words = split_whitespace(action);
  return words.empty() ? std::string() : to_lower(words.front());
}

namespace {


std::string error_text(const std::exception& e) { return std::string("error: ") + e.what(); }

// Re-initializes and replays the prefix. False when the replay itself failed.
bool replay(GameHandle& game, const std::vector<CrawlStep>& steps, std::string& why) {
  try {
    game.init();
    for (const auto& s : steps) game.step(s.action);
    return true;
  } catch (const std::exception& e) {
    why = error_text(e);
    return false;
  }
}

}  // namespace

CrawlResult crawl_paths(GameHandle& game, const CrawlConfig& cfg) {
  if (auto v = validate_crawl(cfg); !v.empty()) throw PreconditionError(v.front());
  CrawlResult out;
  out.actions_ok = out.steps_ok = true;
  try {
    game.init();
    out.init_ok = true;
  } catch (const std::exception& e) {
    out.init_ok = out.actions_ok = out.steps_ok = false;
    out.errors.push_back("init: " + std::string(e.what()));
    return out;
  }

  std::deque<std::vector<CrawlStep>> frontier{{}};
  std::vector<std::vector<CrawlStep>> leaves;
  std::uint64_t expansion = 0;

  while (!frontier.empty()) {
    auto prefix = std::move(frontier.front());
    frontier.pop_front();
    if (out.nodes >= cfg.max_nodes) {
      if (!prefix.empty()) leaves.push_back(std::move(prefix));
      continue;
    }
    std::string why;
    if (!prefix.empty() && !replay(game, prefix, why)) {
      out.steps_ok = false;
      out.errors.push_back("replay: " + why);
      leaves.push_back(std::move(prefix));
      continue;
    }
    std::vector<std::string> available;
    try {
      available = game.actions();
    } catch (const std::exception& e) {
      out.actions_ok = false;
      out.errors.push_back("actions: " + std::string(e.what()));
      if (prefix.empty()) return out;
      prefix.back().observation += "\n" + error_text(e);
      prefix.back().error = true;
      leaves.push_back(std::move(prefix));
      continue;
    }
    if (available.empty()) {
      if (prefix.empty()) {
        out.empty_root = true;
        return out;
      }
      leaves.push_back(std::move(prefix));
      continue;
    }

    // Verb groups in first-seen order, each shuffled with a per-node seed.
    std::vector<std::string> verbs;
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& a : available) {
      auto v = action_verb(a);
      if (!groups.contains(v)) verbs.push_back(v);
      groups[v].push_back(a);
    }
    Rng rng(mix_seed(cfg.seed, expansion++));
    std::vector<std::string> chosen;
    for (const auto& v : verbs) {
      auto& g = groups[v];
      std::shuffle(g.begin(), g.end(), rng);
      for (int i = 0; i < cfg.per_verb_cap && i < static_cast<int>(g.size()); ++i) chosen.push_back(g[i]);
    }

    bool first = true;
    for (const auto& a : chosen) {
      if (out.nodes >= cfg.max_nodes) break;
      if (!first && !replay(game, prefix, why)) {
        out.steps_ok = false;
        out.errors.push_back("replay: " + why);
        break;
      }
      first = false;
      ++out.nodes;
      auto path = prefix;
      CrawlStep s{a, {}, false};
      bool terminal = false;
      try {
        auto r = game.step(a);
        s.observation = r.observation;
        terminal = r.done;
      } catch (const std::exception& e) {
        s.observation = error_text(e);
        s.error = true;
        out.steps_ok = false;
        out.errors.push_back("step '" + a + "': " + e.what());
      }
      const bool failed = s.error;
      path.push_back(std::move(s));
      if (failed || terminal || static_cast<int>(path.size()) >= cfg.max_depth) {
        leaves.push_back(std::move(path));
      } else {
        frontier.push_back(std::move(path));
      }
    }
  }

  for (auto& l : leaves) {
    CrawlPath p;
    p.verb = action_verb(l.back().action);
    p.steps = std::move(l);
    out.paths.push_back(std::move(p));
  }
  return out;
}

TechnicalScores technical_validity(const CrawlResult& crawl) {
  TechnicalScores t;
  t.errors = crawl.errors;
  t.init = crawl.init_ok ? 1 : 0;
  t.possible_actions = t.init && crawl.actions_ok ? 1 : 0;
  t.runnable = t.possible_actions && crawl.steps_ok ? 1 : 0;
  return t;
}

TechnicalScores technical_validity(GameHandle& game, const CrawlConfig& cfg) {
  return technical_validity(crawl_paths(game, cfg));
}

bool parse_verdict(std::string_view reply) {
  std::string word;
  for (char c : reply) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!word.empty()) {
      break;
    } else if (!std::isspace(static_cast<unsigned char>(c)) && c != '*' && c != '"') {
      return false;
    }
  }
  return word == "yes";
}

std::vector<CrawlPath> stratified_sample(const std::vector<CrawlPath>& paths, int sample_size, std::uint64_t seed) {
  std::map<std::string, std::vector<const CrawlPath*>> groups;
  for (const auto& p : paths) groups[p.verb].push_back(&p);
  Rng rng(mix_seed(seed, 0xa11));
  for (auto& [_, g] : groups) std::shuffle(g.begin(), g.end(), rng);
  std::vector<CrawlPath> out;
  for (std::size_t round = 0; static_cast<int>(out.size()) < sample_size; ++round) {
    bool any = false;
    for (auto& [_, g] : groups) {
      if (round >= g.size()) continue;
      any = true;
      out.push_back(*g[round]);
      if (static_cast<int>(out.size()) >= sample_size) break;
    }
    if (!any) break;
  }
  return out;
}

namespace {

std::string render_path(const CrawlPath& p) {
  std::string s;
  for (const auto& st : p.steps) s += "> " + st.action + "\n" + st.observation + "\n";
  return s;
}

std::string ask(Gateway& judge, const std::string& prompt) {
  std::vector<ChatMessage> msgs{
      ChatMessage::system("You judge text games. Start your reply with Yes or No, then give one sentence of reasons."),
      ChatMessage::user(prompt)};
  return judge.complete(msgs, DecodingConfig{}).reply.content;
}

}  // namespace

AlignmentResult physical_alignment(const std::vector<CrawlPath>& paths, std::string_view task_text, Gateway& judge,
                                   const CrawlConfig& cfg) {
  AlignmentResult r;
  auto sample = stratified_sample(paths, cfg.sample_size, cfg.seed);
  r.sampled = static_cast<int>(sample.size());
  for (const auto& p : sample) {
    std::string prompt = "[physical-alignment]\nGame description:\n" + std::string(task_text) +
                         "\n\nPlay transcript:\n" + render_path(p) +
                         "\nIs every observation in this transcript physically and commonsensically plausible "
                         "given the actions taken? Answer Yes or No first.";
    try {
      if (parse_verdict(ask(judge, prompt))) ++r.aligned;
    } catch (const std::exception& e) {
      r.errors.push_back(e.what());
    }
  }
  r.value = r.sampled ? static_cast<double>(r.aligned) / r.sampled : 0.0;
  return r;
}

ComplianceScores specification_compliance(std::string_view game_source, std::string_view spec_text, Gateway& judge,
                                          int votes) {
  if (votes < 1) throw PreconditionError("votes must be positive");
  static const std::pair<const char*, const char*> questions[] = {
      {"[critical-objects]", "Does the game code implement every object the specification treats as essential?"},
      {"[critical-actions]", "Does the game code implement every action the specification requires?"},
      {"[distractors]", "Does the game code include the distractor objects or actions the specification asks for?"},
  };
  ComplianceScores s;
  int* slots[] = {&s.critical_objects, &s.critical_actions, &s.distractors};
  for (int q = 0; q < 3; ++q) {
    std::string prompt = std::string(questions[q].first) + "\nSpecification:\n" + std::string(spec_text) +
                         "\n\nGame code:\n" + std::string(game_source) + "\n\n" + questions[q].second +
                         " Answer Yes or No first.";
    int yes = 0;
    for (int v = 0; v < votes; ++v) {
      try {
        if (parse_verdict(ask(judge, prompt))) ++yes;
      } catch (const std::exception& e) {
        s.errors.push_back(e.what());
      }
    }
    *slots[q] = 2 * yes > votes ? 1 : 0;
  }
  return s;
}

namespace {

class GameTools : public ToolInvoker {
 public:
  GameTools(GameHandle& g, int horizon) : game_(g), horizon_(horizon) {}

  bool has_tool(const std::string& name) const override { return name == "take_action"; }

  std::string invoke(const std::string& name, const json& args) override {
    if (name != "take_action") throw Error("unknown tool " + name);
    if (ended_) return "The game is over.";
    if (moves_ >= horizon_) return "No moves left: the horizon of " + std::to_string(horizon_) + " moves is used up.";
    std::string action = args.value("action", "");
    ++moves_;
    auto r = game_.step(action);
    if (r.won) won_ = true;
    if (r.done) {
      ended_ = true;
      return r.observation + (r.won ? "\n[game won]" : "\n[game over]");
    }
    return r.observation + "\nValid actions: " + list_actions();
  }

  std::vector<ToolSpec> tool_specs(const std::set<std::string>&) const override {
    return {{"take_action", "Perform one action in the game.",
             json{{"type", "object"},
                  {"properties", {{"action", {{"type", "string"}}}}},
                  {"required", json::array({"action"})}}}};
  }

  std::string list_actions() {
    std::string s;
    for (const auto& a : game_.actions()) s += (s.empty() ? "" : "; ") + a;
    return s;
  }

  int moves() const { return moves_; }
  bool won() const { return won_; }

 private:
  GameHandle& game_;
  int horizon_;
  int moves_ = 0;
  bool won_ = false;
  bool ended_ = false;
};

}  // namespace

WinnabilityResult winnability(GameHandle& game, Gateway& player, const CrawlConfig& cfg) {
  WinnabilityResult r;
  GameTools tools(game, cfg.horizon);
  try {
    std::string opening = game.init();
    std::string context = "Opening observation:\n" + opening + "\nValid actions: " + tools.list_actions() +
                          "\nYou have at most " + std::to_string(cfg.horizon) + " moves.";
    AgentRole role = default_role(RoleName::GamePlayer);
    role.max_steps = cfg.horizon + 2;
    auto res = run_agent(role, context, player, tools);
    r.transcript = std::move(res.transcript);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.moves = tools.moves();
  r.winnable = tools.won() ? 1 : 0;
  return r;
}

void to_json(json& j, const GameScores& s) {
  j = json{{"technical",
            {{"init", s.technical.init}, {"possible_actions", s.technical.possible_actions},
             {"runnable", s.technical.runnable}}},
           {"compliance",
            {{"critical_objects", s.compliance.critical_objects},
             {"critical_actions", s.compliance.critical_actions},
             {"distractors", s.compliance.distractors}}},
           {"winnable", s.winnable},
           {"winnable_note", "automatic estimate"},
           {"alignment", s.alignment}};
}

GameScores evaluate_game(GameHandle& game, std::string_view game_source, std::string_view spec_text, Gateway& judge,
                         Gateway& player, const CrawlConfig& cfg) {
  GameScores s;
  auto crawl = crawl_paths(game, cfg);
  s.technical = technical_validity(crawl);
  s.compliance = specification_compliance(game_source, spec_text, judge, cfg.votes);
  if (s.technical.init) {
    s.alignment = physical_alignment(crawl.paths, spec_text, judge, cfg).value;
    s.winnable = winnability(game, player, cfg).winnable;
  }
  return s;
}

// ---- toy game ----

std::string ToyGame::init() {
  if (opt_.raise_on_init) throw EnvError("RuntimeError", "the garden failed to load");
  started_ = true;
  held_ = planted_ = done_ = false;
  score_ = 0;
  return "You are in a small garden. A pea lies on the ground next to an empty pot.";
}

std::vector<std::string> ToyGame::actions() {
  if (!started_) throw EnvError("RuntimeError", "game not initialized");
  if (done_) return {};
  std::vector<std::string> a{"look"};
  if (!held_ && !planted_) a.push_back("take pea");
  if (held_) {
    a.push_back("put pea in pot");
    a.push_back("drop pea");
  }
  a.push_back("pour water in pot");
  return a;
}

GameStep ToyGame::step(const std::string& action) {
  if (!started_) throw EnvError("RuntimeError", "game not initialized");
  if (!opt_.raise_verb.empty() && action_verb(action) == opt_.raise_verb) {
    throw EnvError("AttributeError", "'Pot' object has no attribute 'fill'");
  }
  if (done_) return {"The game is over.", static_cast<double>(score_), true, planted_ && opt_.winnable};
  if (action == "look") {
    std::string s = held_ ? "You hold a pea." : planted_ ? "A pea is planted in the pot." : "A pea lies on the ground.";
    return {s, static_cast<double>(score_), false, false};
  }
  if (action == "take pea" && !held_ && !planted_) {
    held_ = true;
    score_ = 1;
    return {"You pick up the pea.", 1.0, false, false};
  }
  if (action == "drop pea" && held_) {
    held_ = false;
    return {"You drop the pea on the ground.", static_cast<double>(score_), false, false};
  }
  if (action == "put pea in pot" && held_) {
    held_ = false;
    planted_ = true;
    if (opt_.winnable) {
      done_ = true;
      score_ = 2;
      return {"You plant the pea in the pot. You win!", 2.0, true, true};
    }
    return {"You put the pea in the pot. Nothing happens.", static_cast<double>(score_), false, false};
  }
  if (action == "pour water in pot") return {"You water the pot.", static_cast<double>(score_), false, false};
  return {"You can't do that.", static_cast<double>(score_), false, false};
}

}  // namespace a2w
