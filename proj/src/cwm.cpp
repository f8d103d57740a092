#include "a2w/cwm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace a2w {

namespace {

State as_vector(const json& v) {
  if (v.is_array()) return v.get<State>();
  return State{v.get<double>()};
}

int discrete_index(const Action& a, int n) {
  if (a.size() != 1) throw EnvError("ValueError", "expected a single discrete action, got length " + std::to_string(a.size()));
  double x = a[0];
  if (x != std::floor(x) || x < 0 || x >= n) throw EnvError("ValueError", "action out of range: " + std::to_string(x));
  return static_cast<int>(x);
}

}  // namespace

void to_json(json& j, const Transition& t) {
  j = json{{"s", t.s}, {"a", t.a}, {"r", t.r}, {"s_next", t.s_next}, {"done", t.done}};
}

void from_json(const json& j, Transition& t) {
  t.s = as_vector(j.at("s"));
  t.a = as_vector(j.at("a"));
  t.r = j.at("r").get<double>();
  t.s_next = as_vector(j.at("s_next"));
  t.done = j.at("done").get<bool>();
}

std::vector<Transition> read_transitions(const fs::path& path) {
  std::vector<Transition> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back(j.get<Transition>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad transition: ") + e.what(), line);
    }
  }
  return out;
}

void write_transitions(const fs::path& path, const std::vector<Transition>& data) {
  std::vector<json> lines(data.begin(), data.end());
  write_jsonl(path, lines);
}

Action sample_action(const Space& space, Rng& rng) {
  if (space.kind == Space::Kind::Discrete) {
    std::uniform_int_distribution<int> d(0, space.n - 1);
    return Action{static_cast<double>(d(rng))};
  }
  Action a(space.low.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::uniform_real_distribution<double> d(space.low[i], space.high[i]);
    a[i] = d(rng);
  }
  return a;
}

std::vector<Transition> generate_transitions(EnvHandle& env, std::size_t count, std::uint64_t seed, int horizon) {
  if (horizon < 1) throw PreconditionError("horizon must be >= 1");
  const auto space = env.spaces();
  Rng rng(mix_seed(seed, 0x5eed));
  std::vector<Transition> out;
  std::uint64_t episode = 0;
  State s = env.reset(mix_seed(seed, episode));
  int t = 0;
  while (out.size() < count) {
    Action a = sample_action(space.action, rng);
    auto r = env.step(a);
    out.push_back({s, a, r.reward, r.next, r.done});
    s = r.next;
    if (r.done || ++t >= horizon) {
      s = env.reset(mix_seed(seed, ++episode));
      t = 0;
    }
  }
  return out;
}

bool states_match(const Space& obs, const State& a, const State& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (obs.kind == Space::Kind::Discrete) {
      if (a[i] != b[i]) return false;
    } else if (!(std::abs(a[i] - b[i]) <= tol)) {
      return false;
    }
  }
  return true;
}

AccuracyResult prediction_accuracy(EnvHandle& model, const std::vector<Transition>& data, double tol) {
  if (data.empty()) throw PreconditionError("empty transition dataset");
  if (tol < 0) throw PreconditionError("tolerance must be >= 0");
  AccuracyResult res;
  res.transitions = data.size();
  Space obs;
  try {
    obs = model.spaces().observation;
  } catch (const std::exception&) {
    obs = Space::box({}, {});
  }
  // Integer count of matched parts keeps 2/3 and 11/12 exact.
  std::size_t matched = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& t = data[i];
    try {
      model.set_state(t.s);
      auto r = model.step(t.a);
      matched += states_match(obs, r.next, t.s_next, tol);
      matched += std::abs(r.reward - t.r) <= tol;
      matched += r.done == t.done;
    } catch (const std::exception& e) {
      ++res.model_errors;
      res.error_log.push_back("transition " + std::to_string(i) + ": " + e.what());
    }
  }
  res.accuracy = static_cast<double>(matched) / (3.0 * static_cast<double>(data.size()));
  return res;
}

Policy random_policy(const Space& action_space) {
  return [action_space](EnvHandle&, const State&, int, Rng& rng) { return sample_action(action_space, rng); };
}

RolloutResult rollout_return(EnvHandle& env, const Policy& policy, int episodes, int horizon, std::uint64_t seed) {
  if (episodes < 1) throw PreconditionError("episodes must be >= 1");
  if (horizon < 1) throw PreconditionError("horizon must be >= 1");
  RolloutResult res;
  for (int i = 0; i < episodes; ++i) {
    const auto ep_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    res.seeds.push_back(ep_seed);
    Rng rng(mix_seed(ep_seed, 1));
    double total = 0.0;
    try {
      State s = env.reset(ep_seed);
      for (int t = 0; t < horizon; ++t) {
        Action a = policy(env, s, t, rng);
        auto r = env.step(a);
        total += r.reward;
        s = std::move(r.next);
        if (r.done) break;
      }
    } catch (const std::exception&) {
      ++res.aborted;
    }
    res.returns.push_back(total);
  }
  res.mean_return = std::accumulate(res.returns.begin(), res.returns.end(), 0.0) / episodes;
  return res;
}

std::vector<std::string> validate_planner(const PlannerConfig& c) {
  std::vector<std::string> v;
  if (c.budget < 1) v.emplace_back("budget must be >= 1");
  if (c.horizon < 1) v.emplace_back("horizon must be >= 1");
  if (c.plan_horizon < 1) v.emplace_back("plan_horizon must be >= 1");
  if (!(c.elite_fraction > 0 && c.elite_fraction <= 1)) v.emplace_back("elite_fraction must be in (0,1]");
  if (c.population < 1) v.emplace_back("population must be >= 1");
  if (c.iterations < 1) v.emplace_back("iterations must be >= 1");
  if (c.episodes < 1) v.emplace_back("episodes must be >= 1");
  if (c.exploration < 0) v.emplace_back("exploration must be >= 0");
  return v;
}

// ---- MCTS ----

namespace {

struct Node {
  explicit Node(int n) : kids(n), visits(n, 0), value(n, 0.0) {}
  std::vector<std::unique_ptr<Node>> kids;
  std::vector<int> visits;
  std::vector<double> value;  // summed return-to-go through each edge
  int total = 0;
  int expanded = 0;
};

// Sibling values are min-max normalized, which makes selection independent
// of the reward scale.
int uct_select(const Node& node, double c) {
  const int n = static_cast<int>(node.visits.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int a = 0; a < n; ++a) {
    double q = node.value[a] / node.visits[a];
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  const double log_total = std::log(static_cast<double>(node.total));
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    double q = node.value[a] / node.visits[a];
    double qn = hi > lo ? (q - lo) / (hi - lo) : 0.0;
    double score = qn + c * std::sqrt(log_total / node.visits[a]);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

}  // namespace

Action mcts_plan(EnvHandle& model, const State& state, const PlannerConfig& cfg, Rng& rng, int depth_left) {
  const auto space = model.spaces().action;
  if (space.kind != Space::Kind::Discrete) throw PreconditionError("mcts_plan needs a discrete action space");
  const int n_actions = space.n;
  depth_left = std::max(depth_left, 1);
  std::uniform_int_distribution<int> pick(0, n_actions - 1);

  Node root(n_actions);
  std::vector<std::pair<Node*, int>> path;
  std::vector<double> rewards;
  for (int sim = 0; sim < cfg.budget; ++sim) {
    path.clear();
    rewards.clear();
    bool done = false;
    try {
      model.set_state(state);
    } catch (const std::exception&) {
      continue;
    }
    auto advance = [&](int a) {
      try {
        auto r = model.step(Action{static_cast<double>(a)});
        rewards.push_back(r.reward);
        done = r.done;
      } catch (const std::exception&) {
        // Pruned: the branch keeps the rewards collected so far.
        rewards.push_back(0.0);
        done = true;
      }
    };

    Node* node = &root;
    int depth = 0;
    while (!done && depth < depth_left) {
      if (node->expanded < n_actions) {
        int a = node->expanded++;
        node->kids[a] = std::make_unique<Node>(n_actions);
        path.emplace_back(node, a);
        advance(a);
        ++depth;
        break;
      }
      int a = uct_select(*node, cfg.exploration);
      path.emplace_back(node, a);
      advance(a);
      ++depth;
      node = node->kids[a].get();
    }
    while (!done && depth < depth_left) {
      advance(pick(rng));
      ++depth;
    }

    double to_go = std::accumulate(rewards.begin() + static_cast<std::ptrdiff_t>(path.size()), rewards.end(), 0.0);
    for (std::size_t k = path.size(); k-- > 0;) {
      to_go += rewards[k];
      auto [nd, a] = path[k];
      nd->visits[a] += 1;
      nd->value[a] += to_go;
      nd->total += 1;
    }
  }

  int best = 0;
  for (int a = 1; a < n_actions; ++a) {
    if (root.visits[a] > root.visits[best]) best = a;
  }
  return Action{static_cast<double>(best)};
}

Action mcts_plan(EnvHandle& model, const State& state, const PlannerConfig& cfg) {
  Rng rng(cfg.seed);
  return mcts_plan(model, state, cfg, rng, cfg.horizon);
}

// ---- CEM ----

Action cem_plan(EnvHandle& model, const State& state, const PlannerConfig& cfg, Rng& rng) {
  const auto space = model.spaces().action;
  if (space.kind != Space::Kind::Box) throw PreconditionError("cem_plan needs a box action space");
  const std::size_t dims = space.low.size();
  const std::size_t h = static_cast<std::size_t>(std::max(cfg.plan_horizon, 1));
  const std::size_t len = dims * h;

  auto tile = [&](const std::vector<double>& given, auto fallback) {
    std::vector<double> out(len);
    for (std::size_t i = 0; i < len; ++i) {
      std::size_t d = i % dims;
      if (given.size() == len) out[i] = given[i];
      else if (given.size() == dims) out[i] = given[d];
      else out[i] = fallback(d);
    }
    return out;
  };
  auto mean = tile(cfg.init_mean, [&](std::size_t d) { return (space.low[d] + space.high[d]) / 2; });
  auto stdev = tile(cfg.init_std, [&](std::size_t d) { return (space.high[d] - space.low[d]) / 2; });

  const int pop = std::max(cfg.population, 1);
  const int n_elite = std::clamp(static_cast<int>(std::ceil(cfg.elite_fraction * pop)), 1, pop);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> samples(pop, std::vector<double>(len));
  std::vector<double> returns(pop);
  std::vector<int> order(pop);

  auto evaluate = [&](const std::vector<double>& seq) {
    double total = 0.0;
    try {
      model.set_state(state);
      for (std::size_t t = 0; t < h; ++t) {
        Action a(seq.begin() + static_cast<std::ptrdiff_t>(t * dims),
                 seq.begin() + static_cast<std::ptrdiff_t>((t + 1) * dims));
        auto r = model.step(a);
        total += r.reward;
        if (r.done) break;
      }
    } catch (const std::exception&) {
    }
    return total;
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    for (int p = 0; p < pop; ++p) {
      for (std::size_t i = 0; i < len; ++i) {
        std::size_t d = i % dims;
        samples[p][i] = std::clamp(mean[i] + stdev[i] * gauss(rng), space.low[d], space.high[d]);
      }
      returns[p] = evaluate(samples[p]);
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return returns[a] > returns[b]; });
    for (std::size_t i = 0; i < len; ++i) {
      double m = 0.0;
      for (int e = 0; e < n_elite; ++e) m += samples[order[e]][i];
      m /= n_elite;
      double var = 0.0;
      for (int e = 0; e < n_elite; ++e) var += (samples[order[e]][i] - m) * (samples[order[e]][i] - m);
      mean[i] = m;
      stdev[i] = std::sqrt(var / n_elite);
    }
  }
  Action out(dims);
  for (std::size_t d = 0; d < dims; ++d) out[d] = std::clamp(mean[d], space.low[d], space.high[d]);
  return out;
}

Action cem_plan(EnvHandle& model, const State& state, const PlannerConfig& cfg) {
  Rng rng(cfg.seed);
  return cem_plan(model, state, cfg, rng);
}

Policy planner_policy(EnvHandle& model, const PlannerConfig& cfg) {
  return [&model, cfg](EnvHandle&, const State& s, int t, Rng& rng) {
    if (cfg.kind == PlannerKind::Mcts) return mcts_plan(model, s, cfg, rng, cfg.horizon - t);
    return cem_plan(model, s, cfg, rng);
  };
}

void to_json(json& j, const NormalizedReturn& n) {
  j = json{{"normalized_return", n.degenerate ? json(nullptr) : json(n.value)},
           {"degenerate", n.degenerate},
           {"r_model", n.r_model},
           {"r_true", n.r_true},
           {"r_rand", n.r_rand},
           {"episodes", n.episodes},
           {"seeds", n.seeds}};
}

NormalizedReturn normalized_return(const EnvHandle& model, const EnvHandle& true_env, const PlannerConfig& cfg) {
  if (auto v = validate_planner(cfg); !v.empty()) throw PreconditionError(v.front());
  const auto space = true_env.spaces().action;
  const bool discrete = space.kind == Space::Kind::Discrete;
  if (discrete != (cfg.kind == PlannerKind::Mcts)) {
    throw PreconditionError("planner kind does not match the action space");
  }
  NormalizedReturn out;
  out.episodes = cfg.episodes;

  auto plan_model = model.clone();
  auto act_env = true_env.clone();
  auto m = rollout_return(*act_env, planner_policy(*plan_model, cfg), cfg.episodes, cfg.horizon, cfg.seed);

  auto plan_true = true_env.clone();
  auto act_true = true_env.clone();
  auto t = rollout_return(*act_true, planner_policy(*plan_true, cfg), cfg.episodes, cfg.horizon, cfg.seed);

  auto act_rand = true_env.clone();
  auto r = rollout_return(*act_rand, random_policy(space), cfg.episodes, cfg.horizon, cfg.seed);

  out.r_model = m.mean_return;
  out.r_true = t.mean_return;
  out.r_rand = r.mean_return;
  out.seeds = r.seeds;
  const double denom = out.r_true - out.r_rand;
  if (std::abs(denom) < kDegenerateEpsilon) {
    out.degenerate = true;
    out.value = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.value = (out.r_model - out.r_rand) / denom;
  }
  return out;
}

// ---- native environments ----

EnvSpace CliffWalkingEnv::spaces() const {
  return EnvSpace{Space::discrete(4), Space::discrete(kRows * kCols), std::nullopt, std::nullopt};
}

State CliffWalkingEnv::reset(std::uint64_t) {
  pos_ = kStart;
  return State{static_cast<double>(pos_)};
}

void CliffWalkingEnv::set_state(const State& s) {
  if (s.size() != 1) throw EnvError("ValueError", "state must have length 1, got " + std::to_string(s.size()));
  double x = s[0];
  if (x != std::floor(x) || x < 0 || x >= kRows * kCols) {
    throw EnvError("ValueError", "state out of range: " + std::to_string(x));
  }
  pos_ = static_cast<int>(x);
}

StepResult CliffWalkingEnv::step(const Action& a) {
  int act = discrete_index(a, 4);
  int row = pos_ / kCols, col = pos_ % kCols;
  switch (act) {
    case 0: row = std::max(row - 1, 0); break;
    case 1: col = std::min(col + 1, kCols - 1); break;
    case 2: row = std::min(row + 1, kRows - 1); break;
    case 3: col = std::max(col - 1, 0); break;
  }
  int next = row * kCols + col;
  if (is_cliff(next)) {
    pos_ = kStart;
    return {State{static_cast<double>(pos_)}, -100.0, false};
  }
  pos_ = next;
  return {State{static_cast<double>(pos_)}, -1.0, pos_ == kGoal};
}

std::unique_ptr<EnvHandle> reference_env(std::string_view name) {
  auto n = to_lower(name);
  if (n == "cliffwalking" || n == "cliffwalking-v0" || n == "cliffwalking-v1") return std::make_unique<CliffWalkingEnv>();
  throw UnknownEnv("no native reference environment named '" + std::string(name) + "'");
}

RewardTransformEnv::RewardTransformEnv(std::unique_ptr<EnvHandle> inner, double scale, double shift)
    : inner_(std::move(inner)), scale_(scale), shift_(shift) {}

StepResult RewardTransformEnv::step(const Action& a) {
  auto r = inner_->step(a);
  r.reward = scale_ * r.reward + shift_;
  return r;
}

std::unique_ptr<EnvHandle> RewardTransformEnv::clone() const {
  return std::make_unique<RewardTransformEnv>(inner_->clone(), scale_, shift_);
}

AbsorbingEnv::AbsorbingEnv(std::unique_ptr<EnvHandle> inner) : inner_(std::move(inner)) {}

State AbsorbingEnv::reset(std::uint64_t seed) {
  absorbed_ = false;
  last_ = inner_->reset(seed);
  return last_;
}

void AbsorbingEnv::set_state(const State& s) {
  inner_->set_state(s);
  absorbed_ = false;
  last_ = s;
}

StepResult AbsorbingEnv::step(const Action& a) {
  if (absorbed_) return {last_, 0.0, false};
  auto r = inner_->step(a);
  last_ = r.next;
  absorbed_ = r.done;
  r.done = false;
  return r;
}

std::unique_ptr<EnvHandle> AbsorbingEnv::clone() const {
  auto c = std::make_unique<AbsorbingEnv>(inner_->clone());
  c->last_ = last_;
  c->absorbed_ = absorbed_;
  return c;
}

GarbageEnv::GarbageEnv(EnvSpace spaces, std::uint64_t seed, double reward_low, double done_prob)
    : spaces_(std::move(spaces)), rng_(seed), reward_low_(reward_low), done_prob_(done_prob) {}

State GarbageEnv::reset(std::uint64_t) { return sample_action(spaces_.observation, rng_); }

StepResult GarbageEnv::step(const Action&) {
  std::uniform_real_distribution<double> rew(reward_low_, 0.0);
  std::bernoulli_distribution done(done_prob_);
  StepResult r;
  r.next = sample_action(spaces_.observation, rng_);
  r.reward = rew(rng_);
  r.done = done(rng_);
  return r;
}

}  // namespace a2w
