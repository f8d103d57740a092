#include "a2w/config.hpp"

#include <cstdlib>

namespace a2w {

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path x(p);
  return x.is_absolute() || base.empty() ? x : base / x;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

TaskSpec task_from_config(const json& j, const fs::path& base_dir) {
  TaskSpec t;
  try {
    t = j.get<TaskSpec>();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("task record: ") + e.what());
  }
  auto d = default_budgets(t.representation);
  if (!j.contains("turn_budget")) t.turn_budget = d.refinement_turns;
  if (!j.contains("research_rounds")) t.research_rounds = d.research_rounds;
  if (t.gold_ref) t.gold_ref = resolve(base_dir, *t.gold_ref).string();
  return t;
}

PlannerConfig planner_from_json(const json& j, PlannerConfig p) {
  if (!j.is_object()) return p;
  if (j.contains("kind")) {
    auto k = to_lower(j["kind"].get<std::string>());
    if (k == "mcts") p.kind = PlannerKind::Mcts;
    else if (k == "cem") p.kind = PlannerKind::Cem;
    else throw ConfigError("planner kind must be mcts or cem");
  }
  p.budget = get_or(j, "budget", p.budget);
  p.horizon = get_or(j, "horizon", p.horizon);
  p.exploration = get_or(j, "exploration", p.exploration);
  p.population = get_or(j, "population", p.population);
  p.elite_fraction = get_or(j, "elite_fraction", p.elite_fraction);
  p.iterations = get_or(j, "iterations", p.iterations);
  p.plan_horizon = get_or(j, "plan_horizon", p.plan_horizon);
  p.episodes = get_or(j, "episodes", p.episodes);
  p.seed = get_or(j, "seed", p.seed);
  if (auto v = validate_planner(p); !v.empty()) throw ConfigError("planner: " + v.front());
  return p;
}

CrawlConfig crawl_from_json(const json& j, CrawlConfig c) {
  if (!j.is_object()) return c;
  c.max_depth = get_or(j, "max_depth", c.max_depth);
  c.max_nodes = get_or(j, "max_nodes", c.max_nodes);
  c.per_verb_cap = get_or(j, "per_verb_cap", c.per_verb_cap);
  c.sample_size = get_or(j, "sample_size", c.sample_size);
  c.horizon = get_or(j, "horizon", c.horizon);
  c.votes = get_or(j, "votes", c.votes);
  c.seed = get_or(j, "seed", c.seed);
  if (auto v = validate_crawl(c); !v.empty()) throw ConfigError("crawl: " + v.front());
  return c;
}

AppConfig parse_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  AppConfig c;
  c.base_dir = base_dir;

  c.gateway = HttpGatewayConfig::from_env();
  if (j.contains("gateway")) {
    const auto& g = j["gateway"];
    if (c.gateway.api_base.empty()) c.gateway.api_base = get_or<std::string>(g, "api_base", "");
    if (c.gateway.model.empty()) c.gateway.model = get_or<std::string>(g, "model", "");
    c.gateway.max_attempts = get_or(g, "max_attempts", c.gateway.max_attempts);
    if (g.contains("token_cap") && !g["token_cap"].is_null()) c.token_cap = g["token_cap"].get<std::int64_t>();
  }
  if (j.contains("decoding")) {
    const auto& d = j["decoding"];
    c.decoding.temperature = get_or(d, "temperature", c.decoding.temperature);
    c.decoding.top_p = get_or(d, "top_p", c.decoding.top_p);
    c.decoding.max_output_tokens = get_or(d, "max_output_tokens", c.decoding.max_output_tokens);
  }
  try {
    c.decoding.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("decoding: ") + e.what());
  }

  c.default_denylist = get_or(j, "default_denylist", true);
  if (j.contains("denylist_path")) c.denylist_files.push_back(resolve(base_dir, j["denylist_path"].get<std::string>()));

  if (j.contains("search")) {
    const auto& s = j["search"];
    c.search.backend = get_or<std::string>(s, "backend", "none");
    if (s.contains("fixture_dir")) c.search.fixture_dir = resolve(base_dir, s["fixture_dir"].get<std::string>());
    c.search.api_key_env = get_or<std::string>(s, "api_key_env", c.search.api_key_env);
    if (c.search.backend != "none" && c.search.backend != "fixture" && c.search.backend != "serper") {
      throw ConfigError("search.backend must be none, fixture or serper");
    }
  }
  if (j.contains("fetch")) {
    const auto& f = j["fetch"];
    c.fetch.backend = get_or<std::string>(f, "backend", "none");
    if (f.contains("fixture_dir")) c.fetch.fixture_dir = resolve(base_dir, f["fixture_dir"].get<std::string>());
    c.fetch.timeout_seconds = get_or(f, "timeout_seconds", c.fetch.timeout_seconds);
    if (c.fetch.backend != "none" && c.fetch.backend != "fixture" && c.fetch.backend != "network") {
      throw ConfigError("fetch.backend must be none, fixture or network");
    }
  }
  if (j.contains("harness_command")) {
    c.harness_command = get_or(j, "harness_command", c.harness_command);
    if (c.harness_command.empty()) throw ConfigError("harness_command must not be empty");
    // A relative program path with a slash is relative to the config file.
    auto& prog = c.harness_command.front();
    if (prog.find('/') != std::string::npos) prog = resolve(base_dir, prog).string();
  }
  if (j.contains("sandbox")) {
    const auto& s = j["sandbox"];
    c.sandbox.wall_clock_timeout_seconds = get_or(s, "timeout_seconds", c.sandbox.wall_clock_timeout_seconds);
    c.sandbox.max_stdout_bytes = get_or(s, "max_stdout_bytes", c.sandbox.max_stdout_bytes);
    auto net = get_or<std::string>(s, "network", "denied");
    if (net != "denied" && net != "allowed") throw ConfigError("sandbox.network must be denied or allowed");
    c.sandbox.network = net == "allowed" ? NetworkPolicy::Allowed : NetworkPolicy::Denied;
    if (c.sandbox.wall_clock_timeout_seconds <= 0 || c.sandbox.max_stdout_bytes == 0) {
      throw ConfigError("sandbox limits must be positive");
    }
  }
  if (j.contains("play")) {
    const auto& p = j["play"];
    c.play.session_budget = get_or(p, "session_budget", c.play.session_budget);
    c.play.session_timeout_seconds = get_or(p, "session_timeout_seconds", c.play.session_timeout_seconds);
    c.play.request_timeout_seconds = get_or(p, "request_timeout_seconds", c.play.request_timeout_seconds);
    c.play.seed = get_or(p, "seed", c.play.seed);
    if (c.play.session_budget < 0) throw ConfigError("play.session_budget must be non-negative");
  }

  if (j.contains("tasks")) {
    for (const auto& t : j["tasks"]) c.tasks.push_back(task_from_config(t, base_dir));
  }
  if (j.contains("tasks_file")) {
    auto path = resolve(base_dir, j["tasks_file"].get<std::string>());
    std::vector<json> lines;
    try {
      lines = read_jsonl(path);
    } catch (const std::exception& e) {
      throw ConfigError("tasks_file: " + std::string(e.what()));
    }
    for (const auto& t : lines) c.tasks.push_back(task_from_config(t, path.parent_path()));
  }
  for (const auto& t : c.tasks) {
    if (auto v = validate_task(t); !v.empty()) throw ConfigError("task " + t.task_id + ": " + v.front());
  }

  if (j.contains("runs_root")) c.runs_root = resolve(base_dir, j["runs_root"].get<std::string>());
  c.max_steps = get_or(j, "max_steps", c.max_steps);
  c.parallel = get_or(j, "parallel", c.parallel);
  if (c.max_steps < 1 || c.parallel < 1) throw ConfigError("max_steps and parallel must be positive");
  if (j.contains("planner")) c.planner = planner_from_json(j["planner"]);
  if (j.contains("crawl")) c.crawl = crawl_from_json(j["crawl"]);
  if (j.contains("frozen_clock")) {
    try {
      c.frozen_clock = parse_iso8601(j["frozen_clock"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("frozen_clock: ") + e.what());
    }
  }
  return c;
}

AppConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  try {
    return parse_config(j, fs::absolute(path).parent_path());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::shared_ptr<ToolbeltContext> make_toolbelt_context(const AppConfig& cfg, std::shared_ptr<HttpTransport> fetch_override) {
  auto ctx = std::make_shared<ToolbeltContext>();
  ctx->denylist = cfg.default_denylist ? Denylist::defaults() : Denylist();
  for (const auto& f : cfg.denylist_files) {
    try {
      for (const auto& p : Denylist::load(f).patterns()) ctx->denylist.add(p.host + p.path_prefix);
    } catch (const std::exception& e) {
      throw ConfigError("denylist " + f.string() + ": " + e.what());
    }
  }
  std::shared_ptr<HttpTransport> net;
  if (cfg.search.backend == "fixture") {
    ctx->search = std::make_shared<FixtureSearchBackend>(cfg.search.fixture_dir);
  } else if (cfg.search.backend == "serper") {
    const char* key = std::getenv(cfg.search.api_key_env.c_str());
    if (!key || !*key) throw ConfigError("search backend serper needs $" + cfg.search.api_key_env);
    net = make_network_transport(cfg.fetch.timeout_seconds);
    ctx->search = std::make_shared<SerperSearchBackend>(net, key);
  }
  if (fetch_override) {
    ctx->fetch = std::move(fetch_override);
  } else if (cfg.fetch.backend == "fixture") {
    ctx->fetch = std::make_shared<FixtureTransport>(cfg.fetch.fixture_dir);
  } else if (cfg.fetch.backend == "network") {
    ctx->fetch = net ? net : make_network_transport(cfg.fetch.timeout_seconds);
  }
  ctx->harness_command = cfg.harness_command;
  ctx->sandbox = cfg.sandbox;
  ctx->play = cfg.play;
  return ctx;
}

PipelineOptions make_pipeline_options(const AppConfig& cfg) {
  PipelineOptions o;
  o.runs_root = cfg.runs_root;
  o.clock = cfg.frozen_clock ? Clock::frozen(*cfg.frozen_clock) : Clock::system();
  o.decoding = cfg.decoding;
  o.max_steps = cfg.max_steps;
  return o;
}

}  // namespace a2w
