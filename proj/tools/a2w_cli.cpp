// a2w: pipeline runs, metric evaluation, SFT export and reports.
// Exit codes: 0 success, 2 configuration / usage error, 3 infrastructure fault.

#include <CLI11.hpp>

#include <iostream>

#include "a2w/config.hpp"
#include "a2w/cwm.hpp"
#include "a2w/data_engine.hpp"
#include "a2w/harness.hpp"
#include "a2w/pddl.hpp"
#include "a2w/pipeline.hpp"
#include "a2w/textgame.hpp"

using namespace a2w;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInfra = 3;

class UsageError : public Error {
 public:
  using Error::Error;
};

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file_atomic(p, j.dump(2) + "\n");
}

std::string need_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
  return read_file(path);
}

std::shared_ptr<Gateway> make_gateway(const std::string& script, const AppConfig* cfg) {
  if (!script.empty()) {
    if (!fs::exists(script)) throw UsageError("gateway script not found: " + script);
    return load_script(script);
  }
  HttpGatewayConfig g = cfg ? cfg->gateway : HttpGatewayConfig::from_env();
  if (g.api_base.empty()) throw UsageError("no gateway configured: set A2W_API_BASE or pass a script");
  auto gw = std::make_shared<HttpGateway>(g, make_network_transport());
  if (cfg && cfg->token_cap) gw->set_token_cap(cfg->token_cap);
  return gw;
}

// ---- pipeline ----

struct PipelineArgs {
  std::string config, task = "all", mock, out;
  std::optional<int> turns, research;
  int parallel = 0;
};

int cmd_pipeline(const PipelineArgs& a) {
  AppConfig cfg = load_config(a.config);
  std::vector<TaskSpec> tasks;
  for (const auto& t : cfg.tasks) {
    if (a.task == "all" || t.task_id == a.task) tasks.push_back(t);
  }
  if (tasks.empty()) throw UsageError("no task matches '" + a.task + "'");
  if (a.turns && *a.turns < 1) throw UsageError("--turns must be positive");
  if (a.research && *a.research < 0) throw UsageError("--research-rounds must be non-negative");

  auto gateway = make_gateway(a.mock, &cfg);
  auto tools = make_toolbelt_context(cfg);
  auto opts = make_pipeline_options(cfg);
  if (!a.out.empty()) opts.runs_root = a.out;
  opts.turns_override = a.turns;
  opts.research_override = a.research;

  auto outcome = run_batch(tasks, [&](const TaskSpec&) -> Gateway& { return *gateway; }, tools, opts,
                           a.parallel > 0 ? a.parallel : cfg.parallel);
  json summary = json::array();
  for (const auto& r : outcome.runs) {
    summary.push_back({{"task_id", r.task_id},
                       {"turns", r.turns.size()},
                       {"converged", r.converged},
                       {"verifier", r.trajectory.verifier},
                       {"run_dir", (opts.runs_root / r.task_id).string()}});
  }
  json doc{{"runs", summary}, {"faults", outcome.faults}};
  std::cout << doc.dump(2) << "\n";
  return outcome.faults.empty() ? 0 : kExitInfra;
}

// ---- eval ----

int cmd_eval_pddl(const std::vector<std::string>& files, const std::string& out) {
  if (files.size() < 2 || files.size() % 2) throw UsageError("eval pddl takes pairs: GENERATED GOLD [GENERATED GOLD ...]");
  json instances = json::array();
  double sum_exec = 0, sum_sim = 0, sum_f1 = 0;
  int f1_count = 0;
  for (std::size_t i = 0; i < files.size(); i += 2) {
    auto gen = need_file(files[i], "generated domain");
    auto gold = need_file(files[i + 1], "gold domain");
    json rec{{"generated", files[i]}, {"gold", files[i + 1]}};
    auto err = check_domain(gen);
    rec["executability"] = err ? 0 : 1;
    rec["similarity"] = similarity(gen, gold);
    if (err) {
      rec["error_class"] = to_string(err->error_class());
      rec["error"] = err->what();
    }
    sum_exec += err ? 0 : 1;
    sum_sim += rec["similarity"].get<double>();
    if (!err) {
      try {
        auto f = component_f1(parse_domain(gen), parse_domain(gold));
        json fj = f;
        rec.update(fj);
        sum_f1 += f.f1_avg;
        ++f1_count;
      } catch (const PddlError& e) {
        rec["gold_error"] = e.what();
      }
    }
    instances.push_back(rec);
  }
  const double n = static_cast<double>(instances.size());
  json agg{{"executability", sum_exec / n}, {"similarity", sum_sim / n},
           {"f1_avg", f1_count ? json(sum_f1 / n) : json()}, {"instances", instances.size()}};
  emit({{"instances", instances}, {"aggregate", agg}}, out);
  return 0;
}

struct CwmArgs {
  std::string env = "CliffWalking", model = "reference", data, config, out;
  std::vector<std::string> harness;
  int budget = 200, episodes = 10, horizon = 100, transitions = 1000;
  std::uint64_t seed = 0;
  std::string planner = "mcts";
};

int cmd_eval_cwm(const CwmArgs& a) {
  std::unique_ptr<EnvHandle> truth;
  try {
    truth = reference_env(a.env);
  } catch (const UnknownEnv& e) {
    throw UsageError(e.what());
  }
  std::unique_ptr<EnvHandle> model;
  if (a.model == "reference") {
    model = truth->clone();
  } else if (a.model == "garbage") {
    model = std::make_unique<GarbageEnv>(truth->spaces(), a.seed);
  } else {
    if (!fs::is_regular_file(a.model)) throw UsageError("model artifact not found: " + a.model);
    std::vector<std::string> cmd = a.harness;
    if (cmd.empty() && !a.config.empty()) cmd = load_config(a.config).harness_command;
    if (cmd.empty()) throw UsageError("serving an artifact needs --harness or --config");
    model = std::make_unique<RemoteEnv>(cmd, fs::absolute(a.model));
  }

  std::vector<Transition> data;
  if (!a.data.empty()) {
    if (!fs::is_regular_file(a.data)) throw UsageError("transition file not found: " + a.data);
    data = read_transitions(a.data);
  } else {
    data = generate_transitions(*truth, static_cast<std::size_t>(a.transitions), a.seed);
  }
  auto acc = prediction_accuracy(*model, data);

  PlannerConfig p;
  p.kind = to_lower(a.planner) == "cem" ? PlannerKind::Cem : PlannerKind::Mcts;
  p.budget = a.budget;
  p.episodes = a.episodes;
  p.horizon = a.horizon;
  p.seed = a.seed;
  if (auto v = validate_planner(p); !v.empty()) throw UsageError(v.front());
  auto nr = normalized_return(*model, *truth, p);
  json rec{{"env", a.env},
           {"model", a.model},
           {"accuracy", acc.accuracy},
           {"transitions", acc.transitions},
           {"model_errors", acc.model_errors},
           {"normalized_return", nr.degenerate ? json() : json(nr.value)},
           {"degenerate", nr.degenerate},
           {"r_model", nr.r_model},
           {"r_true", nr.r_true},
           {"r_rand", nr.r_rand},
           {"episodes", nr.episodes},
           {"seeds", nr.seeds}};
  emit(rec, a.out);
  return 0;
}

struct GameArgs {
  std::string game = "toy", spec, source, judge, player, config, out;
  std::vector<std::string> harness;
};

int cmd_eval_textgame(const GameArgs& a) {
  std::unique_ptr<GameHandle> game;
  std::string source;
  if (a.game.rfind("toy", 0) == 0) {
    ToyGame::Options o;
    if (a.game == "toy:raise-init") o.raise_on_init = true;
    else if (a.game.rfind("toy:raise=", 0) == 0) o.raise_verb = a.game.substr(10);
    else if (a.game == "toy:unwinnable") o.winnable = false;
    else if (a.game != "toy") throw UsageError("unknown built-in game " + a.game);
    game = std::make_unique<ToyGame>(o);
    source = a.source.empty() ? "" : need_file(a.source, "game source");
  } else {
    source = need_file(a.game, "game artifact");
    std::vector<std::string> cmd = a.harness;
    if (cmd.empty() && !a.config.empty()) cmd = load_config(a.config).harness_command;
    if (cmd.empty()) throw UsageError("serving an artifact needs --harness or --config");
    game = std::make_unique<RemoteGame>(cmd, fs::absolute(a.game));
  }
  std::string spec = a.spec.empty() ? "" : need_file(a.spec, "specification");
  AppConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  auto judge = make_gateway(a.judge, a.config.empty() ? nullptr : &cfg);
  auto player = a.player.empty() ? judge : make_gateway(a.player, a.config.empty() ? nullptr : &cfg);
  auto scores = evaluate_game(*game, source, spec, *judge, *player, cfg.crawl);
  emit(scores, a.out);
  return 0;
}

// ---- reports ----

std::map<std::string, double> read_scores(const std::string& path) {
  auto text = need_file(path, "score file");
  auto j = json::parse(text, nullptr, false);
  std::map<std::string, double> out;
  if (j.is_object()) {
    for (auto& [k, v] : j.items()) out[k] = v.get<double>();
    return out;
  }
  // JSON lines of {"id": ..., "score": ...}
  for (const auto& rec : read_jsonl(path)) out[rec.at("id").get<std::string>()] = rec.at("score").get<double>();
  return out;
}

std::vector<RunRecord> load_runs(const std::string& root) {
  if (!fs::is_directory(root)) throw UsageError("runs directory not found: " + root);
  std::vector<RunRecord> runs;
  for (const auto& d : discover_run_dirs(root)) runs.push_back(load_run_record(d));
  return runs;
}

void write_csv(const std::string& path, const std::string& csv) {
  if (path.empty()) return;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file_atomic(p, csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate, test and evaluate symbolic world models."};
  app.require_subcommand(1);

  PipelineArgs pa;
  auto* pipeline = app.add_subcommand("pipeline", "Run the generate/test/refine loop for configured tasks.");
  pipeline->add_option("--config", pa.config, "JSON config file")->required();
  pipeline->add_option("--task", pa.task, "task id or 'all'");
  pipeline->add_option("--turns", pa.turns, "refinement turns (overrides the task budget)");
  pipeline->add_option("--research-rounds", pa.research, "research rounds (overrides the task setting)");
  pipeline->add_option("--mock-gateway", pa.mock, "scripted gateway (JSON lines)");
  pipeline->add_option("--out", pa.out, "runs directory");
  pipeline->add_option("--parallel", pa.parallel, "concurrent tasks");

  auto* eval = app.add_subcommand("eval", "Compute metrics.");
  eval->require_subcommand(1);
  std::vector<std::string> pddl_files;
  std::string pddl_out;
  auto* eval_pddl = eval->add_subcommand("pddl", "Executability, similarity and component F1.");
  eval_pddl->add_option("files", pddl_files, "GENERATED GOLD pairs")->required();
  eval_pddl->add_option("--out", pddl_out);

  CwmArgs ca;
  auto* eval_cwm = eval->add_subcommand("cwm", "Prediction accuracy and normalized return.");
  eval_cwm->add_option("--env", ca.env, "reference environment");
  eval_cwm->add_option("--model", ca.model, "reference | garbage | path to an artifact");
  eval_cwm->add_option("--data", ca.data, "transitions (JSON lines); generated when absent");
  eval_cwm->add_option("--transitions", ca.transitions, "size of the generated dataset");
  eval_cwm->add_option("--planner", ca.planner, "mcts | cem");
  eval_cwm->add_option("--budget", ca.budget);
  eval_cwm->add_option("--episodes", ca.episodes);
  eval_cwm->add_option("--horizon", ca.horizon);
  eval_cwm->add_option("--seed", ca.seed);
  eval_cwm->add_option("--harness", ca.harness, "harness argv ({artifact} is substituted)");
  eval_cwm->add_option("--config", ca.config);
  eval_cwm->add_option("--out", ca.out);

  GameArgs ga;
  auto* eval_game = eval->add_subcommand("textgame", "Technical validity, compliance, alignment, winnability.");
  eval_game->add_option("--game", ga.game, "toy[:raise-init|:raise=VERB|:unwinnable] or a game artifact");
  eval_game->add_option("--spec", ga.spec, "specification text file");
  eval_game->add_option("--source", ga.source, "game source for the compliance judge (built-in games)");
  eval_game->add_option("--judge-script", ga.judge, "scripted judge gateway");
  eval_game->add_option("--player-script", ga.player, "scripted player gateway");
  eval_game->add_option("--harness", ga.harness);
  eval_game->add_option("--config", ga.config);
  eval_game->add_option("--out", ga.out);

  std::string export_runs, export_out;
  auto* exp = app.add_subcommand("export-sft", "Export accepted trajectories as SFT records.");
  exp->add_option("--runs", export_runs)->required();
  exp->add_option("--out", export_out)->required();

  auto* report = app.add_subcommand("report", "Analysis reports.");
  report->require_subcommand(1);
  std::string wa, wb, wmetric, wout, wcsv;
  double weps = 0.0;
  auto* wtl = report->add_subcommand("wtl", "Win / tie / loss of A against B.");
  wtl->add_option("--a", wa)->required();
  wtl->add_option("--b", wb)->required();
  wtl->add_option("--eps", weps);
  wtl->add_option("--metric", wmetric);
  wtl->add_option("--out", wout);
  wtl->add_option("--csv", wcsv);

  std::string eruns, eout, ecsv;
  auto* errs = report->add_subcommand("errors", "Failure taxonomy over run directories.");
  errs->add_option("--runs", eruns)->required();
  errs->add_option("--out", eout);
  errs->add_option("--csv", ecsv);

  std::string cgold, cret, cout_path;
  int cn = 10;
  auto* cont = report->add_subcommand("contamination", "Shared n-gram check.");
  cont->add_option("--gold", cgold)->required();
  cont->add_option("--retrieved", cret)->required();
  cont->add_option("--n", cn);
  cont->add_option("--out", cout_path);

  std::string uruns, uout, ucsv;
  auto* usage = report->add_subcommand("usage", "Token and time usage per stage.");
  usage->add_option("--runs", uruns)->required();
  usage->add_option("--out", uout);
  usage->add_option("--csv", ucsv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*pipeline) return cmd_pipeline(pa);
    if (*eval_pddl) return cmd_eval_pddl(pddl_files, pddl_out);
    if (*eval_cwm) return cmd_eval_cwm(ca);
    if (*eval_game) return cmd_eval_textgame(ga);
    if (*exp) {
      if (!fs::is_directory(export_runs)) throw UsageError("runs directory not found: " + export_runs);
      auto r = export_sft(discover_run_dirs(export_runs), export_out);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << json{{"exported", r.exported}, {"rejected", r.rejected}, {"corrupt", r.corrupt}}.dump() << "\n";
      return 0;
    }
    if (*wtl) {
      auto w = pairwise_wtl(read_scores(wa), read_scores(wb), weps, wmetric);
      emit(w, wout);
      write_csv(wcsv, wtl_csv({w}));
      return 0;
    }
    if (*errs) {
      auto failures = collect_failures(load_runs(eruns));
      json j = taxonomy_report(failures);
      j["instances"] = failures;
      emit(j, eout);
      write_csv(ecsv, taxonomy_csv(failures));
      return 0;
    }
    if (*cont) {
      auto c = ngram_contamination(need_file(cgold, "gold text"), need_file(cret, "retrieved text"), cn);
      emit({{"contaminated", c.contaminated}, {"witness", c.contaminated ? json(c.witness) : json()}, {"n", cn}},
           cout_path);
      return 0;
    }
    if (*usage) {
      auto u = aggregate_usage(load_runs(uruns));
      json j = u;
      j["total"] = u.total();
      emit(j, uout);
      write_csv(ucsv, usage_csv(u));
      if (uout.empty() && ucsv.empty()) std::cout << usage_csv(u);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "fault: " << e.what() << "\n";
    return kExitInfra;
  }
  return 0;
}
