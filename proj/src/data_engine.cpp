#include "a2w/data_engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "a2w/pddl.hpp"

namespace a2w {

int verify(const InteractionTrajectory& t) {
  if (!t.final_artifact || !t.final_report) return 0;
  return t.final_report->unit.pass && t.final_report->simulation.pass && t.executed ? 1 : 0;
}

void to_json(json& j, const SftRecord& r) {
  j = json{{"task_id", r.task_id}, {"messages", r.messages}, {"verifier", r.verifier},
           {"reward_summary", r.reward_summary}, {"meta", r.meta}};
}

void from_json(const json& j, SftRecord& r) {
  r.task_id = j.at("task_id").get<std::string>();
  r.messages = j.at("messages").get<std::vector<ChatMessage>>();
  r.verifier = j.at("verifier").get<int>();
  r.reward_summary = j.value("reward_summary", json::array());
  r.meta = j.value("meta", json::object());
}

SftRecord make_sft_record(const RunRecord& run) {
  const auto& t = run.trajectory;
  SftRecord r;
  r.task_id = run.task_id;
  r.verifier = verify(t);
  r.messages.push_back(ChatMessage::system(default_role(RoleName::ModelDeveloper).system_prompt));
  r.messages.push_back(ChatMessage::user(t.context));
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    r.messages.push_back(ChatMessage::assistant(t.steps[i].developer_action));
    if (i + 1 < t.steps.size()) r.messages.push_back(ChatMessage::user("Test feedback:\n" + t.steps[i].observation));
  }
  for (const auto& turn : run.turns) {
    json s{{"turn", turn.turn_index}, {"empty", turn.empty}};
    s["unit_pass"] = turn.report ? json(turn.report->unit.pass) : json();
    s["simulation_pass"] = turn.report ? json(turn.report->simulation.pass) : json();
    r.reward_summary.push_back(std::move(s));
  }
  auto total = t.usage.total();
  r.meta = json{{"representation", t.final_artifact ? to_string(t.final_artifact->representation) : std::string()},
                {"turns", run.turns.size()},
                {"usage", {{"input_tokens", total.input_tokens}, {"output_tokens", total.output_tokens}}}};
  return r;
}

RunRecord load_run_record(const fs::path& run_dir) {
  auto text = read_file(run_dir / "run_record.json");
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("run_record.json in " + run_dir.string() + " is not valid JSON", 0);
  try {
    return j.get<RunRecord>();
  } catch (const json::exception& e) {
    throw ParseError("run_record.json in " + run_dir.string() + ": " + e.what(), 0);
  }
}

std::vector<fs::path> discover_run_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::is_directory(root)) return out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "run_record.json")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ExportResult export_sft(const std::vector<fs::path>& run_dirs, const fs::path& out_path) {
  ExportResult res;
  std::vector<json> lines;
  for (const auto& dir : run_dirs) {
    RunRecord run;
    try {
      run = load_run_record(dir);
    } catch (const std::exception& e) {
      ++res.corrupt;
      res.warnings.push_back("skipped " + dir.string() + ": " + e.what());
      continue;
    }
    if (verify(run.trajectory) != 1) {
      ++res.rejected;
      continue;
    }
    lines.push_back(make_sft_record(run));
    ++res.exported;
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_jsonl(out_path, lines);
  return res;
}

std::vector<std::string> whitespace_tokens(std::string_view text) { return split_whitespace(text); }

Contamination ngram_contamination(std::string_view gold, std::string_view retrieved, int n) {
  if (n < 1) throw PreconditionError("n must be at least 1");
  auto a = whitespace_tokens(gold);
  auto b = whitespace_tokens(retrieved);
  const auto un = static_cast<std::size_t>(n);
  if (a.size() < un || b.size() < un) return {};
  auto gram = [&](const std::vector<std::string>& t, std::size_t i) {
    std::string s = t[i];
    for (std::size_t k = 1; k < un; ++k) s += ' ' + t[i + k];
    return s;
  };
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i + un <= a.size(); ++i) seen.insert(gram(a, i));
  for (std::size_t i = 0; i + un <= b.size(); ++i) {
    auto g = gram(b, i);
    if (seen.contains(g)) return {true, g};
  }
  return {};
}

void to_json(json& j, const WtlOutcome& w) {
  j = json{{"metric", w.metric_name}, {"wins", w.wins}, {"ties", w.ties}, {"losses", w.losses}};
}

WtlOutcome pairwise_wtl(const std::vector<double>& a, const std::vector<double>& b, double tie_eps,
                        std::string metric_name) {
  if (a.size() != b.size()) {
    throw MismatchedInstances("score lists differ in length: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
  }
  if (!(tie_eps >= 0.0)) throw PreconditionError("tie_eps must be non-negative");
  WtlOutcome w;
  w.metric_name = std::move(metric_name);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] - b[i] > tie_eps) ++w.wins;
    else if (b[i] - a[i] > tie_eps) ++w.losses;
    else ++w.ties;
  }
  return w;
}

WtlOutcome pairwise_wtl(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                        double tie_eps, std::string metric_name) {
  std::vector<double> va, vb;
  for (const auto& [id, x] : a) {
    auto it = b.find(id);
    if (it == b.end()) throw MismatchedInstances("instance '" + id + "' missing from the second score set");
    va.push_back(x);
    vb.push_back(it->second);
  }
  if (a.size() != b.size()) throw MismatchedInstances("the second score set has instances the first lacks");
  return pairwise_wtl(va, vb, tie_eps, std::move(metric_name));
}

std::string wtl_csv(const std::vector<WtlOutcome>& rows) {
  std::string s = "metric,wins,ties,losses\n";
  for (const auto& r : rows) {
    s += r.metric_name + "," + std::to_string(r.wins) + "," + std::to_string(r.ties) + "," + std::to_string(r.losses) + "\n";
  }
  return s;
}

const std::vector<std::string>& failure_categories(Representation r) {
  static const std::vector<std::string> pddl = [] {
    std::vector<std::string> v;
    for (auto c : all_pddl_error_classes()) v.push_back(to_string(c));
    return v;
  }();
  static const std::vector<std::string> code = {"signature-mismatch", "schema-mismatch",  "dynamics-error",
                                                "non-deterministic",  "judgment-bug",     "invariant-violation"};
  static const std::vector<std::string> game = {"state-bug", "contract-fail", "undefined-symbol", "invalid-action",
                                                "syntax-error"};
  switch (r) {
    case Representation::PddlDomain: return pddl;
    case Representation::CodeEnv: return code;
    case Representation::TextGame: return game;
  }
  return code;
}

namespace {

bool has(const std::string& hay, std::initializer_list<std::string_view> needles) {
  for (auto n : needles) {
    if (hay.find(n) != std::string::npos) return true;
  }
  return false;
}

std::string failing_text(const TestReport& r) {
  std::string s;
  // The simulation log tail is a JSON dump whose keys would trip the rules.
  if (!r.unit.pass) s += r.unit.analysis + "\n" + r.unit.raw_log_tail + "\n";
  if (!r.simulation.pass) s += r.simulation.analysis + "\n";
  return s;
}

}  // namespace

void to_json(json& j, const ErrorClass& e) {
  j = json{{"kind", to_string(e.kind)},       {"category", e.category}, {"turn_index", e.turn_index},
           {"low_confidence", e.low_confidence}, {"signal", e.signal},   {"approximation", true}};
}

ErrorClass classify_failure(const TestReport& report, Representation kind, int turn_index) {
  if (report.unit.pass && report.simulation.pass) throw NoFailure("both sub-reports passed");
  ErrorClass ec;
  ec.kind = kind;
  ec.turn_index = turn_index;
  const std::string raw = failing_text(report);
  const std::string text = to_lower(raw);
  auto set = [&](std::string cat, bool low = false) {
    ec.category = std::move(cat);
    ec.low_confidence = low;
    ec.signal = truncate_with_marker(trim(raw), 300);
    return ec;
  };

  switch (kind) {
    case Representation::PddlDomain:
      for (const auto& c : failure_categories(kind)) {
        if (text.find(c) != std::string::npos) return set(c);
      }
      // Catch-all: semantic disagreement with the declarations.
      return set("type-mismatch", true);

    case Representation::CodeEnv:
      if (has(text, {"signature", "positional argument", "unexpected keyword", "takes no arguments",
                     "object is not callable", "has no attribute 'reset'", "has no attribute 'step'",
                     "has no attribute 'set_state'"})) {
        return set("signature-mismatch");
      }
      if (has(text, {"shape", "schema", "wrong length", "not numeric", "could not broadcast"})) {
        return set("schema-mismatch");
      }
      if (has(text, {"non-finite", " nan", "\"nan\"", "invariant", "out of bounds"})) {
        return set("invariant-violation");
      }
      if (has(text, {"non-determin", "nondetermin", "not reproducible", "different result"})) {
        return set("non-deterministic");
      }
      if (has(text, {" reward ", " done "}) && has(text, {"expected"})) return set("judgment-bug");
      if (has(text, {"next state"})) return set("dynamics-error");
      return set("dynamics-error", true);

    case Representation::TextGame:
      if (has(text, {"syntaxerror", "indentationerror", "syntax error"})) return set("syntax-error");
      if (has(text, {"nameerror", "importerror", "modulenotfounderror", "undefined", "has no attribute"})) {
        return set("undefined-symbol");
      }
      if (has(text, {"invalid action", "not a valid action", "unknown action", "can't do that"})) {
        return set("invalid-action");
      }
      if (has(text, {"contract", "typeerror", "game_init", "game_actions", "game_step", "missing method"})) {
        return set("contract-fail");
      }
      return set("state-bug", true);
  }
  return set("dynamics-error", true);
}

std::vector<ErrorClass> collect_failures(const std::vector<RunRecord>& runs) {
  std::vector<ErrorClass> out;
  for (const auto& run : runs) {
    for (const auto& t : run.turns) {
      if (!t.report || t.report->passed() || !t.artifact) continue;
      out.push_back(classify_failure(*t.report, t.artifact->representation, t.turn_index));
    }
  }
  return out;
}

json taxonomy_report(const std::vector<ErrorClass>& errors) {
  json kinds = json::object();
  for (auto r : {Representation::PddlDomain, Representation::CodeEnv, Representation::TextGame}) {
    json cats = json::object();
    for (const auto& c : failure_categories(r)) cats[c] = 0;
    kinds[to_string(r)] = cats;
  }
  int low = 0;
  for (const auto& e : errors) {
    kinds[to_string(e.kind)][e.category] = kinds[to_string(e.kind)][e.category].get<int>() + 1;
    low += e.low_confidence;
  }
  return json{{"approximation", true}, {"kinds", kinds}, {"total", errors.size()}, {"low_confidence", low}};
}

std::string taxonomy_csv(const std::vector<ErrorClass>& errors) {
  auto rep = taxonomy_report(errors);
  std::string s = "kind,category,count,share\n";
  for (auto& [kind, cats] : rep["kinds"].items()) {
    int total = 0;
    for (auto& [_, n] : cats.items()) total += n.get<int>();
    for (auto& [cat, n] : cats.items()) {
      std::ostringstream share;
      share.precision(4);
      share << std::fixed << (total ? n.get<double>() / total : 0.0);
      s += kind + "," + cat + "," + std::to_string(n.get<int>()) + "," + share.str() + "\n";
    }
  }
  return s;
}

UsageStats aggregate_usage(const std::vector<RunRecord>& runs) {
  UsageStats u;
  for (const auto& r : runs) u += r.trajectory.usage;
  return u;
}

std::string usage_csv(const UsageStats& u) {
  std::ostringstream s;
  s << "stage,input_tokens,output_tokens,wall_time_seconds\n";
  auto row = [&](const std::string& name, const StageUsage& x) {
    s << name << "," << x.input_tokens << "," << x.output_tokens << "," << x.wall_time_seconds << "\n";
  };
  for (const auto& [stage, x] : u.stages) row(stage, x);
  row("total", u.total());
  return s.str();
}

}  // namespace a2w
