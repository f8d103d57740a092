#include "a2w/core.hpp"

#include <cmath>
#include <fstream>

namespace a2w {

std::string to_string(Representation r) {
  switch (r) {
    case Representation::PddlDomain: return "pddl_domain";
    case Representation::CodeEnv: return "code_env";
    case Representation::TextGame: return "text_game";
  }
  return "code_env";
}

Representation representation_from_string(std::string_view s) {
  if (s == "pddl_domain") return Representation::PddlDomain;
  if (s == "code_env") return Representation::CodeEnv;
  if (s == "text_game") return Representation::TextGame;
  throw ParseError("unknown representation: " + std::string(s), 0);
}

std::string to_string(Confidence c) {
  switch (c) {
    case Confidence::High: return "high";
    case Confidence::Medium: return "medium";
    case Confidence::Low: return "low";
  }
  return "medium";
}

Confidence confidence_from_string(std::string_view s) {
  auto l = to_lower(s);
  if (l == "high") return Confidence::High;
  if (l == "medium") return Confidence::Medium;
  if (l == "low") return Confidence::Low;
  throw ParseError("unknown confidence: " + std::string(s), 0);
}

std::vector<std::string> validate_task(const TaskSpec& spec) {
  std::vector<std::string> v;
  if (spec.task_id.empty()) v.emplace_back("task_id empty");
  if (trim(spec.description).empty()) v.emplace_back("description empty");
  if (spec.turn_budget < 1) v.emplace_back("turn_budget < 1");
  if (spec.research_rounds < 0) v.emplace_back("research_rounds < 0");
  if (spec.gold_ref) {
    std::ifstream in(*spec.gold_ref);
    if (!in || fs::is_directory(*spec.gold_ref)) v.emplace_back("gold_ref unreadable");
  }
  return v;
}

bool is_contained_relative_path(std::string_view path) {
  if (path.empty()) return false;
  fs::path p{std::string(path)};
  if (p.is_absolute() || p.has_root_name()) return false;
  for (const auto& seg : p) {
    if (seg == "..") return false;
  }
  return true;
}

std::vector<std::string> validate_artifact(const WorldModelArtifact& a, bool declared_success) {
  std::vector<std::string> v;
  if (declared_success && a.source.empty()) v.emplace_back("source empty");
  if (!is_contained_relative_path(a.entrypoint_path)) v.emplace_back("entrypoint_path escapes working directory");
  if (a.turn_index < 0) v.emplace_back("turn_index negative");
  return v;
}

SubReport make_sub_report(bool pass, std::string analysis, std::string suggest_fix, std::string_view log) {
  SubReport r;
  r.pass = pass;
  r.analysis = std::move(analysis);
  r.suggest_fix = std::move(suggest_fix);
  if (!pass && trim(r.suggest_fix).empty()) {
    r.suggest_fix = "- Inspect the failure in the log tail and correct the first reported error.";
  }
  r.raw_log_tail = utf8_tail(log, kMaxLogTailBytes);
  return r;
}

StageUsage& StageUsage::operator+=(const StageUsage& o) {
  input_tokens += o.input_tokens;
  output_tokens += o.output_tokens;
  wall_time_seconds += o.wall_time_seconds;
  return *this;
}

StageUsage UsageStats::total() const {
  StageUsage t;
  for (const auto& [_, s] : stages) t += s;
  return t;
}

void UsageStats::add(const std::string& stage, const StageUsage& delta) { stages[stage] += delta; }

UsageStats& UsageStats::operator+=(const UsageStats& o) {
  for (const auto& [k, s] : o.stages) stages[k] += s;
  return *this;
}

std::vector<std::string> validate_trajectory(const InteractionTrajectory& t) {
  std::vector<std::string> v;
  if (t.final_artifact && t.steps.empty()) v.emplace_back("steps empty although a final artifact exists");
  if (t.verifier != 0 && t.verifier != 1) v.emplace_back("verifier not in {0,1}");
  if (t.verifier == 1 && !(t.final_report && t.final_report->passed())) {
    v.emplace_back("verifier=1 without passing final test report");
  }
  return v;
}

// ---- JSON ----

void to_json(json& j, const TaskSpec& v) {
  j = json{{"task_id", v.task_id},
           {"description", v.description},
           {"representation", to_string(v.representation)},
           {"turn_budget", v.turn_budget},
           {"research_rounds", v.research_rounds}};
  j["gold_ref"] = v.gold_ref ? json(*v.gold_ref) : json(nullptr);
  j["env_name"] = v.env_name ? json(*v.env_name) : json(nullptr);
}

void from_json(const json& j, TaskSpec& v) {
  v.task_id = j.at("task_id").get<std::string>();
  v.description = j.at("description").get<std::string>();
  v.representation = representation_from_string(j.at("representation").get<std::string>());
  v.turn_budget = j.value("turn_budget", 1);
  v.research_rounds = j.value("research_rounds", 0);
  v.gold_ref.reset();
  v.env_name.reset();
  if (j.contains("gold_ref") && !j["gold_ref"].is_null()) v.gold_ref = j["gold_ref"].get<std::string>();
  if (j.contains("env_name") && !j["env_name"].is_null()) v.env_name = j["env_name"].get<std::string>();
}

void to_json(json& j, const WorldModelArtifact& v) {
  j = json{{"artifact_id", v.artifact_id},       {"representation", to_string(v.representation)},
           {"source", v.source},                 {"entrypoint_path", v.entrypoint_path},
           {"turn_index", v.turn_index},         {"parent_task", v.parent_task}};
}

void from_json(const json& j, WorldModelArtifact& v) {
  v.artifact_id = j.at("artifact_id").get<std::string>();
  v.representation = representation_from_string(j.at("representation").get<std::string>());
  v.source = j.at("source").get<std::string>();
  v.entrypoint_path = j.at("entrypoint_path").get<std::string>();
  v.turn_index = j.at("turn_index").get<int>();
  v.parent_task = j.at("parent_task").get<std::string>();
}

void to_json(json& j, const EvidenceEntry& v) {
  j = json{{"title", v.title},
           {"url", v.url},
           {"retrieved_at", format_iso8601(v.retrieved_at)},
           {"snippet", v.snippet},
           {"confidence", to_string(v.confidence)}};
}

void from_json(const json& j, EvidenceEntry& v) {
  v.title = j.at("title").get<std::string>();
  v.url = j.at("url").get<std::string>();
  v.retrieved_at = parse_iso8601(j.at("retrieved_at").get<std::string>());
  v.snippet = j.value("snippet", "");
  v.confidence = confidence_from_string(j.value("confidence", "medium"));
}

void to_json(json& j, const ResearchReport& v) {
  j = json{{"questions", v.questions},
           {"evidence_log", v.evidence_log},
           {"report_text", v.report_text},
           {"rounds_used", v.rounds_used},
           {"errors", v.errors}};
}

void from_json(const json& j, ResearchReport& v) {
  v.questions = j.at("questions").get<std::vector<std::string>>();
  v.evidence_log = j.at("evidence_log").get<std::vector<EvidenceEntry>>();
  v.report_text = j.at("report_text").get<std::string>();
  v.rounds_used = j.at("rounds_used").get<int>();
  v.errors = j.value("errors", std::vector<std::string>{});
}

void to_json(json& j, const SubReport& v) {
  j = json{{"pass", v.pass},
           {"analysis", v.analysis},
           {"suggest_fix", v.suggest_fix},
           {"raw_log_tail", v.raw_log_tail}};
}

void from_json(const json& j, SubReport& v) {
  v.pass = j.at("pass").get<bool>();
  v.analysis = j.value("analysis", "");
  v.suggest_fix = j.value("suggest_fix", "");
  v.raw_log_tail = j.value("raw_log_tail", "");
}

void to_json(json& j, const TestReport& v) {
  j = json{{"unit", v.unit}, {"simulation", v.simulation}, {"merged_feedback", v.merged_feedback}};
}

void from_json(const json& j, TestReport& v) {
  v.unit = j.at("unit").get<SubReport>();
  v.simulation = j.at("simulation").get<SubReport>();
  v.merged_feedback = j.value("merged_feedback", "");
}

void to_json(json& j, const StageUsage& v) {
  j = json{{"input_tokens", v.input_tokens},
           {"output_tokens", v.output_tokens},
           {"wall_time_seconds", v.wall_time_seconds}};
}

void from_json(const json& j, StageUsage& v) {
  v.input_tokens = j.at("input_tokens").get<std::int64_t>();
  v.output_tokens = j.at("output_tokens").get<std::int64_t>();
  v.wall_time_seconds = j.value("wall_time_seconds", 0.0);
  if (v.input_tokens < 0 || v.output_tokens < 0 || v.wall_time_seconds < 0) {
    throw ParseError("usage values must be non-negative", 0);
  }
}

void to_json(json& j, const UsageStats& v) {
  json stages = json::object();
  for (const auto& [k, s] : v.stages) stages[k] = s;
  j = json{{"stages", stages}, {"total", v.total()}};
}

void from_json(const json& j, UsageStats& v) {
  v.stages.clear();
  for (const auto& [k, s] : j.at("stages").items()) v.stages[k] = s.get<StageUsage>();
  if (j.contains("total")) {
    auto declared = j["total"].get<StageUsage>();
    auto sum = v.total();
    if (declared.input_tokens != sum.input_tokens || declared.output_tokens != sum.output_tokens ||
        std::abs(declared.wall_time_seconds - sum.wall_time_seconds) > 1e-6) {
      throw ParseError("usage total does not equal the sum over stages", 0);
    }
  }
}

void to_json(json& j, const TrajectoryStep& v) {
  j = json{{"state_summary", v.state_summary},
           {"developer_action", v.developer_action},
           {"observation", v.observation}};
}

void from_json(const json& j, TrajectoryStep& v) {
  v.state_summary = j.at("state_summary").get<std::string>();
  v.developer_action = j.at("developer_action").get<std::string>();
  v.observation = j.at("observation").get<std::string>();
}

void to_json(json& j, const InteractionTrajectory& v) {
  j = json{{"task_id", v.task_id}, {"context", v.context}, {"steps", v.steps},
           {"executed", v.executed}, {"verifier", v.verifier}, {"usage", v.usage}};
  j["final_artifact"] = v.final_artifact ? json(*v.final_artifact) : json(nullptr);
  j["final_report"] = v.final_report ? json(*v.final_report) : json(nullptr);
}

void from_json(const json& j, InteractionTrajectory& v) {
  v.task_id = j.at("task_id").get<std::string>();
  v.context = j.value("context", "");
  v.steps = j.at("steps").get<std::vector<TrajectoryStep>>();
  v.executed = j.value("executed", false);
  v.verifier = j.at("verifier").get<int>();
  v.usage = j.at("usage").get<UsageStats>();
  v.final_artifact.reset();
  v.final_report.reset();
  if (j.contains("final_artifact") && !j["final_artifact"].is_null()) {
    v.final_artifact = j["final_artifact"].get<WorldModelArtifact>();
  }
  if (j.contains("final_report") && !j["final_report"].is_null()) {
    v.final_report = j["final_report"].get<TestReport>();
  }
}

}  // namespace a2w
