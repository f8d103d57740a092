#pragma once

// Domain records shared by every stage of the pipeline. All of them are plain
// values; persistence is JSON with snake_case keys.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "a2w/util.hpp"

namespace a2w {

enum class Representation { PddlDomain, CodeEnv, TextGame };

std::string to_string(Representation r);
Representation representation_from_string(std::string_view s);

struct TaskSpec {
  std::string task_id;
  std::string description;
  Representation representation = Representation::CodeEnv;
  std::optional<std::string> gold_ref;
  std::optional<std::string> env_name;
  int turn_budget = 1;
  int research_rounds = 0;

  bool operator==(const TaskSpec&) const = default;
};

/// Returns one message per violated invariant; empty means valid.
std::vector<std::string> validate_task(const TaskSpec& spec);

struct WorldModelArtifact {
  std::string artifact_id;
  Representation representation = Representation::CodeEnv;
  std::string source;
  std::string entrypoint_path;
  int turn_index = 0;
  std::string parent_task;

  bool operator==(const WorldModelArtifact&) const = default;
};

std::vector<std::string> validate_artifact(const WorldModelArtifact& artifact, bool declared_success = true);

// True when `path` is relative and has no ".." segment.
bool is_contained_relative_path(std::string_view path);

enum class Confidence { High, Medium, Low };

std::string to_string(Confidence c);
Confidence confidence_from_string(std::string_view s);

struct EvidenceEntry {
  std::string title;
  std::string url;
  SysSeconds retrieved_at{};
  std::string snippet;
  Confidence confidence = Confidence::Medium;

  bool operator==(const EvidenceEntry&) const = default;
};

struct ResearchReport {
  std::vector<std::string> questions;
  std::vector<EvidenceEntry> evidence_log;
  std::string report_text;
  int rounds_used = 0;
  // One line per research round that failed; a failed round never aborts.
  std::vector<std::string> errors;

  bool operator==(const ResearchReport&) const = default;
};

inline constexpr std::size_t kMaxLogTailBytes = 4000;

struct SubReport {
  bool pass = false;
  std::string analysis;
  std::string suggest_fix;
  std::string raw_log_tail;

  bool operator==(const SubReport&) const = default;
};

// Builds a SubReport that satisfies its invariants: the log tail is bounded
// and a failing report always carries a fix suggestion.
SubReport make_sub_report(bool pass, std::string analysis, std::string suggest_fix, std::string_view log);

struct TestReport {
  SubReport unit;
  SubReport simulation;
  std::string merged_feedback;

  bool operator==(const TestReport&) const = default;
  bool passed() const { return unit.pass && simulation.pass; }
};

struct StageUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double wall_time_seconds = 0.0;

  bool operator==(const StageUsage&) const = default;
  StageUsage& operator+=(const StageUsage& o);
};

struct UsageStats {
  std::map<std::string, StageUsage> stages;

  StageUsage total() const;
  void add(const std::string& stage, const StageUsage& delta);
  UsageStats& operator+=(const UsageStats& o);
  bool operator==(const UsageStats&) const = default;
};

struct TrajectoryStep {
  std::string state_summary;
  std::string developer_action;
  std::string observation;

  bool operator==(const TrajectoryStep&) const = default;
};

struct InteractionTrajectory {
  std::string task_id;
  // The developer's turn-1 context (task, research report, empty feedback).
  std::string context;
  std::vector<TrajectoryStep> steps;
  std::optional<WorldModelArtifact> final_artifact;
  // Test report of the turn that produced `final_artifact`.
  std::optional<TestReport> final_report;
  // The final artifact ran in the sandbox without an execution fault.
  bool executed = false;
  int verifier = 0;
  UsageStats usage;

  bool operator==(const InteractionTrajectory&) const = default;
};

std::vector<std::string> validate_trajectory(const InteractionTrajectory& t);

void to_json(json& j, const TaskSpec& v);
void from_json(const json& j, TaskSpec& v);
void to_json(json& j, const WorldModelArtifact& v);
void from_json(const json& j, WorldModelArtifact& v);
void to_json(json& j, const EvidenceEntry& v);
void from_json(const json& j, EvidenceEntry& v);
void to_json(json& j, const ResearchReport& v);
void from_json(const json& j, ResearchReport& v);
void to_json(json& j, const SubReport& v);
void from_json(const json& j, SubReport& v);
void to_json(json& j, const TestReport& v);
void from_json(const json& j, TestReport& v);
void to_json(json& j, const StageUsage& v);
void from_json(const json& j, StageUsage& v);
void to_json(json& j, const UsageStats& v);
void from_json(const json& j, UsageStats& v);
void to_json(json& j, const TrajectoryStep& v);
void from_json(const json& j, TrajectoryStep& v);
void to_json(json& j, const InteractionTrajectory& v);
void from_json(const json& j, InteractionTrajectory& v);

}  // namespace a2w
