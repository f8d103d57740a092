#pragma once

// The generate / test / refine loop: knowledge synthesis, model development,
// unit + simulation testing and feedback merging, with on-disk run records.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "a2w/agent.hpp"
#include "a2w/core.hpp"
#include "a2w/harness.hpp"
#include "a2w/toolbelt.hpp"

namespace a2w {

struct TurnBudgets {
  int refinement_turns = 3;
  int research_rounds = 2;
};

/// PDDL and text games get 2 refinement turns, code environments 3.
TurnBudgets default_budgets(Representation r);

struct PipelineOptions {
  fs::path runs_root = "runs";
  Clock clock = Clock::system();
  DecodingConfig decoding;
  int max_steps = kDefaultMaxSteps;
  std::optional<int> turns_override;
  std::optional<int> research_override;
};

/// Shared by the stages of one task run.
struct StageEnv {
  Gateway& gateway;
  std::shared_ptr<const ToolbeltContext> tools;
  const PipelineOptions& options;
  UsageStats* usage = nullptr;                // stage accounting, optional
  std::vector<std::string>* faults = nullptr;  // infrastructure failures, optional
};

ResearchReport knowledge_synthesis(const TaskSpec& task, StageEnv env, const fs::path& work_dir);

/// Context handed to the developer: task, report and (verbatim) feedback.
std::string developer_context(const TaskSpec& task, const ResearchReport& report, std::string_view feedback);

struct DevelopResult {
  std::optional<WorldModelArtifact> artifact;
  AgentResult agent;
  std::string context;
};

/// Runs the developer in `toolbelt`'s directory and saves the declared file
/// there. No artifact when the agent produced no usable final block.
DevelopResult generate_model(const TaskSpec& task, const ResearchReport& report, std::string_view feedback,
                             int turn_index, StageEnv env, Toolbelt& toolbelt);

SubReport run_unit_tests(const WorldModelArtifact& artifact, const TaskSpec& task, const ResearchReport& report,
                         StageEnv env, Toolbelt& toolbelt);

/// Numeric agreement used by the simulation rubric: absolute or relative
/// error at most `tol`.
bool numbers_close(double a, double b, double tol = 1e-3);

/// Replays every recorded transition of a code-env play log in `reference`
/// and describes each disagreement. Empty when all transitions agree.
std::vector<std::string> check_transitions(const PlayLog& log, EnvHandle& reference, double tol = 1e-3);

SubReport run_simulation_test(const WorldModelArtifact& artifact, const TaskSpec& task, StageEnv env,
                              Toolbelt& toolbelt);

inline constexpr std::size_t kMaxFeedbackBytes = 8000;

std::string merge_feedback(const SubReport& unit, const SubReport& sim);

struct TurnRecord {
  int turn_index = 0;
  bool empty = false;  // the developer produced no artifact
  std::optional<WorldModelArtifact> artifact;
  std::optional<TestReport> report;
};

struct RunRecord {
  std::string task_id;
  ResearchReport research;
  std::vector<TurnRecord> turns;
  std::optional<WorldModelArtifact> final_artifact;
  InteractionTrajectory trajectory;
  bool converged = false;
  // Infrastructure failures (gateway, harness, filesystem) met along the way.
  // Model-quality failures are never listed here.
  std::vector<std::string> faults;
};

void to_json(json& j, const TurnRecord& t);
void from_json(const json& j, TurnRecord& t);
void to_json(json& j, const RunRecord& r);
void from_json(const json& j, RunRecord& r);

inline constexpr std::string_view kEmptyTurnMarker = "[empty turn: no artifact produced]";

/// Full loop for one task. Writes runs/<task_id>/ (replacing any previous
/// run of the same task): research.json, turn_<k>/{<artifact>, tests/,
/// transcripts/, reports.json}, trajectory.jsonl and run_record.json.
RunRecord refine(const TaskSpec& task, Gateway& gateway, std::shared_ptr<const ToolbeltContext> tools,
                 const PipelineOptions& options);

/// trajectory.jsonl: one step per line.
void write_trajectory_jsonl(const fs::path& path, const InteractionTrajectory& t);

struct BatchOutcome {
  std::vector<RunRecord> runs;
  std::vector<std::string> faults;  // infrastructure failures, one per task
};

/// Runs tasks with at most `parallel` concurrent workers. Each task gets its
/// gateway from `gateway_for` (shared or per task).
BatchOutcome run_batch(const std::vector<TaskSpec>& tasks, const std::function<Gateway&(const TaskSpec&)>& gateway_for,
                       std::shared_ptr<const ToolbeltContext> tools, const PipelineOptions& options, int parallel = 1);

}  // namespace a2w
