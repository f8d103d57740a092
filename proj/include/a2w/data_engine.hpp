#pragma once

// Verifier gate, SFT export, contamination check and the analysis reports
// (win / tie / loss, failure taxonomy, token usage).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "a2w/gateway.hpp"
#include "a2w/pipeline.hpp"

namespace a2w {

/// 1 iff the trajectory has a final artifact whose test report passed both
/// suites and which executed in the sandbox. Recomputed from stored data.
int verify(const InteractionTrajectory& t);

struct SftRecord {
  std::string task_id;
  std::vector<ChatMessage> messages;
  int verifier = 1;
  json reward_summary = json::array();  // one {turn, unit_pass, simulation_pass, empty} per turn
  json meta = json::object();
};

void to_json(json& j, const SftRecord& r);
void from_json(const json& j, SftRecord& r);

/// Developer conversation: system, task context, then per turn the revision
/// (assistant) followed by its test feedback (user), ending on the accepted
/// revision.
SftRecord make_sft_record(const RunRecord& run);

struct ExportResult {
  std::size_t exported = 0;
  std::size_t rejected = 0;  // readable runs with verifier 0
  std::size_t corrupt = 0;   // unreadable run directories
  std::vector<std::string> warnings;
};

/// Subdirectories of `root` holding a run_record.json, sorted.
std::vector<fs::path> discover_run_dirs(const fs::path& root);

/// Writes one SftRecord per accepted run, in the given order.
ExportResult export_sft(const std::vector<fs::path>& run_dirs, const fs::path& out_path);

struct Contamination {
  bool contaminated = false;
  std::string witness;  // one shared n-gram, tokens joined by single spaces
};

std::vector<std::string> whitespace_tokens(std::string_view text);

/// Shared contiguous n-token sequence between the two texts (whitespace
/// tokens, case preserved).
Contamination ngram_contamination(std::string_view gold, std::string_view retrieved, int n = 10);

class MismatchedInstances : public Error {
 public:
  using Error::Error;
};

struct WtlOutcome {
  int wins = 0;
  int ties = 0;
  int losses = 0;
  std::string metric_name;

  bool operator==(const WtlOutcome&) const = default;
};

void to_json(json& j, const WtlOutcome& w);

WtlOutcome pairwise_wtl(const std::vector<double>& a, const std::vector<double>& b, double tie_eps = 0.0,
                        std::string metric_name = "");
/// Instances keyed by id; the key sets must agree.
WtlOutcome pairwise_wtl(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                        double tie_eps = 0.0, std::string metric_name = "");

std::string wtl_csv(const std::vector<WtlOutcome>& rows);

/// Failure categories per representation.
const std::vector<std::string>& failure_categories(Representation r);

class NoFailure : public Error {
 public:
  using Error::Error;
};

struct ErrorClass {
  Representation kind = Representation::CodeEnv;
  std::string category;
  int turn_index = 0;
  bool low_confidence = false;  // no rule fired; catch-all category used
  std::string signal;           // the text that triggered the rule
};

void to_json(json& j, const ErrorClass& e);

/// Rule-based approximation of a manual failure analysis.
ErrorClass classify_failure(const TestReport& report, Representation kind, int turn_index = 0);

/// Every failing turn of the given runs.
std::vector<ErrorClass> collect_failures(const std::vector<RunRecord>& runs);

/// {"approximation": true, "kinds": {kind: {category: count}}, "total": n}
json taxonomy_report(const std::vector<ErrorClass>& errors);
std::string taxonomy_csv(const std::vector<ErrorClass>& errors);

UsageStats aggregate_usage(const std::vector<RunRecord>& runs);
/// stage,input_tokens,output_tokens,wall_time_seconds rows plus a total row.
std::string usage_csv(const UsageStats& u);

RunRecord load_run_record(const fs::path& run_dir);

}  // namespace a2w
