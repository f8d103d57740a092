#pragma once

// ReAct runtime: think -> act (tool) -> observe, bounded by a step cap.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "a2w/gateway.hpp"

namespace a2w {

enum class RoleName { DeepResearcher, ModelDeveloper, UnitTester, SimulationTester, GamePlayer };

std::string to_string(RoleName r);

inline constexpr int kDefaultMaxSteps = 10;

struct AgentRole {
  RoleName name = RoleName::ModelDeveloper;
  std::set<std::string> allowed_tools;
  std::string system_prompt;
  int max_steps = kDefaultMaxSteps;
};

/// Tool set of each pipeline role.
std::set<std::string> role_tools(RoleName name);
/// Role with its tool set, step cap 10 and the built-in system prompt.
AgentRole default_role(RoleName name);

enum class EventKind { Thought, ToolCall, Observation, Final, StepCapReached };

std::string to_string(EventKind k);

struct TranscriptEvent {
  EventKind kind = EventKind::Thought;
  int step = 0;
  std::string text;       // thought / observation / final payload
  std::string tool_name;  // ToolCall only
  std::string arguments;  // ToolCall only, verbatim

  bool operator==(const TranscriptEvent&) const = default;
};

struct Transcript {
  std::string role;
  std::vector<TranscriptEvent> events;
  int step_count = 0;

  bool operator==(const Transcript&) const = default;
};

void to_json(json& j, const TranscriptEvent& e);
void from_json(const json& j, TranscriptEvent& e);

/// One event per line.
void write_transcript_jsonl(const fs::path& path, const Transcript& t);
Transcript read_transcript_jsonl(const fs::path& path);

/// What the runtime needs from a tool provider.
class ToolInvoker {
 public:
  virtual ~ToolInvoker() = default;
  virtual bool has_tool(const std::string& name) const = 0;
  /// Runs a tool. Exceptions become error observations in the transcript.
  virtual std::string invoke(const std::string& name, const json& arguments) = 0;
  virtual std::vector<ToolSpec> tool_specs(const std::set<std::string>& names) const { (void)names; return {}; }
};

struct AgentResult {
  std::string final_output;
  Transcript transcript;
  bool has_final = false;
  // Best-effort output: the last assistant text, because no <final> arrived.
  bool step_cap_reached = false;
  TokenUsage usage;
};

/// Runs one role to completion. Gateway errors propagate; tool failures and
/// denied tools are recorded as observations and the loop continues.
AgentResult run_agent(const AgentRole& role, std::string_view task_context, Gateway& gateway, ToolInvoker& tools,
                      const DecodingConfig& decoding = {});

/// Contents of the single <final>...</final> block; nullopt for zero or
/// several blocks.
std::optional<std::string> extract_final(std::string_view reply);

/// Contents of the single <tag>...</tag> block inside `text`, trimmed.
std::optional<std::string> extract_tag(std::string_view text, std::string_view tag);

/// Tool call written as a fenced ```tool or ```json block holding
/// {"name": ..., "arguments": {...}}.
std::optional<ToolCall> parse_fenced_tool_call(std::string_view text);

}  // namespace a2w
