#include "a2w/agent.hpp"

#include <fstream>

namespace a2w {

std::string to_string(RoleName r) {
  switch (r) {
    case RoleName::DeepResearcher: return "deep_researcher";
    case RoleName::ModelDeveloper: return "model_developer";
    case RoleName::UnitTester: return "unit_tester";
    case RoleName::SimulationTester: return "simulation_tester";
    case RoleName::GamePlayer: return "game_player";
  }
  return "unknown";
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Thought: return "thought";
    case EventKind::ToolCall: return "tool_call";
    case EventKind::Observation: return "observation";
    case EventKind::Final: return "final";
    case EventKind::StepCapReached: return "step_cap_reached";
  }
  return "thought";
}

namespace {

EventKind event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::Thought, EventKind::ToolCall, EventKind::Observation, EventKind::Final,
                 EventKind::StepCapReached}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown transcript event: " + std::string(s), 0);
}

const char* kResearcherPrompt =
    "You are the research agent of a world-model construction team. Your job is to find reliable "
    "background knowledge about the environment described by the user and turn it into a precise, "
    "implementation-ready specification (state and action spaces, transition rules, rewards, "
    "termination, invariants, worked examples). Prefer primary documentation; record every source "
    "you rely on. Never write code.";

const char* kDeveloperPrompt =
    "You are the developer agent of a world-model construction team. Implement the requested world "
    "model as a single self-contained file that follows the research report and fixes every issue "
    "listed in the feedback. When done, answer with exactly one <final> block containing "
    "<code_file_path>relative/path</code_file_path> and <entrypoint_code>the complete file</entrypoint_code>.";

const char* kUnitTesterPrompt =
    "You are the unit-testing agent. Do not modify the artifact under test. Write exactly one test "
    "file at tests/test_env.py with file_tool, run it with run_code, and report. Success means the "
    "test command exited with status 0. Answer with exactly one <final> block holding a JSON object "
    "{\"success\": bool, \"analysis\": str, \"suggest_fix\": str}.";

const char* kSimulationTesterPrompt =
    "You are the simulation-testing agent. Judge the interaction log of the artifact against the task: "
    "the run must be free of exceptions, every transition must be consistent with the specification "
    "(numbers match when the absolute or relative error is at most 1e-3), and all values must be "
    "finite. Answer with exactly one <final> block holding a JSON object "
    "{\"success\": bool, \"analysis\": str, \"suggest_fix\": str}.";

const char* kGamePlayerPrompt =
    "You are playing a text game. Use the take_action tool with one of the listed valid actions per "
    "step. Try to win. Reply with a <final> block once the game has ended.";

constexpr std::string_view kToolSyntaxHelp =
    "\n\nTo call a tool without native function calling, reply with a fenced block:\n"
    "```tool\n{\"name\": \"<tool>\", \"arguments\": {...}}\n```\n"
    "Available tools: ";

}  // namespace

std::set<std::string> role_tools(RoleName name) {
  switch (name) {
    case RoleName::DeepResearcher: return {"browser_search", "browser_open"};
    case RoleName::ModelDeveloper: return {"file_tool", "sandbox", "run_code"};
    case RoleName::SimulationTester: return {"play_env", "file_tool"};
    case RoleName::UnitTester: return {"run_code", "run_bash", "file_tool"};
    case RoleName::GamePlayer: return {"take_action"};
  }
  return {};
}

AgentRole default_role(RoleName name) {
  AgentRole r;
  r.name = name;
  r.allowed_tools = role_tools(name);
  r.max_steps = kDefaultMaxSteps;
  switch (name) {
    case RoleName::DeepResearcher: r.system_prompt = kResearcherPrompt; break;
    case RoleName::ModelDeveloper: r.system_prompt = kDeveloperPrompt; break;
    case RoleName::UnitTester: r.system_prompt = kUnitTesterPrompt; break;
    case RoleName::SimulationTester: r.system_prompt = kSimulationTesterPrompt; break;
    case RoleName::GamePlayer: r.system_prompt = kGamePlayerPrompt; break;
  }
  return r;
}

void to_json(json& j, const TranscriptEvent& e) {
  j = json{{"kind", to_string(e.kind)}, {"step", e.step}, {"text", e.text}};
  if (e.kind == EventKind::ToolCall) {
    j["tool_name"] = e.tool_name;
    j["arguments"] = e.arguments;
  }
}

void from_json(const json& j, TranscriptEvent& e) {
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.step = j.at("step").get<int>();
  e.text = j.value("text", "");
  e.tool_name = j.value("tool_name", "");
  e.arguments = j.value("arguments", "");
}

void write_transcript_jsonl(const fs::path& path, const Transcript& t) {
  std::vector<json> lines;
  lines.push_back(json{{"role", t.role}, {"step_count", t.step_count}});
  for (const auto& e : t.events) lines.emplace_back(e);
  write_jsonl(path, lines);
}

Transcript read_transcript_jsonl(const fs::path& path) {
  auto lines = read_jsonl(path);
  if (lines.empty()) throw ParseError("empty transcript " + path.string(), 0);
  Transcript t;
  t.role = lines[0].at("role").get<std::string>();
  t.step_count = lines[0].at("step_count").get<int>();
  for (std::size_t i = 1; i < lines.size(); ++i) t.events.push_back(lines[i].get<TranscriptEvent>());
  return t;
}

std::optional<std::string> extract_tag(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  auto b = text.find(open);
  if (b == std::string_view::npos) return std::nullopt;
  auto e = text.find(close, b + open.size());
  if (e == std::string_view::npos) return std::nullopt;
  if (text.find(open, e + close.size()) != std::string_view::npos) return std::nullopt;
  return trim(text.substr(b + open.size(), e - b - open.size()));
}

std::optional<std::string> extract_final(std::string_view reply) {
  constexpr std::string_view open = "<final>";
  constexpr std::string_view close = "</final>";
  auto b = reply.find(open);
  if (b == std::string_view::npos) return std::nullopt;
  if (reply.find(open, b + open.size()) != std::string_view::npos) return std::nullopt;
  auto e = reply.find(close, b + open.size());
  if (e == std::string_view::npos) return std::nullopt;
  return std::string(reply.substr(b + open.size(), e - b - open.size()));
}

std::optional<ToolCall> parse_fenced_tool_call(std::string_view text) {
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string_view::npos) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) return std::nullopt;
    auto lang = trim(text.substr(pos + 3, nl - pos - 3));
    auto end = text.find("```", nl + 1);
    if (end == std::string_view::npos) return std::nullopt;
    if (lang == "tool" || lang == "json") {
      auto body = text.substr(nl + 1, end - nl - 1);
      auto j = json::parse(body, nullptr, false);
      if (!j.is_discarded() && j.is_object() && j.contains("name") && j["name"].is_string()) {
        ToolCall tc;
        tc.name = j["name"].get<std::string>();
        if (j.contains("arguments")) {
          tc.arguments = j["arguments"].is_string() ? j["arguments"].get<std::string>() : j["arguments"].dump();
        } else {
          tc.arguments = "{}";
        }
        return tc;
      }
    }
    pos = end + 3;
  }
  return std::nullopt;
}

AgentResult run_agent(const AgentRole& role, std::string_view task_context, Gateway& gateway, ToolInvoker& tools,
                      const DecodingConfig& decoding) {
  if (role.max_steps < 1) throw PreconditionError("max_steps must be positive");
  for (const auto& t : role.allowed_tools) {
    if (!tools.has_tool(t)) throw PreconditionError("tool '" + t + "' is not registered in the toolbelt");
  }

  std::string system = role.system_prompt;
  system += kToolSyntaxHelp;
  bool first = true;
  for (const auto& t : role.allowed_tools) {
    system += (first ? "" : ", ") + t;
    first = false;
  }
  std::vector<ChatMessage> messages{ChatMessage::system(system), ChatMessage::user(std::string(task_context))};
  auto specs = tools.tool_specs(role.allowed_tools);

  AgentResult result;
  result.transcript.role = to_string(role.name);
  auto& events = result.transcript.events;
  std::string last_text;

  for (int step = 1; step <= role.max_steps; ++step) {
    Completion c = gateway.complete(messages, decoding, specs);
    result.usage.input_tokens += c.usage.input_tokens;
    result.usage.output_tokens += c.usage.output_tokens;
    result.transcript.step_count = step;
    const std::string& text = c.reply.content;
    last_text = text;

    std::optional<ToolCall> call = c.reply.tool_call;
    bool fenced = false;
    if (!call) {
      if (auto fin = extract_final(text)) {
        events.push_back({EventKind::Final, step, *fin, {}, {}});
        result.final_output = *fin;
        result.has_final = true;
        return result;
      }
      call = parse_fenced_tool_call(text);
      fenced = call.has_value();
    }

    if (!trim(text).empty()) events.push_back({EventKind::Thought, step, text, {}, {}});

    if (!call) {
      std::string nudge =
          "No tool call and no single <final> block was found in your reply. Call one of your tools "
          "or answer with exactly one <final> block.";
      events.push_back({EventKind::Observation, step, nudge, {}, {}});
      messages.push_back(c.reply);
      messages.push_back(ChatMessage::user(nudge));
      continue;
    }

    events.push_back({EventKind::ToolCall, step, {}, call->name, call->arguments});
    std::string observation;
    if (!role.allowed_tools.contains(call->name)) {
      observation = "ToolDenied: tool '" + call->name + "' is not permitted for role " + to_string(role.name);
    } else {
      json args = json::parse(call->arguments, nullptr, false);
      if (args.is_discarded() || !args.is_object()) {
        observation = "error: malformed tool arguments (expected a JSON object): " + call->arguments;
      } else {
        try {
          observation = tools.invoke(call->name, args);
        } catch (const GatewayError&) {
          throw;
        } catch (const std::exception& e) {
          observation = std::string("error: ") + e.what();
        }
      }
    }
    events.push_back({EventKind::Observation, step, observation, {}, {}});

    if (fenced) {
      messages.push_back(ChatMessage::assistant(text));
      messages.push_back(ChatMessage::user("Observation from " + call->name + ":\n" + observation));
    } else {
      if (call->id.empty()) call->id = "call_" + std::to_string(step);
      ChatMessage assistant = c.reply;
      assistant.tool_call = *call;
      messages.push_back(assistant);
      messages.push_back(ChatMessage::tool(call->id, observation));
    }
  }

  events.push_back({EventKind::StepCapReached, role.max_steps, "step cap reached", {}, {}});
  result.step_cap_reached = true;
  result.final_output = last_text;
  return result;
}

}  // namespace a2w
