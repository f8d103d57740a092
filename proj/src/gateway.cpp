#include "a2w/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

namespace a2w {

std::string to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  if (s == "tool") return Role::Tool;
  throw ParseError("unknown chat role: " + std::string(s), 0);
}

void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", to_string(m.role)}, {"content", m.content}};
  if (m.tool_call) {
    j["tool_call"] = {{"id", m.tool_call->id}, {"name", m.tool_call->name}, {"arguments", m.tool_call->arguments}};
  }
  if (!m.tool_call_id.empty()) j["tool_call_id"] = m.tool_call_id;
}

void from_json(const json& j, ChatMessage& m) {
  m.role = role_from_string(j.at("role").get<std::string>());
  m.content = j.value("content", "");
  m.tool_call.reset();
  if (j.contains("tool_call")) {
    const auto& t = j["tool_call"];
    m.tool_call = ToolCall{t.value("id", ""), t.at("name").get<std::string>(), t.value("arguments", "{}")};
  }
  m.tool_call_id = j.value("tool_call_id", "");
}

void DecodingConfig::validate() const {
  if (!(temperature >= 0.0)) throw PreconditionError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw PreconditionError("top_p must be in (0, 1]");
  if (max_output_tokens < 1) throw PreconditionError("max_output_tokens must be positive");
}

Completion Gateway::complete(std::span<const ChatMessage> messages, const DecodingConfig& cfg,
                             std::span<const ToolSpec> tools) {
  if (messages.empty()) throw PreconditionError("complete() requires at least one message");
  cfg.validate();
  for (const auto& m : messages) {
    if (m.role == Role::Tool && m.tool_call_id.empty()) {
      throw PreconditionError("tool message without a correlating call id");
    }
  }
  if (cap_ && input_.load() + output_.load() >= *cap_) {
    throw BudgetExceeded("session token cap of " + std::to_string(*cap_) + " reached");
  }
  Completion c = do_complete(messages, cfg, tools);
  c.reply.role = Role::Assistant;
  input_.fetch_add(c.usage.input_tokens);
  output_.fetch_add(c.usage.output_tokens);
  return c;
}

TokenUsage Gateway::session_usage() const { return TokenUsage{input_.load(), output_.load()}; }

// ---- HTTP ----

HttpGatewayConfig HttpGatewayConfig::from_env() {
  HttpGatewayConfig c;
  if (const char* v = std::getenv("A2W_API_BASE")) c.api_base = v;
  if (const char* v = std::getenv("A2W_API_KEY")) c.api_key = v;
  if (const char* v = std::getenv("A2W_MODEL")) c.model = v;
  return c;
}

HttpGateway::HttpGateway(HttpGatewayConfig cfg, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), sleep_(std::move(sleeper)) {
  if (cfg_.api_base.empty()) throw PreconditionError("gateway endpoint not configured (A2W_API_BASE)");
  while (!cfg_.api_base.empty() && cfg_.api_base.back() == '/') cfg_.api_base.pop_back();
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (cfg_.max_attempts < 1) cfg_.max_attempts = 1;
}

json HttpGateway::build_request(std::span<const ChatMessage> messages, const DecodingConfig& cfg,
                                std::span<const ToolSpec> tools) const {
  json msgs = json::array();
  for (const auto& m : messages) {
    json o{{"role", to_string(m.role)}, {"content", m.content}};
    if (m.tool_call) {
      o["tool_calls"] = json::array({json{{"id", m.tool_call->id},
                                          {"type", "function"},
                                          {"function", {{"name", m.tool_call->name},
                                                        {"arguments", m.tool_call->arguments}}}}});
    }
    if (m.role == Role::Tool) o["tool_call_id"] = m.tool_call_id;
    msgs.push_back(std::move(o));
  }
  json req{{"model", cfg_.model},
           {"messages", msgs},
           {"temperature", cfg.temperature},
           {"top_p", cfg.top_p},
           {"max_tokens", cfg.max_output_tokens}};
  if (!tools.empty()) {
    json ts = json::array();
    for (const auto& t : tools) {
      ts.push_back({{"type", "function"},
                    {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
    }
    req["tools"] = ts;
  }
  return req;
}

Completion HttpGateway::parse_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
  try {
    const auto& msg = j.at("choices").at(0).at("message");
    Completion c;
    c.reply.role = Role::Assistant;
    if (msg.contains("content") && msg["content"].is_string()) c.reply.content = msg["content"].get<std::string>();
    if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
      const auto& tc = msg["tool_calls"][0];
      const auto& fn = tc.at("function");
      std::string args = fn.contains("arguments") && fn["arguments"].is_string() ? fn["arguments"].get<std::string>()
                                                                                  : fn.value("arguments", json::object()).dump();
      c.reply.tool_call = ToolCall{tc.value("id", ""), fn.at("name").get<std::string>(), args};
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      c.usage.input_tokens = j["usage"].value("prompt_tokens", 0);
      c.usage.output_tokens = j["usage"].value("completion_tokens", 0);
    }
    return c;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed chat completion: ") + e.what());
  }
}

Completion HttpGateway::do_complete(std::span<const ChatMessage> messages, const DecodingConfig& cfg,
                                    std::span<const ToolSpec> tools) {
  const std::string url = cfg_.api_base + "/chat/completions";
  const std::string body = build_request(messages, cfg, tools).dump();
  HttpHeaders headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    if (attempt > 0) {
      auto idx = std::min<std::size_t>(attempt - 1, cfg_.backoff.size() - 1);
      sleep_(cfg_.backoff.empty() ? std::chrono::milliseconds(0) : cfg_.backoff[idx]);
    }
    HttpResponse res;
    try {
      res = transport_->post(url, headers, body);
    } catch (const TransportFailure& e) {
      last_error = e.what();
      continue;
    }
    if (res.status == 429 || res.status >= 500) {
      last_error = "HTTP " + std::to_string(res.status);
      continue;
    }
    if (res.status != 200) {
      throw ProtocolError("HTTP " + std::to_string(res.status) + ": " + utf8_tail(res.body, 500));
    }
    return parse_response(res.body);
  }
  throw TransportError("gave up after " + std::to_string(cfg_.max_attempts) + " attempts: " + last_error);
}

// ---- Scripted ----

ScriptedGateway::ScriptedGateway(std::vector<ScriptEntry> entries)
    : entries_(std::move(entries)), used_(entries_.size(), false) {}

std::size_t ScriptedGateway::remaining() const {
  std::lock_guard lk(mu_);
  std::size_t n = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) n += (entries_[i].repeat || !used_[i]) ? 1 : 0;
  return n;
}

Completion ScriptedGateway::do_complete(std::span<const ChatMessage> messages, const DecodingConfig&,
                                        std::span<const ToolSpec>) {
  std::string prompt;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User || it->role == Role::Tool) {
      prompt = it->content;
      break;
    }
  }
  std::lock_guard lk(mu_);
  bool any_left = false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!e.repeat && used_[i]) continue;
    any_left = true;
    if (e.match == "*" || prompt.find(e.match) != std::string::npos) {
      if (!e.repeat) used_[i] = true;
      ++calls_;
      Completion c;
      c.reply = ChatMessage::assistant(e.reply);
      if (e.tool_call) {
        c.reply.tool_call = *e.tool_call;
        if (c.reply.tool_call->id.empty()) c.reply.tool_call->id = "call_" + std::to_string(calls_);
      }
      c.usage = e.usage;
      return c;
    }
  }
  if (!any_left) throw ScriptExhausted("scripted gateway has no entries left");
  throw UnmatchedPrompt(fnv1a_hex(prompt));
}

ScriptEntry parse_script_entry(const json& j) {
  if (!j.is_object()) throw ParseError("script entry must be a JSON object", 0);
  ScriptEntry e;
  e.match = j.value("match", "*");
  e.reply = j.value("reply", "");
  e.repeat = j.value("repeat", false);
  if (j.contains("tool_call")) {
    const auto& t = j["tool_call"];
    ToolCall tc;
    tc.id = t.value("id", "");
    tc.name = t.at("name").get<std::string>();
    if (t.contains("arguments")) tc.arguments = t["arguments"].is_string() ? t["arguments"].get<std::string>()
                                                                           : t["arguments"].dump();
    else tc.arguments = "{}";
    e.tool_call = tc;
  }
  if (j.contains("usage")) {
    const auto& u = j["usage"];
    if (u.is_array()) {
      e.usage = TokenUsage{u.at(0).get<std::int64_t>(), u.at(1).get<std::int64_t>()};
    } else {
      e.usage = TokenUsage{u.value("input_tokens", std::int64_t{0}), u.value("output_tokens", std::int64_t{0})};
    }
  }
  return e;
}

std::shared_ptr<ScriptedGateway> load_script(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open script " + path.string(), 0);
  std::vector<ScriptEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      entries.push_back(parse_script_entry(json::parse(t)));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return std::make_shared<ScriptedGateway>(std::move(entries));
}

}  // namespace a2w
