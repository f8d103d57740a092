#pragma once

// Chat-completion access for every agent. `HttpGateway` talks to any
// OpenAI-compatible endpoint; `ScriptedGateway` replays canned replies so
// that whole pipeline runs are deterministic under test.

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "a2w/core.hpp"
#include "a2w/http.hpp"

namespace a2w {

enum class Role { System, User, Assistant, Tool };

std::string to_string(Role r);
Role role_from_string(std::string_view s);

struct ToolCall {
  std::string id;
  std::string name;
  std::string arguments;  // raw JSON text, exactly as produced by the model

  bool operator==(const ToolCall&) const = default;
};

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  std::optional<ToolCall> tool_call;
  // Set on Tool-role messages; names the call this message answers.
  std::string tool_call_id;

  bool operator==(const ChatMessage&) const = default;

  static ChatMessage system(std::string text) { return {Role::System, std::move(text), {}, {}}; }
  static ChatMessage user(std::string text) { return {Role::User, std::move(text), {}, {}}; }
  static ChatMessage assistant(std::string text) { return {Role::Assistant, std::move(text), {}, {}}; }
  static ChatMessage tool(std::string call_id, std::string text) {
    return {Role::Tool, std::move(text), {}, std::move(call_id)};
  }
};

void to_json(json& j, const ChatMessage& m);
void from_json(const json& j, ChatMessage& m);

struct DecodingConfig {
  double temperature = 0.0;
  double top_p = 1.0;
  int max_output_tokens = 4096;

  void validate() const;
};

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  bool operator==(const TokenUsage&) const = default;
};

struct Completion {
  ChatMessage reply;
  TokenUsage usage;
};

/// Function-calling schema advertised to endpoints that support tools.
struct ToolSpec {
  std::string name;
  std::string description;
  json parameters = json::object();
};

class GatewayError : public Error {
 public:
  using Error::Error;
};
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class ProtocolError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class BudgetExceeded : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class UnmatchedPrompt : public GatewayError {
 public:
  explicit UnmatchedPrompt(std::string prompt_hash)
      : GatewayError("no script entry matches prompt " + prompt_hash), hash_(std::move(prompt_hash)) {}
  const std::string& prompt_hash() const noexcept { return hash_; }

 private:
  std::string hash_;
};
class ScriptExhausted : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class Gateway {
 public:
  virtual ~Gateway() = default;

  /// Sends one completion request; the reply always has Role::Assistant.
  /// Usage is added to the session exactly once per successful call.
  Completion complete(std::span<const ChatMessage> messages, const DecodingConfig& cfg,
                      std::span<const ToolSpec> tools = {});

  TokenUsage session_usage() const;
  // Total (input + output) tokens this session may consume.
  void set_token_cap(std::optional<std::int64_t> cap) { cap_ = cap; }

 protected:
  virtual Completion do_complete(std::span<const ChatMessage> messages, const DecodingConfig& cfg,
                                 std::span<const ToolSpec> tools) = 0;

 private:
  std::atomic<std::int64_t> input_{0};
  std::atomic<std::int64_t> output_{0};
  std::optional<std::int64_t> cap_;
};

struct HttpGatewayConfig {
  std::string api_base;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::string model;
  int max_attempts = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1), std::chrono::seconds(2),
                                                 std::chrono::seconds(4)};

  /// Reads A2W_API_BASE, A2W_API_KEY and A2W_MODEL.
  static HttpGatewayConfig from_env();
};

class HttpGateway : public Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpGateway(HttpGatewayConfig cfg, std::shared_ptr<HttpTransport> transport, Sleeper sleeper = {});

  // Exposed for tests of the wire format.
  json build_request(std::span<const ChatMessage> messages, const DecodingConfig& cfg,
                     std::span<const ToolSpec> tools) const;
  static Completion parse_response(const std::string& body);

 protected:
  Completion do_complete(std::span<const ChatMessage> messages, const DecodingConfig& cfg,
                         std::span<const ToolSpec> tools) override;

 private:
  HttpGatewayConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
};

/// One canned reply. Entries are tried in file order; the first whose
/// `match` is a substring of the last user-side message (User or Tool role)
/// answers. "*" matches everything. Entries are single-use unless `repeat`.
struct ScriptEntry {
  std::string match = "*";
  std::string reply;
  std::optional<ToolCall> tool_call;
  TokenUsage usage;
  bool repeat = false;
};

class ScriptedGateway : public Gateway {
 public:
  explicit ScriptedGateway(std::vector<ScriptEntry> entries);

  std::size_t remaining() const;

 protected:
  Completion do_complete(std::span<const ChatMessage> messages, const DecodingConfig& cfg,
                         std::span<const ToolSpec> tools) override;

 private:
  std::vector<ScriptEntry> entries_;
  std::vector<bool> used_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

/// Parses a JSON-lines script. Throws ParseError naming the offending line.
std::shared_ptr<ScriptedGateway> load_script(const fs::path& path);
ScriptEntry parse_script_entry(const json& j);

}  // namespace a2w
