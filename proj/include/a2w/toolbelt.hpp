#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "a2w/agent.hpp"
#include "a2w/core.hpp"
#include "a2w/http.hpp"
#include "a2w/subprocess.hpp"

namespace a2w {

class ToolError : public Error {
 public:
  using Error::Error;
};
class PathEscape : public ToolError {
 public:
  using ToolError::ToolError;
};
class NotFound : public ToolError {
 public:
  using ToolError::ToolError;
};
class DenylistedHost : public ToolError {
 public:
  using ToolError::ToolError;
};
class FetchError : public ToolError {
 public:
  using ToolError::ToolError;
};
class BackendUnavailable : public ToolError {
 public:
  using ToolError::ToolError;
};
class QuotaExceeded : public ToolError {
 public:
  using ToolError::ToolError;
};

/// Hosts the research tools must never contact. Each pattern is a host
/// suffix ("example.org" blocks example.org and *.example.org), optionally
/// followed by a path prefix ("github.com/openai/gym"). Matching is
/// case-insensitive.
class Denylist {
 public:
  struct Pattern {
    std::string host;
    std::string path_prefix;  // empty, or starts with '/'
  };

  Denylist() = default;
  /// One pattern per line; '#' starts a comment.
  static Denylist parse(std::string_view text);
  static Denylist load(const fs::path& path);
  /// Benchmark source pages whose contents would leak gold solutions.
  static Denylist defaults();

  void add(std::string_view pattern);
  bool blocks(const Url& url) const;
  /// Unparseable URLs are treated as blocked.
  bool blocks(std::string_view url) const;
  const std::vector<Pattern>& patterns() const { return patterns_; }

 private:
  std::vector<Pattern> patterns_;
};

/// Empty when valid; otherwise the reasons the entry is unacceptable.
std::vector<std::string> validate_evidence(const EvidenceEntry& e, const Denylist& deny);

struct SearchResult {
  std::string title;
  std::string url;
  std::string snippet;

  bool operator==(const SearchResult&) const = default;
};

void to_json(json& j, const SearchResult& r);
void from_json(const json& j, SearchResult& r);

class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual std::vector<SearchResult> search(const std::string& query, int k) = 0;
};

/// Results from `<dir>/<fnv1a_hex(query)>.json` (an array of
/// {title,url,snippet}). A missing file means no results.
class FixtureSearchBackend : public SearchBackend {
 public:
  explicit FixtureSearchBackend(fs::path dir);
  std::vector<SearchResult> search(const std::string& query, int k) override;
  static fs::path fixture_path(const fs::path& dir, const std::string& query);

 private:
  fs::path dir_;
};

/// Live web search through the Serper API.
class SerperSearchBackend : public SearchBackend {
 public:
  SerperSearchBackend(std::shared_ptr<HttpTransport> transport, std::string api_key,
                      std::string endpoint = "https://google.serper.dev/search");
  std::vector<SearchResult> search(const std::string& query, int k) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string api_key_;
  std::string endpoint_;
};

/// Denylisted hosts removed, duplicate URLs dropped (first occurrence kept),
/// at most k results.
std::vector<SearchResult> browser_search(SearchBackend& backend, const Denylist& deny, const std::string& query,
                                         int k);

/// Visible text of an HTML document: tags, scripts and styles removed, common
/// entities decoded, whitespace collapsed.
std::string html_to_text(std::string_view html);

/// Caches extracted page text per URL for the lifetime of one task.
class PageCache {
 public:
  std::optional<std::string> get(const std::string& url) const;
  void put(const std::string& url, std::string text);

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> pages_;
};

/// Throws DenylistedHost before any request is issued for blocked URLs.
std::string browser_open(HttpTransport& transport, const Denylist& deny, const std::string& url,
                         std::size_t max_bytes, PageCache* cache = nullptr);

enum class FileAction { Save, Read, List };

FileAction file_action_from_string(std::string_view s);

/// Normalizes `relative` against `root`; throws PathEscape when the result
/// would leave `root` (including through symlinks).
fs::path resolve_inside(const fs::path& root, std::string_view relative);

std::string file_tool(const fs::path& working_dir, FileAction action, std::string_view path,
                      std::optional<std::string_view> content = std::nullopt);

enum class NetworkPolicy { Denied, Allowed };

struct SandboxPolicy {
  double wall_clock_timeout_seconds = 60.0;
  std::size_t max_stdout_bytes = 64 * 1024;
  fs::path working_dir;
  NetworkPolicy network = NetworkPolicy::Denied;
};

struct ExecResult {
  int exit_code = 0;
  std::string stdout_tail;
  std::string stderr_tail;
  double duration_seconds = 0.0;
  bool timed_out = false;
};

json to_json_value(const ExecResult& r);

enum class Shell { Sh, Bash };

/// Runs `command` through the shell inside the policy's working directory.
/// Commands that reference a parent directory ("..") are refused with
/// PathEscape. Timeouts are reported in the result, not thrown.
ExecResult run_code(std::string_view command, const SandboxPolicy& policy, Shell shell = Shell::Sh);

struct PlayConfig {
  int session_budget = 50;
  double session_timeout_seconds = 120.0;
  double request_timeout_seconds = 10.0;
  std::uint64_t seed = 0;
};

/// Everything a task run's tools share. One context per task.
struct ToolbeltContext {
  Denylist denylist = Denylist::defaults();
  std::shared_ptr<SearchBackend> search;
  std::shared_ptr<HttpTransport> fetch;
  std::shared_ptr<PageCache> page_cache = std::make_shared<PageCache>();
  // argv of the environment harness; "{artifact}" is replaced by the path.
  std::vector<std::string> harness_command{"python3", "-m", "a2w_harness", "{artifact}"};
  SandboxPolicy sandbox;
  PlayConfig play;
  std::size_t page_bytes = 16 * 1024;
  int search_k = 5;
  std::string python = "python3";
};

struct ExecRecord {
  std::string tool;
  std::string command;
  ExecResult result;
};

/// Tool provider bound to one working directory.
class Toolbelt : public ToolInvoker {
 public:
  Toolbelt(std::shared_ptr<const ToolbeltContext> ctx, fs::path working_dir);

  bool has_tool(const std::string& name) const override;
  std::string invoke(const std::string& name, const json& arguments) override;
  std::vector<ToolSpec> tool_specs(const std::set<std::string>& names) const override;

  const fs::path& working_dir() const { return dir_; }
  const ToolbeltContext& context() const { return *ctx_; }
  /// Every run_code / run_bash / sandbox execution, in order.
  const std::vector<ExecRecord>& exec_log() const { return execs_; }
  /// Every play_env log returned, in order.
  const std::vector<json>& play_log() const { return plays_; }

 private:
  std::shared_ptr<const ToolbeltContext> ctx_;
  fs::path dir_;
  std::vector<ExecRecord> execs_;
  std::vector<json> plays_;
};

}  // namespace a2w
