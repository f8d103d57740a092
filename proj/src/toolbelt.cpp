#include "a2w/toolbelt.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <unordered_set>

#include "a2w/harness.hpp"

namespace a2w {

// ---- Denylist ----

void Denylist::add(std::string_view pattern) {
  auto p = to_lower(trim(pattern));
  if (p.empty()) return;
  if (auto s = p.find("://"); s != std::string::npos) p = p.substr(s + 3);
  Pattern pat;
  auto slash = p.find('/');
  pat.host = p.substr(0, slash);
  if (slash != std::string::npos) {
    pat.path_prefix = p.substr(slash);
    while (pat.path_prefix.size() > 1 && pat.path_prefix.back() == '/') pat.path_prefix.pop_back();
  }
  if (pat.host.starts_with("*.")) pat.host = pat.host.substr(2);
  if (pat.host.starts_with(".")) pat.host = pat.host.substr(1);
  patterns_.push_back(std::move(pat));
}

Denylist Denylist::parse(std::string_view text) {
  Denylist d;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    d.add(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return d;
}

Denylist Denylist::load(const fs::path& path) { return parse(read_file(path)); }

Denylist Denylist::defaults() {
  Denylist d;
  d.add("huggingface.co/datasets/xdzouyd/text2world");
  d.add("huggingface.co/datasets/thuml/bytesized32-world-model-cot");
  d.add("github.com/nicoladainese96/code-world-models");
  d.add("github.com/openai/gym");
  return d;
}

namespace {

bool host_matches(const std::string& host, const std::string& suffix) {
  if (host == suffix) return true;
  return host.size() > suffix.size() && host.ends_with(suffix) && host[host.size() - suffix.size() - 1] == '.';
}

bool path_matches(const std::string& target, const std::string& prefix) {
  if (prefix.empty() || prefix == "/") return true;
  auto path = to_lower(target);
  if (!path.starts_with(prefix)) return false;
  if (path.size() == prefix.size()) return true;
  char next = path[prefix.size()];
  return next == '/' || next == '?' || next == '#';
}

}  // namespace

bool Denylist::blocks(const Url& url) const {
  return std::any_of(patterns_.begin(), patterns_.end(), [&](const Pattern& p) {
    return host_matches(url.host, p.host) && path_matches(url.target, p.path_prefix);
  });
}

bool Denylist::blocks(std::string_view url) const {
  auto u = parse_url(url);
  return !u || blocks(*u);
}

std::vector<std::string> validate_evidence(const EvidenceEntry& e, const Denylist& deny) {
  std::vector<std::string> v;
  auto u = parse_url(e.url);
  if (!u) {
    v.emplace_back("url is not a valid http(s) URL: " + e.url);
  } else if (deny.blocks(*u)) {
    v.emplace_back("url host is denylisted: " + e.url);
  }
  if (e.retrieved_at == SysSeconds{}) v.emplace_back("missing access timestamp");
  return v;
}

// ---- Search ----

void to_json(json& j, const SearchResult& r) { j = json{{"title", r.title}, {"url", r.url}, {"snippet", r.snippet}}; }

void from_json(const json& j, SearchResult& r) {
  r.title = j.value("title", "");
  r.url = j.at("url").get<std::string>();
  r.snippet = j.value("snippet", "");
}

FixtureSearchBackend::FixtureSearchBackend(fs::path dir) : dir_(std::move(dir)) {}

fs::path FixtureSearchBackend::fixture_path(const fs::path& dir, const std::string& query) {
  return dir / (fnv1a_hex(query) + ".json");
}

std::vector<SearchResult> FixtureSearchBackend::search(const std::string& query, int) {
  if (!fs::is_directory(dir_)) throw BackendUnavailable("search fixture directory missing: " + dir_.string());
  auto p = fixture_path(dir_, query);
  if (!fs::exists(p)) return {};
  auto j = json::parse(read_file(p));
  if (j.is_object() && j.contains("results")) j = j["results"];
  return j.get<std::vector<SearchResult>>();
}

SerperSearchBackend::SerperSearchBackend(std::shared_ptr<HttpTransport> transport, std::string api_key,
                                         std::string endpoint)
    : transport_(std::move(transport)), api_key_(std::move(api_key)), endpoint_(std::move(endpoint)) {}

std::vector<SearchResult> SerperSearchBackend::search(const std::string& query, int k) {
  if (api_key_.empty()) throw BackendUnavailable("search API key not configured");
  HttpHeaders h{{"X-API-KEY", api_key_}};
  HttpResponse res;
  try {
    res = transport_->post(endpoint_, h, json{{"q", query}, {"num", k}}.dump());
  } catch (const TransportFailure& e) {
    throw BackendUnavailable(e.what());
  }
  if (res.status == 429 || res.status == 402 || res.status == 403) {
    throw QuotaExceeded("search quota exceeded (HTTP " + std::to_string(res.status) + ")");
  }
  if (res.status != 200) throw BackendUnavailable("search backend returned HTTP " + std::to_string(res.status));
  auto j = json::parse(res.body, nullptr, false);
  if (j.is_discarded()) throw BackendUnavailable("search backend returned malformed JSON");
  std::vector<SearchResult> out;
  for (const auto& o : j.value("organic", json::array())) {
    out.push_back({o.value("title", ""), o.value("link", ""), o.value("snippet", "")});
  }
  return out;
}

std::vector<SearchResult> browser_search(SearchBackend& backend, const Denylist& deny, const std::string& query,
                                         int k) {
  if (k <= 0) return {};
  auto raw = backend.search(query, k);
  std::vector<SearchResult> out;
  std::unordered_set<std::string> seen;
  for (auto& r : raw) {
    if (deny.blocks(r.url)) continue;
    if (!seen.insert(r.url).second) continue;
    out.push_back(std::move(r));
    if (static_cast<int>(out.size()) == k) break;
  }
  return out;
}

// ---- Browser ----

namespace {

std::string decode_entities(std::string_view s) {
  static const std::pair<std::string_view, std::string_view> kNamed[] = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"}, {"&nbsp;", " "}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      bool done = false;
      for (const auto& [from, to] : kNamed) {
        if (s.substr(i, from.size()) == from) {
          out += to;
          i += from.size();
          done = true;
          break;
        }
      }
      if (done) continue;
      if (i + 2 < s.size() && s[i + 1] == '#') {
        auto semi = s.find(';', i);
        if (semi != std::string_view::npos && semi - i <= 8) {
          auto num = s.substr(i + 2, semi - i - 2);
          long cp = -1;
          try {
            cp = (!num.empty() && (num[0] == 'x' || num[0] == 'X')) ? std::stol(std::string(num.substr(1)), nullptr, 16)
                                                                    : std::stol(std::string(num));
          } catch (...) {
          }
          if (cp > 0 && cp < 0x110000) {
            // UTF-8 encode
            if (cp < 0x80) {
              out += static_cast<char>(cp);
            } else if (cp < 0x800) {
              out += static_cast<char>(0xC0 | (cp >> 6));
              out += static_cast<char>(0x80 | (cp & 0x3F));
            } else if (cp < 0x10000) {
              out += static_cast<char>(0xE0 | (cp >> 12));
              out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
              out += static_cast<char>(0x80 | (cp & 0x3F));
            } else {
              out += static_cast<char>(0xF0 | (cp >> 18));
              out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
              out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
              out += static_cast<char>(0x80 | (cp & 0x3F));
            }
            i = semi + 1;
            continue;
          }
        }
      }
    }
    out += s[i++];
  }
  return out;
}

bool is_block_tag(std::string_view name) {
  static const std::set<std::string_view> kBlocks = {"p",  "div", "br", "li", "tr", "h1", "h2",      "h3",
                                                     "h4", "h5",  "h6", "ul", "ol", "table", "section", "pre",
                                                     "article", "header", "footer", "title"};
  return kBlocks.contains(name);
}

}  // namespace

std::string html_to_text(std::string_view html) {
  std::string text;
  std::string lower = to_lower(html);
  std::size_t i = 0;
  while (i < html.size()) {
    if (html[i] != '<') {
      auto next = html.find('<', i);
      text.append(html.substr(i, next == std::string_view::npos ? std::string_view::npos : next - i));
      i = next == std::string_view::npos ? html.size() : next;
      continue;
    }
    if (lower.compare(i, 4, "<!--") == 0) {
      auto e = lower.find("-->", i + 4);
      i = e == std::string::npos ? html.size() : e + 3;
      continue;
    }
    auto close = html.find('>', i);
    if (close == std::string_view::npos) break;
    std::size_t n = i + 1;
    if (n < html.size() && html[n] == '/') ++n;
    std::size_t ne = n;
    while (ne < close && (std::isalnum(static_cast<unsigned char>(html[ne])))) ++ne;
    std::string name = lower.substr(n, ne - n);
    bool closing = html[i + 1] == '/';
    if (!closing && (name == "script" || name == "style" || name == "noscript" || name == "template")) {
      auto end = lower.find("</" + name, close);
      if (end == std::string::npos) break;
      auto end_close = html.find('>', end);
      i = end_close == std::string_view::npos ? html.size() : end_close + 1;
      continue;
    }
    if (is_block_tag(name)) text += '\n';
    else text += ' ';
    i = close + 1;
  }
  text = decode_entities(text);
  // Collapse runs of spaces within lines and runs of blank lines.
  std::string out;
  out.reserve(text.size());
  bool space = false;
  int newlines = 0;
  for (char c : text) {
    if (c == '\n') {
      if (!out.empty() && newlines < 2) {
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
      }
      ++newlines;
      space = false;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty() && out.back() != '\n') out += ' ';
    space = false;
    newlines = 0;
    out += c;
  }
  return trim(out);
}

std::optional<std::string> PageCache::get(const std::string& url) const {
  std::lock_guard lk(mu_);
  auto it = pages_.find(url);
  if (it == pages_.end()) return std::nullopt;
  return it->second;
}

void PageCache::put(const std::string& url, std::string text) {
  std::lock_guard lk(mu_);
  pages_[url] = std::move(text);
}

std::string browser_open(HttpTransport& transport, const Denylist& deny, const std::string& url, std::size_t max_bytes,
                         PageCache* cache) {
  auto u = parse_url(url);
  if (!u) throw FetchError("invalid URL: " + url);
  if (deny.blocks(*u)) throw DenylistedHost("host is denylisted: " + u->host);
  if (cache) {
    if (auto hit = cache->get(url)) return *hit;
  }
  HttpResponse res;
  try {
    res = transport.get(url);
  } catch (const TransportFailure& e) {
    throw FetchError(e.what());
  }
  if (res.status != 200) throw FetchError("HTTP " + std::to_string(res.status) + " for " + url);
  auto text = truncate_with_marker(html_to_text(res.body), max_bytes);
  if (cache) cache->put(url, text);
  return text;
}

// ---- Files ----

FileAction file_action_from_string(std::string_view s) {
  auto l = to_lower(s);
  if (l == "save" || l == "write") return FileAction::Save;
  if (l == "read") return FileAction::Read;
  if (l == "list") return FileAction::List;
  throw ToolError("unknown file_tool action: " + std::string(s));
}

fs::path resolve_inside(const fs::path& root, std::string_view relative) {
  fs::path rel{std::string(relative)};
  if (rel.is_absolute() || rel.has_root_name()) throw PathEscape("absolute path refused: " + std::string(relative));
  fs::path normal = rel.lexically_normal();
  if (!normal.empty() && *normal.begin() == "..") throw PathEscape("path escapes working directory: " + std::string(relative));
  auto base = fs::weakly_canonical(root);
  auto full = fs::weakly_canonical(base / normal);
  auto r = full.lexically_relative(base);
  if (r.empty() || *r.begin() == "..") throw PathEscape("path escapes working directory: " + std::string(relative));
  return full;
}

std::string file_tool(const fs::path& working_dir, FileAction action, std::string_view path,
                      std::optional<std::string_view> content) {
  switch (action) {
    case FileAction::Save: {
      auto p = resolve_inside(working_dir, path);
      write_file_atomic(p, content.value_or(""));
      return "saved " + std::string(path) + " (" + std::to_string(content.value_or("").size()) + " bytes)";
    }
    case FileAction::Read: {
      auto p = resolve_inside(working_dir, path);
      if (!fs::is_regular_file(p)) throw NotFound("no such file: " + std::string(path));
      return read_file(p);
    }
    case FileAction::List: {
      auto base = path.empty() ? fs::weakly_canonical(working_dir) : resolve_inside(working_dir, path);
      if (!fs::exists(base)) throw NotFound("no such directory: " + std::string(path));
      std::vector<std::string> files;
      auto root = fs::weakly_canonical(working_dir);
      for (const auto& e : fs::recursive_directory_iterator(base)) {
        if (e.is_regular_file()) files.push_back(e.path().lexically_relative(root).generic_string());
      }
      std::sort(files.begin(), files.end());
      return json(files).dump();
    }
  }
  return {};
}

// ---- Execution ----

json to_json_value(const ExecResult& r) {
  return json{{"exit_code", r.exit_code},
              {"stdout_tail", r.stdout_tail},
              {"stderr_tail", r.stderr_tail},
              {"duration_seconds", r.duration_seconds},
              {"timed_out", r.timed_out}};
}

ExecResult run_code(std::string_view command, const SandboxPolicy& policy, Shell shell) {
  static const std::regex kParentRef(R"((^|[\s/'"=:;<>|&(]|\$\{?\w*\}?)\.\.($|[\s/'";<>|&)]))");
  if (std::regex_search(command.begin(), command.end(), kParentRef)) {
    throw PathEscape("command references a parent directory: " + std::string(command));
  }
  if (policy.working_dir.empty()) throw PreconditionError("sandbox working_dir not set");
  fs::create_directories(policy.working_dir);
  SpawnOptions opts;
  opts.argv = {shell == Shell::Bash ? "bash" : "sh", "-c", std::string(command)};
  opts.working_dir = policy.working_dir;
  opts.deny_network = policy.network == NetworkPolicy::Denied;
  opts.env = {{"PYTHONDONTWRITEBYTECODE", "1"}};
  auto o = run_process(opts, policy.wall_clock_timeout_seconds, policy.max_stdout_bytes);
  return ExecResult{o.exit_code, o.stdout_tail, o.stderr_tail, o.duration_seconds, o.timed_out};
}

// ---- Toolbelt ----

Toolbelt::Toolbelt(std::shared_ptr<const ToolbeltContext> ctx, fs::path working_dir)
    : ctx_(std::move(ctx)), dir_(std::move(working_dir)) {
  fs::create_directories(dir_);
}

namespace {

const std::set<std::string> kToolNames = {"browser_search", "browser_open", "file_tool", "run_code",
                                          "run_bash",       "sandbox",      "play_env"};

std::string required_string(const json& args, const char* key) {
  if (!args.contains(key) || !args[key].is_string()) {
    throw ToolError(std::string("missing string argument '") + key + "'");
  }
  return args[key].get<std::string>();
}

}  // namespace

bool Toolbelt::has_tool(const std::string& name) const {
  if (!kToolNames.contains(name)) return false;
  if (name == "browser_search") return ctx_->search != nullptr;
  if (name == "browser_open") return ctx_->fetch != nullptr;
  return true;
}

std::string Toolbelt::invoke(const std::string& name, const json& args) {
  if (name == "browser_search") {
    if (!ctx_->search) throw BackendUnavailable("no search backend configured");
    int k = args.value("k", ctx_->search_k);
    return json(browser_search(*ctx_->search, ctx_->denylist, required_string(args, "query"), k)).dump();
  }
  if (name == "browser_open") {
    if (!ctx_->fetch) throw BackendUnavailable("no fetch transport configured");
    return browser_open(*ctx_->fetch, ctx_->denylist, required_string(args, "url"), ctx_->page_bytes,
                        ctx_->page_cache.get());
  }
  if (name == "file_tool") {
    auto action = file_action_from_string(args.value("action", "read"));
    std::optional<std::string> content;
    if (args.contains("content") && args["content"].is_string()) content = args["content"].get<std::string>();
    std::string path = args.value("path", "");
    if (action != FileAction::List && path.empty()) throw ToolError("missing string argument 'path'");
    return file_tool(dir_, action, path, content ? std::optional<std::string_view>(*content) : std::nullopt);
  }
  if (name == "run_code" || name == "run_bash") {
    std::string command = args.contains("command") ? required_string(args, "command") : required_string(args, "cmd");
    SandboxPolicy policy = ctx_->sandbox;
    policy.working_dir = dir_;
    auto r = run_code(command, policy, name == "run_bash" ? Shell::Bash : Shell::Sh);
    execs_.push_back({name, command, r});
    return to_json_value(r).dump();
  }
  if (name == "sandbox") {
    std::string code = required_string(args, "code");
    auto rel = ".sandbox/snippet_" + std::to_string(execs_.size() + 1) + ".py";
    file_tool(dir_, FileAction::Save, rel, code);
    SandboxPolicy policy = ctx_->sandbox;
    policy.working_dir = dir_;
    std::string command = ctx_->python + " " + rel;
    auto r = run_code(command, policy);
    execs_.push_back({name, command, r});
    return to_json_value(r).dump();
  }
  if (name == "play_env") {
    std::string path = required_string(args, "path");
    auto artifact = resolve_inside(dir_, path);
    if (!fs::exists(artifact)) throw NotFound("no such artifact: " + path);
    PlayConfig cfg = ctx_->play;
    if (args.contains("budget")) cfg.session_budget = args["budget"].get<int>();
    std::vector<json> probes;
    if (args.contains("actions") && args["actions"].is_array()) probes = args["actions"].get<std::vector<json>>();
    auto log = play_env(ctx_->harness_command, artifact, representation_from_string(args.value("kind", "code_env")),
                        cfg, probes);
    json j = log;
    plays_.push_back(j);
    return j.dump();
  }
  throw ToolError("unknown tool: " + name);
}

std::vector<ToolSpec> Toolbelt::tool_specs(const std::set<std::string>& names) const {
  auto obj = [](json props, std::vector<std::string> required) {
    return json{{"type", "object"}, {"properties", std::move(props)}, {"required", std::move(required)}};
  };
  const json str{{"type", "string"}};
  std::vector<ToolSpec> out;
  for (const auto& n : names) {
    if (n == "browser_search") {
      out.push_back({n, "Web search. Returns [{title,url,snippet}].",
                     obj({{"query", str}, {"k", {{"type", "integer"}}}}, {"query"})});
    } else if (n == "browser_open") {
      out.push_back({n, "Fetch a web page and return its readable text.", obj({{"url", str}}, {"url"})});
    } else if (n == "file_tool") {
      out.push_back({n, "Save, read or list files in the working directory.",
                     obj({{"action", {{"type", "string"}, {"enum", {"save", "read", "list"}}}},
                          {"path", str},
                          {"content", str}},
                         {"action"})});
    } else if (n == "run_code" || n == "run_bash") {
      out.push_back({n, "Run a shell command in the sandboxed working directory.", obj({{"command", str}}, {"command"})});
    } else if (n == "sandbox") {
      out.push_back({n, "Execute a Python snippet in the sandbox.", obj({{"code", str}}, {"code"})});
    } else if (n == "play_env") {
      out.push_back({n, "Launch the artifact in the environment harness and play it.",
                     obj({{"path", str},
                          {"kind", {{"type", "string"}, {"enum", {"code_env", "text_game"}}}},
                          {"budget", {{"type", "integer"}}},
                          {"actions", {{"type", "array"}}}},
                         {"path"})});
    }
  }
  return out;
}

}  // namespace a2w
