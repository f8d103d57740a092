#pragma once

// One declarative JSON file for a whole run; command-line flags override it.
// Relative paths inside the file resolve against the file's directory.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "a2w/cwm.hpp"
#include "a2w/gateway.hpp"
#include "a2w/pipeline.hpp"
#include "a2w/textgame.hpp"
#include "a2w/toolbelt.hpp"

namespace a2w {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct SearchConfig {
  std::string backend = "none";  // none | fixture | serper
  fs::path fixture_dir;
  std::string api_key_env = "SERPER_API_KEY";
};

struct FetchConfig {
  std::string backend = "none";  // none | fixture | network
  fs::path fixture_dir;
  double timeout_seconds = 30.0;
};

struct AppConfig {
  fs::path base_dir;
  HttpGatewayConfig gateway;
  std::optional<std::int64_t> token_cap;
  DecodingConfig decoding;
  std::vector<fs::path> denylist_files;
  bool default_denylist = true;
  SearchConfig search;
  FetchConfig fetch;
  std::vector<std::string> harness_command{"python3", "-m", "a2w_harness", "{artifact}"};
  SandboxPolicy sandbox;
  PlayConfig play;
  std::vector<TaskSpec> tasks;
  fs::path runs_root = "runs";
  int max_steps = kDefaultMaxSteps;
  int parallel = 1;
  PlannerConfig planner;
  CrawlConfig crawl;
  std::optional<SysSeconds> frozen_clock;
};

/// Task records; missing budgets take the per-representation defaults.
TaskSpec task_from_config(const json& j, const fs::path& base_dir);

AppConfig parse_config(const json& j, const fs::path& base_dir);
/// Throws ConfigError for unreadable files, malformed JSON and invalid values.
AppConfig load_config(const fs::path& path);

PlannerConfig planner_from_json(const json& j, PlannerConfig base = {});
CrawlConfig crawl_from_json(const json& j, CrawlConfig base = {});

/// Search backend, fetch transport and denylist built from the config.
/// `fetch_override` (for tests) replaces the configured fetch transport.
std::shared_ptr<ToolbeltContext> make_toolbelt_context(const AppConfig& cfg,
                                                       std::shared_ptr<HttpTransport> fetch_override = nullptr);

PipelineOptions make_pipeline_options(const AppConfig& cfg);

}  // namespace a2w
