#pragma once

// Shared by the unit tests and the acceptance binary: paths, temp dirs,
// scripted gateways and the offline pipeline bundle.

#include <memory>
#include <string>
#include <vector>

#include "a2w/config.hpp"
#include "a2w/data_engine.hpp"
#include "a2w/gateway.hpp"
#include "a2w/pddl.hpp"
#include "a2w/pipeline.hpp"

namespace a2w::testsupport {

fs::path fixtures_dir();
std::string fake_harness();
std::string cli_binary();

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

std::shared_ptr<ScriptedGateway> script(const std::vector<json>& entries);

/// "<final>" block a developer would emit for `source` saved at `path`.
std::string developer_final(const std::string& path, const std::string& source);

inline const std::string kBlockedUrl = "https://github.com/openai/gym/blob/master/gym/envs/toy_text/cliffwalking.py";
inline const std::string kDocsUrl = "https://gymnasium.farama.org/environments/toy_text/cliff_walking/";
inline const std::string kSearchQuery = "cliff walking gridworld rules";

/// Writes an offline pipeline setup under `dir`: config.json, script.jsonl,
/// search/ and pages/ fixtures. Task "cliff-ok" is fixed on its second turn;
/// task "cliff-bad" never is.
void write_dry_run_bundle(const fs::path& dir);

struct DryRun {
  BatchOutcome outcome;
  std::shared_ptr<RecordingTransport> fetches;
  fs::path runs_root;
};

/// Runs every task of the bundle in `dir` with the scripted gateway, a
/// recording fetch transport and runs written to `runs_root`.
DryRun run_dry_pipeline(const fs::path& dir, const fs::path& runs_root);

/// Edit distance by the textbook recursion (delete / insert / substitute on
/// the first characters), memoized on suffix positions. Bytes, not code
/// points: callers pass ASCII.
std::size_t levenshtein_oracle(const std::string& a, const std::string& b);

/// Copy of `d` with every action variable renamed (?x -> ?v_<action>_<k>).
PddlDomainAst alpha_rename(const PddlDomainAst& d);

}  // namespace a2w::testsupport
