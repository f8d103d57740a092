#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace a2w {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Root of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// 64-bit FNV-1a, rendered as 16 lowercase hex digits. Stable across platforms.
std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a_hex(std::string_view data);

// splitmix64 step; used to derive independent per-episode seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

std::string read_file(const fs::path& path);
// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view content);

std::vector<json> read_jsonl(const fs::path& path);
void write_jsonl(const fs::path& path, const std::vector<json>& records);
void append_jsonl(const fs::path& path, const json& record);

// Largest prefix of `text` no longer than `max_bytes` that does not split a
// UTF-8 sequence.
std::string_view utf8_prefix(std::string_view text, std::size_t max_bytes);
// Last `max_bytes` bytes, advanced past any split UTF-8 continuation bytes.
std::string utf8_tail(std::string_view text, std::size_t max_bytes);

inline constexpr std::string_view kTruncationMarker = "\n[truncated]";

// Returns `text` unchanged when it fits; otherwise a prefix followed by
// `marker` whose total size is at most `limit` bytes.
std::string truncate_with_marker(std::string_view text, std::size_t limit,
                                 std::string_view marker = kTruncationMarker);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

using SysSeconds = std::chrono::time_point<std::chrono::system_clock, std::chrono::seconds>;

std::string format_iso8601(SysSeconds t);
SysSeconds parse_iso8601(std::string_view text);

/// Injectable time source. Pipelines that must replay byte-for-byte use
/// `Clock::frozen`.
struct Clock {
  std::function<SysSeconds()> now;
  std::function<double()> elapsed_seconds;

  static Clock system();
  static Clock frozen(SysSeconds at);
};

}  // namespace a2w
