#pragma once

// Interfaces every environment and text game satisfies, whether native,
// scripted for tests, or served by a harness subprocess.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "a2w/util.hpp"

namespace a2w {

// Discrete states and actions are one-element vectors holding the index.
using State = std::vector<double>;
using Action = std::vector<double>;

struct Space {
  enum class Kind { Discrete, Box };
  Kind kind = Kind::Discrete;
  int n = 1;                   // Discrete
  std::vector<double> low;     // Box, flattened
  std::vector<double> high;    // Box, flattened
  std::vector<int> shape;      // Box

  static Space discrete(int n);
  static Space box(std::vector<double> low, std::vector<double> high, std::vector<int> shape = {});
  std::size_t flat_size() const;
  bool operator==(const Space&) const = default;
};

std::vector<std::string> validate_space(const Space& s);

struct EnvSpace {
  Space action;
  Space observation;
  std::optional<double> dt;
  std::optional<int> frame_skip;

  bool operator==(const EnvSpace&) const = default;
};

void to_json(json& j, const Space& s);
void from_json(const json& j, Space& s);
void to_json(json& j, const EnvSpace& s);
void from_json(const json& j, EnvSpace& s);

struct StepResult {
  State next;
  double reward = 0.0;
  bool done = false;
};

/// Raised by an environment for invalid input (wrong state length, bad action).
class EnvError : public Error {
 public:
  EnvError(std::string type, const std::string& message) : Error(type + ": " + message), type_(std::move(type)) {}
  const std::string& type() const noexcept { return type_; }

 private:
  std::string type_;
};

class EnvHandle {
 public:
  virtual ~EnvHandle() = default;
  virtual EnvSpace spaces() const = 0;
  virtual State reset(std::uint64_t seed) = 0;
  virtual void set_state(const State& s) = 0;
  virtual StepResult step(const Action& a) = 0;
  /// Independent handle in the same state and configuration.
  virtual std::unique_ptr<EnvHandle> clone() const = 0;
};

struct GameStep {
  std::string observation;
  double score = 0.0;
  bool done = false;
  bool won = false;
};

class GameHandle {
 public:
  virtual ~GameHandle() = default;
  /// (Re)starts the game and returns the opening observation.
  virtual std::string init() = 0;
  virtual std::vector<std::string> actions() = 0;
  virtual GameStep step(const std::string& action) = 0;
};

}  // namespace a2w
