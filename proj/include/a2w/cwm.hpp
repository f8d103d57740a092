#pragma once

// Code-world-model evaluation: transition-prediction accuracy, rollout
// returns, MCTS / CEM planners and the normalized-return metric.

#include <functional>
#include <random>

#include "a2w/env.hpp"

namespace a2w {

struct Transition {
  State s;
  Action a;
  double r = 0.0;
  State s_next;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

void to_json(json& j, const Transition& t);
void from_json(const json& j, Transition& t);

std::vector<Transition> read_transitions(const fs::path& path);
void write_transitions(const fs::path& path, const std::vector<Transition>& data);

using Rng = std::mt19937_64;

Action sample_action(const Space& space, Rng& rng);

/// `count` transitions from a uniform-random policy; the episode restarts on
/// done or after `horizon` steps. Episode k is reset with mix_seed(seed, k).
std::vector<Transition> generate_transitions(EnvHandle& env, std::size_t count, std::uint64_t seed, int horizon = 100);

inline constexpr double kDefaultTolerance = 1e-3;

/// Discrete states compare exactly; Box states by max-abs error <= tol.
bool states_match(const Space& obs, const State& a, const State& b, double tol);

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t transitions = 0;
  std::size_t model_errors = 0;
  std::vector<std::string> error_log;
};

/// Mean over transitions of (1/3)[s' ok] + (1/3)[r ok] + (1/3)[d ok].
AccuracyResult prediction_accuracy(EnvHandle& model, const std::vector<Transition>& data,
                                   double tol = kDefaultTolerance);

using Policy = std::function<Action(EnvHandle& env, const State& s, int t, Rng& rng)>;

Policy random_policy(const Space& action_space);

struct RolloutResult {
  double mean_return = 0.0;
  std::vector<double> returns;
  std::vector<std::uint64_t> seeds;
  int aborted = 0;  // episodes cut short by an environment exception
};

/// Episode i is reset with mix_seed(seed, i) and its policy RNG is seeded
/// with mix_seed(that, 1).
RolloutResult rollout_return(EnvHandle& env, const Policy& policy, int episodes, int horizon, std::uint64_t seed);

enum class PlannerKind { Mcts, Cem };

struct PlannerConfig {
  PlannerKind kind = PlannerKind::Mcts;
  int budget = 200;         // MCTS simulations
  int horizon = 100;        // episode length; MCTS rollouts run to its end
  double exploration = 1.4142135623730951;
  int population = 64;      // CEM
  double elite_fraction = 0.1;
  int iterations = 8;
  int plan_horizon = 30;    // CEM sequence length
  std::vector<double> init_mean;  // CEM, empty = centre of the box
  std::vector<double> init_std;   // CEM, empty = half the box width
  int episodes = 10;
  std::uint64_t seed = 0;
};

std::vector<std::string> validate_planner(const PlannerConfig& cfg);

/// UCT from `state` inside `model`. `depth_left` bounds every simulation.
Action mcts_plan(EnvHandle& model, const State& state, const PlannerConfig& cfg, Rng& rng, int depth_left);
Action mcts_plan(EnvHandle& model, const State& state, const PlannerConfig& cfg);

/// Cross-entropy search over action sequences; returns the clipped first
/// action of the final mean.
Action cem_plan(EnvHandle& model, const State& state, const PlannerConfig& cfg, Rng& rng);
Action cem_plan(EnvHandle& model, const State& state, const PlannerConfig& cfg);

/// Policy that plans inside `model` (kept in sync with the acting env's state).
Policy planner_policy(EnvHandle& model, const PlannerConfig& cfg);

inline constexpr double kDegenerateEpsilon = 1e-9;

struct NormalizedReturn {
  double value = 0.0;       // NaN when degenerate
  bool degenerate = false;  // |R_true - R_rand| below kDegenerateEpsilon
  double r_model = 0.0;
  double r_true = 0.0;
  double r_rand = 0.0;
  int episodes = 0;
  std::vector<std::uint64_t> seeds;
};

void to_json(json& j, const NormalizedReturn& n);

/// (R_model - R_rand) / (R_true - R_rand). The model policy plans in a clone
/// of `model` and acts in a clone of `true_env`; all three policies see the
/// same episode seeds.
NormalizedReturn normalized_return(const EnvHandle& model, const EnvHandle& true_env, const PlannerConfig& cfg);

// ---- native environments ----

class UnknownEnv : public Error {
 public:
  using Error::Error;
};

/// 4x12 grid, start 36, goal 47, cliff 37..46. Actions 0 up, 1 right,
/// 2 down, 3 left. -1 per step; stepping into the cliff costs -100 and
/// returns to the start. Done only on reaching the goal.
class CliffWalkingEnv : public EnvHandle {
 public:
  static constexpr int kRows = 4, kCols = 12, kStart = 36, kGoal = 47;

  EnvSpace spaces() const override;
  State reset(std::uint64_t seed) override;
  void set_state(const State& s) override;
  StepResult step(const Action& a) override;
  std::unique_ptr<EnvHandle> clone() const override { return std::make_unique<CliffWalkingEnv>(*this); }

  int position() const { return pos_; }
  static bool is_cliff(int cell) { return cell > kStart && cell < kGoal; }

 private:
  int pos_ = kStart;
};

std::unique_ptr<EnvHandle> reference_env(std::string_view name);

/// Adds `shift` and multiplies by `scale`: r' = scale * r + shift.
class RewardTransformEnv : public EnvHandle {
 public:
  RewardTransformEnv(std::unique_ptr<EnvHandle> inner, double scale, double shift);
  EnvSpace spaces() const override { return inner_->spaces(); }
  State reset(std::uint64_t seed) override { return inner_->reset(seed); }
  void set_state(const State& s) override { inner_->set_state(s); }
  StepResult step(const Action& a) override;
  std::unique_ptr<EnvHandle> clone() const override;

 private:
  std::unique_ptr<EnvHandle> inner_;
  double scale_, shift_;
};

/// Never reports done: after the inner episode ends, the state is frozen and
/// further steps pay 0. Makes every episode run the full horizon.
class AbsorbingEnv : public EnvHandle {
 public:
  explicit AbsorbingEnv(std::unique_ptr<EnvHandle> inner);
  EnvSpace spaces() const override { return inner_->spaces(); }
  State reset(std::uint64_t seed) override;
  void set_state(const State& s) override;
  StepResult step(const Action& a) override;
  std::unique_ptr<EnvHandle> clone() const override;

 private:
  std::unique_ptr<EnvHandle> inner_;
  State last_;
  bool absorbed_ = false;
};

/// Random next state, random reward in [reward_low, 0] and done with
/// probability `done_prob`, whatever the input.
class GarbageEnv : public EnvHandle {
 public:
  GarbageEnv(EnvSpace spaces, std::uint64_t seed, double reward_low = -100.0, double done_prob = 0.5);
  EnvSpace spaces() const override { return spaces_; }
  State reset(std::uint64_t seed) override;
  void set_state(const State&) override {}
  StepResult step(const Action& a) override;
  std::unique_ptr<EnvHandle> clone() const override { return std::make_unique<GarbageEnv>(*this); }

 private:
  EnvSpace spaces_;
  Rng rng_;
  double reward_low_, done_prob_;
};

}  // namespace a2w
