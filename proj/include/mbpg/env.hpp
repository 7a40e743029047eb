#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mbpg/core.hpp"

namespace mbpg {

class Policy;

/// What a policy sees. Tabular environments fill `index` (and a one-hot
/// `features`); continuous-state environments leave `index` at -1.
struct Observation {
  int index = -1;
  Vector features;
};

/// Discrete actions use `id`; continuous actions use `value`.
struct Action {
  int id = -1;
  Vector value;

  static Action discrete(int id) { return Action{id, {}}; }
  static Action continuous(Vector v) { return Action{-1, std::move(v)}; }
};

struct Step {
  Observation state;
  Action action;
  double reward = 0.0;
  double log_prob = 0.0;  // log pi(a|s) under the sampling policy
};

struct Trajectory {
  std::vector<Step> steps;
  /// State reached after the last action (s_H for tabular MDPs).
  std::optional<Observation> final_state;
  /// log p of the action sequence under the sampling parameters.
  std::optional<double> behavior_log_prob;

  std::size_t length() const { return steps.size(); }
  double undiscounted_return() const;
};

double discounted_return(const Trajectory& traj, double gamma);

struct StepResult {
  Observation next;
  double reward = 0.0;
  bool terminal = false;
};

/// Episodic environment. One instance is single-threaded; use clone() to give
/// each concurrent run its own copy.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual Observation reset(Rng& rng) = 0;
  virtual StepResult step(const Action& action, Rng& rng) = 0;

  virtual int horizon() const = 0;
  virtual double discount() const = 0;
  virtual int num_actions() const = 0;
  virtual int observation_dim() const = 0;
  virtual double reward_bound() const = 0;
  virtual std::string name() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

// ---------------------------------------------------------------------------
// Tabular MDPs

struct TabularMdpSpec {
  int num_states = 0;
  int num_actions = 0;
  /// transition[s][a][s']
  std::vector<std::vector<std::vector<double>>> transition;
  /// reward[s][a]
  std::vector<std::vector<double>> reward;
  std::vector<double> initial_dist;
  int horizon = 1;
  double discount = 0.9;
  /// Declared bound on |R(s,a)|. Zero means "derive from the reward table".
  double reward_max = 0.0;

  /// Throws ConfigError when any invariant is violated.
  void validate() const;
  double effective_reward_bound() const;
};

TabularMdpSpec load_tabular_mdp(const std::string& path);
TabularMdpSpec tabular_mdp_from_json(const std::string& text);
std::string tabular_mdp_to_json(const TabularMdpSpec& mdp);

Observation tabular_observation(int state, int num_states);

class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(TabularMdpSpec spec);

  Observation reset(Rng& rng) override;
  StepResult step(const Action& action, Rng& rng) override;

  int horizon() const override { return spec_.horizon; }
  double discount() const override { return spec_.discount; }
  int num_actions() const override { return spec_.num_actions; }
  int observation_dim() const override { return spec_.num_states; }
  double reward_bound() const override { return spec_.effective_reward_bound(); }
  std::string name() const override { return "tabular"; }
  std::unique_ptr<Environment> clone() const override;

  const TabularMdpSpec& spec() const { return spec_; }

 private:
  TabularMdpSpec spec_;
  int state_ = 0;
};

// ---------------------------------------------------------------------------
// CartPole (classic control, Euler integration, two discrete actions)

struct CartPoleSpec {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double force = 10.0;
  double time_step = 0.02;
  double position_threshold = 2.4;
  double angle_threshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  int horizon = 100;
  double discount = 0.99;

  void validate() const;
};

class CartPoleEnv final : public Environment {
 public:
  explicit CartPoleEnv(CartPoleSpec spec = {});

  Observation reset(Rng& rng) override;
  StepResult step(const Action& action, Rng& rng) override;

  int horizon() const override { return spec_.horizon; }
  double discount() const override { return spec_.discount; }
  int num_actions() const override { return 2; }
  int observation_dim() const override { return 4; }
  double reward_bound() const override { return 1.0; }
  std::string name() const override { return "cartpole"; }
  std::unique_ptr<Environment> clone() const override;

  const CartPoleSpec& spec() const { return spec_; }
  /// (x, x_dot, angle, angle_dot)
  const Eigen::Vector4d& state() const { return state_; }
  void set_state(const Eigen::Vector4d& s) { state_ = s; }

 private:
  CartPoleSpec spec_;
  Eigen::Vector4d state_ = Eigen::Vector4d::Zero();
};

// ---------------------------------------------------------------------------
// Sampling and enumeration

/// Samples one episode of at most `horizon` steps. Stops early only when the
/// environment reports a terminal state. `probes`, when given, is incremented
/// once per environment transition.
Trajectory rollout(Environment& env, const Policy& policy, const ParamVector& theta, Rng& rng,
                   int horizon, std::int64_t* probes = nullptr);

struct WeightedTrajectory {
  Trajectory trajectory;
  double probability = 0.0;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Cap from MBPG_ENUM_CAP when set and valid, else the default.
std::uint64_t enumeration_cap();

/// Number of branches |S|*(|A|*|S|)^H the enumeration would visit, saturating.
std::uint64_t enumeration_size(const TabularMdpSpec& mdp);

/// Every fixed-length-H trajectory (s_0, a_0, ..., s_{H-1}, a_{H-1}, s_H) with
/// nonzero probability, paired with p(tau|theta).
std::vector<WeightedTrajectory> enumerate_trajectories(const TabularMdpSpec& mdp,
                                                       const Policy& policy,
                                                       const ParamVector& theta,
                                                       std::uint64_t cap = enumeration_cap());

}  // namespace mbpg
