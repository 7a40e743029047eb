#include "mbpg/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mbpg/policy.hpp"

namespace mbpg {

double Trajectory::undiscounted_return() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.reward;
  return total;
}

double discounted_return(const Trajectory& traj, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (const auto& s : traj.steps) {
    total += discount * s.reward;
    discount *= gamma;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Tabular MDP

namespace {

constexpr double kSimplexTol = 1e-12;

void check_distribution(const std::vector<double>& p, const std::string& what) {
  double total = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0) throw ConfigError(what + ": negative or non-finite entry");
    total += x;
  }
  if (std::abs(total - 1.0) > kSimplexTol) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": entries sum to " << total << ", expected 1";
    throw ConfigError(os.str());
  }
}

}  // namespace

void TabularMdpSpec::validate() const {
  if (num_states <= 0) throw ConfigError("num_states must be positive");
  if (num_actions <= 0) throw ConfigError("num_actions must be positive");
  if (horizon <= 0) throw ConfigError("horizon must be positive");
  if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (static_cast<int>(transition.size()) != num_states)
    throw ConfigError("transition must have num_states rows");
  for (int s = 0; s < num_states; ++s) {
    if (static_cast<int>(transition[s].size()) != num_actions)
      throw ConfigError("transition[" + std::to_string(s) + "] must have num_actions entries");
    for (int a = 0; a < num_actions; ++a) {
      if (static_cast<int>(transition[s][a].size()) != num_states)
        throw ConfigError("transition[" + std::to_string(s) + "][" + std::to_string(a) +
                          "] must have num_states entries");
      check_distribution(transition[s][a],
                         "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]");
    }
  }
  if (static_cast<int>(reward.size()) != num_states)
    throw ConfigError("reward must have num_states rows");
  for (int s = 0; s < num_states; ++s) {
    if (static_cast<int>(reward[s].size()) != num_actions)
      throw ConfigError("reward[" + std::to_string(s) + "] must have num_actions entries");
    for (double r : reward[s])
      if (!std::isfinite(r)) throw ConfigError("reward entries must be finite");
  }
  if (static_cast<int>(initial_dist.size()) != num_states)
    throw ConfigError("initial_dist must have num_states entries");
  check_distribution(initial_dist, "initial_dist");
  if (reward_max < 0.0 || !std::isfinite(reward_max)) throw ConfigError("r_max must be >= 0");
  if (reward_max > 0.0) {
    for (const auto& row : reward)
      for (double r : row)
        if (std::abs(r) > reward_max) throw ConfigError("reward exceeds declared r_max");
  }
}

double TabularMdpSpec::effective_reward_bound() const {
  if (reward_max > 0.0) return reward_max;
  double bound = 0.0;
  for (const auto& row : reward)
    for (double r : row) bound = std::max(bound, std::abs(r));
  return bound > 0.0 ? bound : 1.0;
}

TabularMdpSpec tabular_mdp_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("tabular MDP: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("tabular MDP: expected a JSON object");
  static const char* const kKeys[] = {"num_states", "num_actions", "transition", "reward",
                                      "initial_dist", "horizon", "gamma", "r_max"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
      throw ConfigError("tabular MDP: unknown key '" + key + "'");
  }
  TabularMdpSpec mdp;
  try {
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.transition = j.at("transition").get<std::vector<std::vector<std::vector<double>>>>();
    mdp.reward = j.at("reward").get<std::vector<std::vector<double>>>();
    mdp.initial_dist = j.at("initial_dist").get<std::vector<double>>();
    mdp.horizon = j.at("horizon").get<int>();
    mdp.discount = j.at("gamma").get<double>();
    if (j.contains("r_max")) mdp.reward_max = j.at("r_max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("tabular MDP: ") + e.what());
  }
  mdp.validate();
  return mdp;
}

TabularMdpSpec load_tabular_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tabular MDP file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return tabular_mdp_from_json(buf.str());
}

std::string tabular_mdp_to_json(const TabularMdpSpec& mdp) {
  nlohmann::json j;
  j["num_states"] = mdp.num_states;
  j["num_actions"] = mdp.num_actions;
  j["transition"] = mdp.transition;
  j["reward"] = mdp.reward;
  j["initial_dist"] = mdp.initial_dist;
  j["horizon"] = mdp.horizon;
  j["gamma"] = mdp.discount;
  if (mdp.reward_max > 0.0) j["r_max"] = mdp.reward_max;
  return j.dump(2);
}

Observation tabular_observation(int state, int num_states) {
  Observation obs;
  obs.index = state;
  obs.features = Vector::Zero(num_states);
  obs.features[state] = 1.0;
  return obs;
}

namespace {

int sample_index(const std::vector<double>& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u above the running sum: take the last nonzero entry.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i);
  return 0;
}

}  // namespace

TabularEnv::TabularEnv(TabularMdpSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Observation TabularEnv::reset(Rng& rng) {
  state_ = sample_index(spec_.initial_dist, rng);
  return tabular_observation(state_, spec_.num_states);
}

StepResult TabularEnv::step(const Action& action, Rng& rng) {
  if (action.id < 0 || action.id >= spec_.num_actions)
    throw DomainError("tabular action id out of range: " + std::to_string(action.id));
  StepResult out;
  out.reward = spec_.reward[state_][action.id];
  state_ = sample_index(spec_.transition[state_][action.id], rng);
  out.next = tabular_observation(state_, spec_.num_states);
  out.terminal = false;
  return out;
}

std::unique_ptr<Environment> TabularEnv::clone() const { return std::make_unique<TabularEnv>(*this); }

// ---------------------------------------------------------------------------
// CartPole

void CartPoleSpec::validate() const {
  const double positives[] = {gravity, cart_mass, pole_mass, pole_half_length,
                              force,   time_step, position_threshold, angle_threshold};
  for (double x : positives)
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("cartpole constants must be positive");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
}

CartPoleEnv::CartPoleEnv(CartPoleSpec spec) : spec_(spec) { spec_.validate(); }

Observation CartPoleEnv::reset(Rng& rng) {
  std::uniform_real_distribution<double> init(-0.05, 0.05);
  for (int i = 0; i < 4; ++i) state_[i] = init(rng);
  return Observation{-1, state_};
}

StepResult CartPoleEnv::step(const Action& action, Rng&) {
  if (action.id != 0 && action.id != 1)
    throw DomainError("cartpole action must be 0 or 1, got " + std::to_string(action.id));
  const double total_mass = spec_.cart_mass + spec_.pole_mass;
  const double polemass_length = spec_.pole_mass * spec_.pole_half_length;

  const double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];
  const double force = action.id == 1 ? spec_.force : -spec_.force;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);

  const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (spec_.gravity * sin_t - cos_t * temp) /
      (spec_.pole_half_length * (4.0 / 3.0 - spec_.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  state_ = Eigen::Vector4d(x + spec_.time_step * x_dot, x_dot + spec_.time_step * x_acc,
                           theta + spec_.time_step * theta_dot,
                           theta_dot + spec_.time_step * theta_acc);

  StepResult out;
  out.next = Observation{-1, state_};
  out.terminal = std::abs(state_[0]) > spec_.position_threshold ||
                 std::abs(state_[2]) > spec_.angle_threshold;
  // +1 for every step taken, including the one that ends the episode.
  out.reward = 1.0;
  return out;
}

std::unique_ptr<Environment> CartPoleEnv::clone() const {
  return std::make_unique<CartPoleEnv>(*this);
}

// ---------------------------------------------------------------------------
// Rollout and enumeration

Trajectory rollout(Environment& env, const Policy& policy, const ParamVector& theta, Rng& rng,
                   int horizon, std::int64_t* probes) {
  policy.check_dim(theta);
  if (horizon < 1) throw ConfigError("rollout horizon must be >= 1");
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(horizon));
  Observation obs = env.reset(rng);
  double log_p = 0.0;
  for (int h = 0; h < horizon; ++h) {
    auto [action, lp] = policy.sample(theta, obs, rng);
    StepResult res = env.step(action, rng);
    if (probes) ++*probes;
    log_p += lp;
    traj.steps.push_back(Step{std::move(obs), std::move(action), res.reward, lp});
    obs = std::move(res.next);
    if (res.terminal) break;
  }
  traj.final_state = std::move(obs);
  traj.behavior_log_prob = log_p;
  return traj;
}

std::uint64_t enumeration_cap() {
  if (const char* env = std::getenv("MBPG_ENUM_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::uint64_t>(v);
  }
  return kDefaultEnumerationCap;
}

std::uint64_t enumeration_size(const TabularMdpSpec& mdp) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  const auto branch = static_cast<std::uint64_t>(mdp.num_actions) *
                      static_cast<std::uint64_t>(mdp.num_states);
  std::uint64_t count = static_cast<std::uint64_t>(mdp.num_states);
  for (int h = 0; h < mdp.horizon; ++h) {
    if (branch != 0 && count > kMax / branch) return kMax;
    count *= branch;
  }
  return count;
}

namespace {

struct Enumerator {
  const TabularMdpSpec& mdp;
  const Policy& policy;
  const ParamVector& theta;
  std::vector<Observation> observations;
  std::vector<Vector> action_probs;  // per state
  std::vector<WeightedTrajectory>* out;
  Trajectory current;

  void extend(int state, double prob, int depth) {
    if (depth == mdp.horizon) {
      current.final_state = observations[state];
      double log_p = 0.0;
      for (const auto& s : current.steps) log_p += s.log_prob;
      current.behavior_log_prob = log_p;
      out->push_back(WeightedTrajectory{current, prob});
      return;
    }
    const Vector& pi = action_probs[state];
    for (int a = 0; a < mdp.num_actions; ++a) {
      if (pi[a] == 0.0) continue;
      current.steps.push_back(Step{observations[state], Action::discrete(a), mdp.reward[state][a],
                                   std::log(pi[a])});
      for (int next = 0; next < mdp.num_states; ++next) {
        const double p_next = mdp.transition[state][a][next];
        if (p_next == 0.0) continue;
        extend(next, prob * pi[a] * p_next, depth + 1);
      }
      current.steps.pop_back();
    }
  }
};

}  // namespace

std::vector<WeightedTrajectory> enumerate_trajectories(const TabularMdpSpec& mdp,
                                                       const Policy& policy,
                                                       const ParamVector& theta,
                                                       std::uint64_t cap) {
  mdp.validate();
  policy.check_dim(theta);
  const std::uint64_t size = enumeration_size(mdp);
  if (size > cap)
    throw EnumerationTooLarge("enumeration of " + std::to_string(size) +
                              " trajectory branches exceeds cap " + std::to_string(cap));

  Enumerator e{mdp, policy, theta, {}, {}, nullptr, {}};
  e.observations.reserve(static_cast<std::size_t>(mdp.num_states));
  for (int s = 0; s < mdp.num_states; ++s) {
    e.observations.push_back(tabular_observation(s, mdp.num_states));
    auto probs = policy.action_probabilities(theta, e.observations.back());
    if (!probs || probs->size() != mdp.num_actions)
      throw ConfigError("enumeration needs a categorical policy over the MDP's actions");
    e.action_probs.push_back(std::move(*probs));
  }
  std::vector<WeightedTrajectory> out;
  out.reserve(static_cast<std::size_t>(size));
  e.out = &out;
  for (int s0 = 0; s0 < mdp.num_states; ++s0) {
    if (mdp.initial_dist[s0] == 0.0) continue;
    e.extend(s0, mdp.initial_dist[s0], 0);
  }
  return out;
}

}  // namespace mbpg
