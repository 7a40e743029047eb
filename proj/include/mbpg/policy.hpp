#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mbpg/core.hpp"
#include "mbpg/env.hpp"

namespace mbpg {

enum class PolicyKind { TabularSoftmax, LinearSoftmax, MlpSoftmax, LinearGaussian, MlpGaussian };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);

struct PolicyArchitecture {
  PolicyKind kind = PolicyKind::TabularSoftmax;
  /// Number of states (tabular) or feature dimension (linear / MLP).
  int input_dim = 1;
  /// Number of discrete actions, or the continuous action dimension.
  int action_dim = 2;
  /// Hidden layer widths for mlp-* kinds. Activation is tanh.
  std::vector<int> hidden;

  void validate() const;
  bool is_gaussian() const {
    return kind == PolicyKind::LinearGaussian || kind == PolicyKind::MlpGaussian;
  }
};

/// Parameterised stochastic policy. Instances are immutable, and every method
/// is a pure function of its arguments, so one policy can be shared across
/// threads.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual const PolicyArchitecture& architecture() const = 0;
  virtual int dim() const = 0;

  /// Seeded initial parameters.
  virtual ParamVector initial_parameters(Rng& rng) const = 0;

  /// log pi_theta(a|s)
  virtual double log_prob(const ParamVector& theta, const Observation& s, const Action& a) const = 0;

  /// Samples a ~ pi_theta(.|s) and returns it with its log-probability.
  virtual std::pair<Action, double> sample(const ParamVector& theta, const Observation& s,
                                           Rng& rng) const = 0;

  /// grad_theta log pi_theta(a|s)
  virtual ParamVector score(const ParamVector& theta, const Observation& s, const Action& a) const = 0;

  /// Analytic Hessian of log pi_theta(a|s) in theta, when the policy has one.
  virtual std::optional<Matrix> log_prob_hessian(const ParamVector&, const Observation&,
                                                 const Action&) const {
    return std::nullopt;
  }

  /// Action probabilities for categorical heads.
  virtual std::optional<Vector> action_probabilities(const ParamVector&, const Observation&) const {
    return std::nullopt;
  }

  void check_dim(const ParamVector& theta) const;
};

std::shared_ptr<const Policy> make_policy(const PolicyArchitecture& arch);

/// Sum of per-step scores: grad log p(tau|theta).
ParamVector trajectory_score(const Policy& policy, const ParamVector& theta, const Trajectory& traj);

/// Sum of per-step log pi(a_h|s_h). Transition terms are omitted: they cancel
/// in every ratio this library forms.
double trajectory_log_prob(const Policy& policy, const ParamVector& theta, const Trajectory& traj);

// ---------------------------------------------------------------------------
// Checkpoints: {"architecture": {...}, "theta": [...]}

std::string checkpoint_to_json(const PolicyArchitecture& arch, const ParamVector& theta);
std::pair<PolicyArchitecture, ParamVector> checkpoint_from_json(const std::string& text);

}  // namespace mbpg
