#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "mbpg/core.hpp"
#include "mbpg/env.hpp"
#include "mbpg/policy.hpp"

namespace mbpg {

enum class GradSource { Reinforce, Pgt, Gpomdp, IsCorrected, HaDelta };

struct GradEstimate {
  Vector vector;
  GradSource source = GradSource::Pgt;
};

/// Per-step baselines b_h. An empty span means b_h = 0.
using Baselines = std::span<const double>;

GradEstimate reinforce(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                       double gamma, double baseline = 0.0);
GradEstimate pgt(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                 double gamma, Baselines baselines = {});
GradEstimate gpomdp(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                    double gamma, Baselines baselines = {});

/// Same estimators, given precomputed per-step scores (one column per step).
Vector pgt_from_scores(const Matrix& scores, const Trajectory& traj, double gamma,
                       Baselines baselines = {});

/// Per-step scores at theta, one column per step.
Matrix step_scores(const Trajectory& traj, const Policy& policy, const ParamVector& theta);

// ---------------------------------------------------------------------------
// Importance weights

struct ClipWindow {
  double low = 1e-4;
  double high = 1e4;
};

struct ImportanceWeight {
  double raw = 1.0;
  double clipped = 1.0;
  double log_raw = 0.0;
};

/// Counts exp() overflows that were saturated instead of producing inf.
struct WeightDiagnostics {
  std::int64_t overflow_count = 0;
};

/// w(tau | theta_num, theta_den) = prod_h pi_num(a_h|s_h) / pi_den(a_h|s_h),
/// formed in log space. `clipped` equals `raw` when no window is given.
ImportanceWeight importance_weight(const Trajectory& traj, const Policy& policy,
                                   const ParamVector& theta_num, const ParamVector& theta_den,
                                   std::optional<ClipWindow> clip = std::nullopt,
                                   WeightDiagnostics* diagnostics = nullptr);

// ---------------------------------------------------------------------------
// Second-order pieces for the Hessian-aided estimator

/// Phi(tau|theta) = sum_h (sum_{j>=h} gamma^j r_j) log pi(a_h|s_h)
double phi_value(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                 double gamma);

/// grad Phi(tau|theta); identical to pgt with zero baseline.
Vector phi_grad(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                double gamma);

struct HvpConfig {
  /// Finite-difference step, must lie in [1e-8, 1e-2].
  double delta = 1e-4;
  /// When set, the step along v is rescaled so ||step * v|| = delta * (1 + ||theta||).
  bool relative = true;

  void validate() const;
};

/// Central-difference estimate of grad^2 Phi(tau|theta) v.
Vector hvp_phi_fd(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                  const Vector& v, const HvpConfig& cfg, double gamma);

/// Exact grad^2 Phi(tau|theta) v for policies with an analytic log-prob Hessian.
Vector hvp_phi_analytic(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                        const Vector& v, double gamma);

inline constexpr int kMaxHessianDim = 64;

/// grad Phi * (grad log p)^T + grad^2 Phi for one trajectory. The second term
/// is analytic when the policy provides a Hessian, finite-differenced column by
/// column otherwise.
Matrix hessian_estimate(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                        double gamma, const HvpConfig& cfg = {1e-4, false});

/// alpha * theta_t + (1 - alpha) * theta_prev
ParamVector mix_parameters(const ParamVector& theta_t, const ParamVector& theta_prev, double alpha);

/// Hessian-aided difference estimate for a trajectory drawn at the mixed point
/// theta(alpha): (grad log p . v) grad Phi + grad^2 Phi v, with v = theta_t - theta_prev.
Vector delta_t(const Trajectory& traj, const Policy& policy, const ParamVector& theta_t,
               const ParamVector& theta_prev, double alpha, const HvpConfig& cfg, double gamma);

}  // namespace mbpg
