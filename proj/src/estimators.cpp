#include "mbpg/estimators.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mbpg {

namespace {

void check_baselines(const Trajectory& traj, Baselines b) {
  if (!b.empty() && b.size() != traj.length())
    throw ParameterShapeError("expected " + std::to_string(traj.length()) +
                              " per-step baselines, got " + std::to_string(b.size()));
}

double baseline_at(Baselines b, std::size_t h) { return b.empty() ? 0.0 : b[h]; }

/// c_h = sum_{j >= h} (gamma^j r_j - b_j)
Vector reward_to_go(const Trajectory& traj, double gamma, Baselines b) {
  const auto n = static_cast<Eigen::Index>(traj.length());
  Vector discounted(n);
  double discount = 1.0;
  for (Eigen::Index h = 0; h < n; ++h) {
    discounted[h] = discount * traj.steps[h].reward - baseline_at(b, h);
    discount *= gamma;
  }
  Vector to_go(n);
  double acc = 0.0;
  for (Eigen::Index h = n; h-- > 0;) {
    acc += discounted[h];
    to_go[h] = acc;
  }
  return to_go;
}

}  // namespace

Matrix step_scores(const Trajectory& traj, const Policy& policy, const ParamVector& theta) {
  policy.check_dim(theta);
  Matrix scores(policy.dim(), static_cast<Eigen::Index>(traj.length()));
  for (std::size_t h = 0; h < traj.length(); ++h)
    scores.col(static_cast<Eigen::Index>(h)) =
        policy.score(theta, traj.steps[h].state, traj.steps[h].action);
  return scores;
}

Vector pgt_from_scores(const Matrix& scores, const Trajectory& traj, double gamma, Baselines b) {
  check_baselines(traj, b);
  if (traj.length() == 0) return Vector::Zero(scores.rows());
  return scores * reward_to_go(traj, gamma, b);
}

GradEstimate pgt(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                 double gamma, Baselines b) {
  return {pgt_from_scores(step_scores(traj, policy, theta), traj, gamma, b), GradSource::Pgt};
}

GradEstimate gpomdp(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                    double gamma, Baselines b) {
  check_baselines(traj, b);
  policy.check_dim(theta);
  Vector total = Vector::Zero(policy.dim());
  Vector cumulative = Vector::Zero(policy.dim());
  double discount = 1.0;
  for (std::size_t h = 0; h < traj.length(); ++h) {
    const auto& s = traj.steps[h];
    cumulative += policy.score(theta, s.state, s.action);
    total += cumulative * (discount * s.reward - baseline_at(b, h));
    discount *= gamma;
  }
  return {total, GradSource::Gpomdp};
}

GradEstimate reinforce(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                       double gamma, double baseline) {
  const Vector score_sum = trajectory_score(policy, theta, traj);
  return {score_sum * (discounted_return(traj, gamma) - baseline), GradSource::Reinforce};
}

ImportanceWeight importance_weight(const Trajectory& traj, const Policy& policy,
                                   const ParamVector& theta_num, const ParamVector& theta_den,
                                   std::optional<ClipWindow> clip, WeightDiagnostics* diagnostics) {
  ImportanceWeight w;
  w.log_raw = trajectory_log_prob(policy, theta_num, traj) - trajectory_log_prob(policy, theta_den, traj);
  static const double kMaxLog = std::log(std::numeric_limits<double>::max());
  if (w.log_raw > kMaxLog) {
    w.raw = clip ? clip->high : std::numeric_limits<double>::max();
    if (diagnostics) ++diagnostics->overflow_count;
  } else {
    w.raw = std::max(std::exp(w.log_raw), std::numeric_limits<double>::denorm_min());
  }
  w.clipped = clip ? std::min(std::max(w.raw, clip->low), clip->high) : w.raw;
  return w;
}

double phi_value(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                 double gamma) {
  const Vector to_go = reward_to_go(traj, gamma, {});
  double total = 0.0;
  for (std::size_t h = 0; h < traj.length(); ++h)
    total += to_go[static_cast<Eigen::Index>(h)] *
             policy.log_prob(theta, traj.steps[h].state, traj.steps[h].action);
  return total;
}

Vector phi_grad(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                double gamma) {
  return pgt(traj, policy, theta, gamma).vector;
}

void HvpConfig::validate() const {
  if (!(delta >= 1e-8 && delta <= 1e-2))
    throw ConfigError("hvp delta must lie in [1e-8, 1e-2]");
}

Vector hvp_phi_fd(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                  const Vector& v, const HvpConfig& cfg, double gamma) {
  policy.check_dim(theta);
  if (v.size() != theta.size()) throw ParameterShapeError("hvp direction has wrong dimension");
  const double v_norm = v.norm();
  if (v_norm == 0.0) return Vector::Zero(theta.size());
  const double step = cfg.relative ? cfg.delta * (1.0 + theta.norm()) / v_norm : cfg.delta;
  const Vector plus = phi_grad(traj, policy, theta + step * v, gamma);
  const Vector minus = phi_grad(traj, policy, theta - step * v, gamma);
  return (plus - minus) / (2.0 * step);
}

Vector hvp_phi_analytic(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                        const Vector& v, double gamma) {
  policy.check_dim(theta);
  const Vector to_go = reward_to_go(traj, gamma, {});
  Vector out = Vector::Zero(theta.size());
  for (std::size_t h = 0; h < traj.length(); ++h) {
    auto hess = policy.log_prob_hessian(theta, traj.steps[h].state, traj.steps[h].action);
    if (!hess) throw OracleScopeError("policy has no analytic log-prob Hessian");
    out += to_go[static_cast<Eigen::Index>(h)] * (*hess * v);
  }
  return out;
}

Matrix hessian_estimate(const Trajectory& traj, const Policy& policy, const ParamVector& theta,
                        double gamma, const HvpConfig& cfg) {
  const int d = policy.dim();
  if (d > kMaxHessianDim)
    throw OracleScopeError("hessian_estimate is limited to d <= " + std::to_string(kMaxHessianDim));
  const Matrix scores = step_scores(traj, policy, theta);
  const Vector grad_phi = pgt_from_scores(scores, traj, gamma);
  const Vector score_sum = scores.rowwise().sum();
  Matrix out = grad_phi * score_sum.transpose();

  const Vector to_go = reward_to_go(traj, gamma, {});
  bool analytic = true;
  Matrix second = Matrix::Zero(d, d);
  for (std::size_t h = 0; h < traj.length() && analytic; ++h) {
    auto hess = policy.log_prob_hessian(theta, traj.steps[h].state, traj.steps[h].action);
    if (!hess) {
      analytic = false;
      break;
    }
    second += to_go[static_cast<Eigen::Index>(h)] * *hess;
  }
  if (!analytic) {
    HvpConfig column_cfg = cfg;
    column_cfg.relative = false;
    for (int i = 0; i < d; ++i)
      second.col(i) = hvp_phi_fd(traj, policy, theta, Vector::Unit(d, i), column_cfg, gamma);
  }
  return out + second;
}

ParamVector mix_parameters(const ParamVector& theta_t, const ParamVector& theta_prev, double alpha) {
  return alpha * theta_t + (1.0 - alpha) * theta_prev;
}

Vector delta_t(const Trajectory& traj, const Policy& policy, const ParamVector& theta_t,
               const ParamVector& theta_prev, double alpha, const HvpConfig& cfg, double gamma) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  policy.check_dim(theta_t);
  policy.check_dim(theta_prev);
  const Vector v = theta_t - theta_prev;
  if (v.isZero(0.0)) return Vector::Zero(theta_t.size());
  const ParamVector mixed = mix_parameters(theta_t, theta_prev, alpha);
  const Matrix scores = step_scores(traj, policy, mixed);
  const Vector grad_phi = pgt_from_scores(scores, traj, gamma);
  const double projected = scores.rowwise().sum().dot(v);
  return projected * grad_phi + hvp_phi_fd(traj, policy, mixed, v, cfg, gamma);
}

}  // namespace mbpg
