#include "mbpg/oracle.hpp"

#include <cmath>
#include <numbers>

#include "mbpg/estimators.hpp"

namespace mbpg::oracle {

namespace {

// Neumaier-compensated running sum over matrices of fixed shape.
class CompensatedSum {
 public:
  CompensatedSum(Eigen::Index rows, Eigen::Index cols)
      : sum_(Matrix::Zero(rows, cols)), comp_(Matrix::Zero(rows, cols)) {}

  void add(const Matrix& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double s = sum_(i);
      const double t = s + x(i);
      comp_(i) += std::abs(s) >= std::abs(x(i)) ? (s - t) + x(i) : (x(i) - t) + s;
      sum_(i) = t;
    }
  }
  Matrix value() const { return sum_ + comp_; }

 private:
  Matrix sum_;
  Matrix comp_;
};

}  // namespace

double exact_J(const TabularMdpSpec& mdp, const Policy& policy, const ParamVector& theta) {
  const auto dist = enumerate_trajectories(mdp, policy, theta);
  CompensatedSum total(1, 1);
  for (const auto& wt : dist)
    total.add(Matrix::Constant(1, 1, wt.probability * discounted_return(wt.trajectory, mdp.discount)));
  return total.value()(0, 0);
}

Vector exact_grad_J(const TabularMdpSpec& mdp, const Policy& policy, const ParamVector& theta) {
  const auto dist = enumerate_trajectories(mdp, policy, theta);
  CompensatedSum total(policy.dim(), 1);
  for (const auto& wt : dist) {
    const double R = discounted_return(wt.trajectory, mdp.discount);
    total.add(wt.probability * R * trajectory_score(policy, theta, wt.trajectory));
  }
  return total.value();
}

HessianResult exact_hessian_J(const TabularMdpSpec& mdp, const Policy& policy,
                              const ParamVector& theta, double delta) {
  const int d = policy.dim();
  if (d > kMaxHessianDim)
    throw OracleScopeError("exact_hessian_J is limited to d <= " + std::to_string(kMaxHessianDim));
  policy.check_dim(theta);
  const double step = delta * (1.0 + theta.norm());
  Matrix h(d, d);
  for (int i = 0; i < d; ++i) {
    const Vector e = step * Vector::Unit(d, i);
    h.col(i) = (exact_grad_J(mdp, policy, theta + e) - exact_grad_J(mdp, policy, theta - e)) /
               (2.0 * step);
  }
  HessianResult out;
  out.asymmetry = (h - h.transpose()).cwiseAbs().maxCoeff();
  out.hessian = 0.5 * (h + h.transpose());
  return out;
}

OracleReport estimator_moments(const TrajectoryEstimator& estimator,
                               const std::vector<WeightedTrajectory>& distribution,
                               const std::optional<Vector>& target) {
  OracleReport report;
  if (distribution.empty()) return report;
  std::vector<Vector> values;
  values.reserve(distribution.size());
  for (const auto& wt : distribution) values.push_back(estimator(wt.trajectory));
  const Eigen::Index n = values.front().size();

  CompensatedSum mean(n, 1);
  for (std::size_t i = 0; i < values.size(); ++i) mean.add(distribution[i].probability * values[i]);
  report.estimator_mean = mean.value();

  CompensatedSum var(1, 1);
  for (std::size_t i = 0; i < values.size(); ++i)
    var.add(Matrix::Constant(
        1, 1, distribution[i].probability * (values[i] - report.estimator_mean).squaredNorm()));
  report.estimator_variance = std::max(0.0, var.value()(0, 0));

  if (target) {
    report.exact_value = *target;
    report.abs_error = (report.estimator_mean - *target).cwiseAbs().maxCoeff();
  }
  return report;
}

OracleReport estimator_moments(const TrajectoryEstimator& estimator, const TabularMdpSpec& mdp,
                               const Policy& policy, const ParamVector& theta,
                               const std::optional<Vector>& target) {
  return estimator_moments(estimator, enumerate_trajectories(mdp, policy, theta), target);
}

Matrix expected_matrix(const std::function<Matrix(const Trajectory&)>& estimator,
                       const std::vector<WeightedTrajectory>& distribution) {
  if (distribution.empty()) return {};
  Matrix first = estimator(distribution.front().trajectory);
  CompensatedSum total(first.rows(), first.cols());
  total.add(distribution.front().probability * first);
  for (std::size_t i = 1; i < distribution.size(); ++i)
    total.add(distribution[i].probability * estimator(distribution[i].trajectory));
  return total.value();
}

QuadratureRule gauss_legendre_unit(int n) {
  if (n < 1) throw ConfigError("quadrature needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  // Newton iteration on P_n from the Chebyshev-like initial guess.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1, 1] -> [0, 1]
    rule.nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (1.0 + x);
    rule.weights[static_cast<std::size_t>(i)] = 0.5 * w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = 0.5 * w;
  }
  return rule;
}

}  // namespace mbpg::oracle
