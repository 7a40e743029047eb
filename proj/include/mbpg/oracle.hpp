#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mbpg/core.hpp"
#include "mbpg/env.hpp"
#include "mbpg/policy.hpp"

// Exact quantities on enumerable tabular MDPs. Everything here is
// deterministic: trajectories are enumerated in a fixed order and summed with
// compensated summation.
namespace mbpg::oracle {

/// J(theta) = sum_tau p(tau|theta) R(tau)
double exact_J(const TabularMdpSpec& mdp, const Policy& policy, const ParamVector& theta);

/// grad J(theta) = sum_tau p(tau|theta) grad log p(tau|theta) R(tau)
Vector exact_grad_J(const TabularMdpSpec& mdp, const Policy& policy, const ParamVector& theta);

struct HessianResult {
  Matrix hessian;    // symmetrised
  double asymmetry;  // max |H - H^T| before symmetrisation
};

/// Central differences of exact_grad_J with step delta * (1 + ||theta||),
/// symmetrised. d must not exceed kMaxHessianDim.
HessianResult exact_hessian_J(const TabularMdpSpec& mdp, const Policy& policy,
                              const ParamVector& theta, double delta = 1e-4);

struct OracleReport {
  Vector exact_value;
  Vector estimator_mean;
  double abs_error = 0.0;           // max-norm of mean - exact (0 without a target)
  double estimator_variance = 0.0;  // trace of the covariance
};

using TrajectoryEstimator = std::function<Vector(const Trajectory&)>;

/// Exact mean and total variance of a per-trajectory estimator under p(.|theta).
OracleReport estimator_moments(const TrajectoryEstimator& estimator, const TabularMdpSpec& mdp,
                               const Policy& policy, const ParamVector& theta,
                               const std::optional<Vector>& target = std::nullopt);

/// Same, over an already enumerated distribution.
OracleReport estimator_moments(const TrajectoryEstimator& estimator,
                               const std::vector<WeightedTrajectory>& distribution,
                               const std::optional<Vector>& target = std::nullopt);

/// Exact expectation of a matrix-valued estimator.
Matrix expected_matrix(const std::function<Matrix(const Trajectory&)>& estimator,
                       const std::vector<WeightedTrajectory>& distribution);

struct QuadratureRule {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

/// n-point Gauss-Legendre rule mapped to [0, 1].
QuadratureRule gauss_legendre_unit(int n);

}  // namespace mbpg::oracle
