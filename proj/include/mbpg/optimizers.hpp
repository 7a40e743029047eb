#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mbpg/core.hpp"
#include "mbpg/env.hpp"
#include "mbpg/estimators.hpp"
#include "mbpg/policy.hpp"
#include "mbpg/record.hpp"

namespace mbpg {

enum class Algorithm { IsMbpg, HaMbpg, IsMbpgStar, VanillaPg };

std::string to_string(Algorithm algo);
Algorithm algorithm_from_string(const std::string& name);

struct ScheduleParams {
  double k = 0.75;
  double m = 2.0;
  double c = 2.0;

  void validate() const;
};

/// k / (m + sum_G_sq)^(1/3)
double eta_adaptive(const ScheduleParams& sp, double sum_G_sq);
/// k / (m + t)^(1/3), t >= 1
double eta_nonadaptive(const ScheduleParams& sp, std::int64_t t);
/// min(c * eta^2, 1)
double beta_next(const ScheduleParams& sp, double eta);

/// beta * g_new + (1 - beta) * (u_prev + g_new - w * g_old)
Vector is_mbpg_combine(const Vector& u_prev, const Vector& g_new, const Vector& g_old, double w,
                       double beta);
/// Batched form: `weighted_old` is already the batch mean of w_i * g_old_i.
Vector is_mbpg_combine_weighted(const Vector& u_prev, const Vector& g_new,
                                const Vector& weighted_old, double beta);

/// beta * w * g_t + (1 - beta) * (u_prev + delta)
Vector ha_mbpg_combine(const Vector& u_prev, const Vector& g_t, double w, const Vector& delta,
                       double beta);

struct OptimizerState {
  Vector u;
  double sum_G_sq = 0.0;
  double eta = 0.0;
  double beta = 1.0;
  std::int64_t t = 0;
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::IsMbpg;
  int batch = 1;
  std::int64_t probe_budget = 500'000;
  int horizon = 100;
  double gamma = 0.99;
  ScheduleParams schedule{};
  /// Constant step for vanilla PG.
  double learning_rate = 0.01;
  /// Multiplies every per-trajectory estimate used in training, i.e. the
  /// optimizer works on grad_scale * J. Applies to all algorithms.
  double grad_scale = 1.0;
  std::optional<ClipWindow> clip = ClipWindow{};
  HvpConfig hvp{};
  std::uint64_t seed = 1;
  /// Keep every iterate while d * T stays below this many doubles.
  std::int64_t history_cap = 4'000'000;
  /// Record wall-clock milliseconds per row. Off by default so that exports
  /// are byte-identical across runs.
  bool wall_clock = false;
  /// Test hooks: pin eta_t / beta_t instead of using the schedules.
  std::optional<double> fixed_eta;
  std::optional<double> fixed_beta;

  void validate() const;
};

struct TrainResult {
  /// Iterate drawn uniformly from {theta_1, ..., theta_T}.
  ParamVector theta_out;
  ParamVector theta_final;
  RunRecord record;
  /// All iterates theta_1..theta_T when under the history cap, else empty.
  std::vector<ParamVector> history;
  std::int64_t iterations = 0;
  std::int64_t weight_overflows = 0;
};

/// Called with theta_t and its freshly built row before the row is stored.
using IterationObserver = std::function<void(const ParamVector& theta_t, RunRow& row)>;

/// Runs IS-MBPG, HA-MBPG, IS-MBPG* or vanilla PG until the probe budget is
/// spent.
TrainResult train(const TrainConfig& cfg, const Environment& env, const Policy& policy, Rng& rng,
                  const ParamVector& theta_init, const IterationObserver& observer = {});

TrainResult train(const TrainConfig& cfg, const Environment& env, const Policy& policy, Rng& rng);

/// Vanilla PG with a constant step (cfg.learning_rate); forces the algorithm tag.
TrainResult vanilla_pg_train(const TrainConfig& cfg, const Environment& env, const Policy& policy,
                             Rng& rng, const ParamVector& theta_init);

}  // namespace mbpg
