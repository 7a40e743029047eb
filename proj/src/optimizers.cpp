#include "mbpg/optimizers.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace mbpg {

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::IsMbpg: return "is-mbpg";
    case Algorithm::HaMbpg: return "ha-mbpg";
    case Algorithm::IsMbpgStar: return "is-mbpg-star";
    case Algorithm::VanillaPg: return "vanilla-pg";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (auto a : {Algorithm::IsMbpg, Algorithm::HaMbpg, Algorithm::IsMbpgStar, Algorithm::VanillaPg})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown algorithm: " + name);
}

void ScheduleParams::validate() const {
  for (double x : {k, m, c})
    if (!(x > 0.0) || !std::isfinite(x))
      throw ConfigError("schedule parameters k, m, c must be finite and positive");
}

double eta_adaptive(const ScheduleParams& sp, double sum_G_sq) {
  return sp.k / std::cbrt(sp.m + sum_G_sq);
}

double eta_nonadaptive(const ScheduleParams& sp, std::int64_t t) {
  return sp.k / std::cbrt(sp.m + static_cast<double>(t));
}

double beta_next(const ScheduleParams& sp, double eta) { return std::min(sp.c * eta * eta, 1.0); }

Vector is_mbpg_combine(const Vector& u_prev, const Vector& g_new, const Vector& g_old, double w,
                       double beta) {
  return beta * g_new + (1.0 - beta) * (u_prev + g_new - w * g_old);
}

Vector is_mbpg_combine_weighted(const Vector& u_prev, const Vector& g_new,
                                const Vector& weighted_old, double beta) {
  return beta * g_new + (1.0 - beta) * (u_prev + g_new - weighted_old);
}

Vector ha_mbpg_combine(const Vector& u_prev, const Vector& g_t, double w, const Vector& delta,
                       double beta) {
  return beta * w * g_t + (1.0 - beta) * (u_prev + delta);
}

void TrainConfig::validate() const {
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (probe_budget < horizon) throw ConfigError("probe budget must be >= horizon");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  schedule.validate();
  if (algorithm == Algorithm::VanillaPg && !(learning_rate > 0.0 && std::isfinite(learning_rate)))
    throw ConfigError("learning rate must be positive");
  if (clip && !(clip->low > 0.0 && clip->low <= clip->high))
    throw ConfigError("clip window must satisfy 0 < low <= high");
  if (!(grad_scale > 0.0 && std::isfinite(grad_scale)))
    throw ConfigError("gradient scale must be positive and finite");
  hvp.validate();
  if (fixed_beta && !(*fixed_beta > 0.0 && *fixed_beta <= 1.0))
    throw ConfigError("fixed beta must lie in (0, 1]");
  if (fixed_eta && !(*fixed_eta > 0.0)) throw ConfigError("fixed eta must be positive");
}

namespace {

constexpr double kDivergenceNorm = 1e6;

struct Batch {
  std::vector<Trajectory> trajectories;
  double avg_return = 0.0;
};

Batch sample_batch(Environment& env, const Policy& policy, const ParamVector& theta, Rng& rng,
                   const TrainConfig& cfg, std::int64_t& probes) {
  Batch b;
  b.trajectories.reserve(static_cast<std::size_t>(cfg.batch));
  double total = 0.0;
  for (int i = 0; i < cfg.batch; ++i) {
    b.trajectories.push_back(rollout(env, policy, theta, rng, cfg.horizon, &probes));
    total += b.trajectories.back().undiscounted_return();
  }
  b.avg_return = total / cfg.batch;
  return b;
}

[[noreturn]] void abort_run(const std::string& why, std::int64_t t, const ParamVector& theta,
                            const OptimizerState& st, std::int64_t overflows) {
  std::ostringstream os;
  os.precision(17);
  os << why << " at iteration " << t << " (||theta|| = " << theta.norm() << ", eta = " << st.eta
     << ", beta = " << st.beta << ", weight overflows = " << overflows << ")";
  throw TrainingAborted(os.str());
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Environment& env_proto, const Policy& policy,
                  Rng& rng, const ParamVector& theta_init, const IterationObserver& observer) {
  cfg.validate();
  policy.check_dim(theta_init);
  if (!theta_init.allFinite()) throw ConfigError("initial parameters must be finite");

  auto env = env_proto.clone();
  Rng select_rng(rng());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const bool adaptive = cfg.algorithm == Algorithm::IsMbpg || cfg.algorithm == Algorithm::HaMbpg;
  const auto d = static_cast<std::int64_t>(policy.dim());
  const double gamma = cfg.gamma;
  const double gscale = cfg.grad_scale;

  TrainResult result;
  WeightDiagnostics diag;
  OptimizerState st;
  st.u = Vector::Zero(d);
  ParamVector theta = theta_init;
  ParamVector theta_prev = theta_init;
  result.theta_out = theta_init;
  bool keep_history = true;
  std::int64_t probes = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::int64_t t = 1; probes < cfg.probe_budget; ++t) {
    st.t = t;

    // Uniform choice over {theta_1..theta_T} by reservoir sampling.
    if (std::uniform_int_distribution<std::int64_t>(0, t - 1)(select_rng) == 0) result.theta_out = theta;
    if (keep_history) {
      if (t * d > cfg.history_cap) {
        keep_history = false;
        result.history.clear();
        result.history.shrink_to_fit();
      } else {
        result.history.push_back(theta);
      }
    }

    const bool first = t == 1;
    const bool hessian_aided = cfg.algorithm == Algorithm::HaMbpg && !first;
    double alpha = 1.0;
    ParamVector sample_theta = theta;
    if (hessian_aided) {
      alpha = unit(rng);
      sample_theta = mix_parameters(theta, theta_prev, alpha);
    }
    Batch batch = sample_batch(*env, policy, sample_theta, rng, cfg, probes);
    const double inv_n = 1.0 / static_cast<double>(cfg.batch);

    Vector g_new = Vector::Zero(d);
    Vector correction = Vector::Zero(d);  // IS: mean w*g_old, HA: mean Delta
    Vector weighted_new = Vector::Zero(d);
    for (const auto& traj : batch.trajectories) {
      const Vector g = gscale * pgt(traj, policy, theta, gamma).vector;
      g_new += inv_n * g;
      if (first || cfg.algorithm == Algorithm::VanillaPg) continue;
      if (hessian_aided) {
        const double w = importance_weight(traj, policy, theta, sample_theta, cfg.clip, &diag).clipped;
        weighted_new += (inv_n * w) * g;
        correction += (inv_n * gscale) * delta_t(traj, policy, theta, theta_prev, alpha, cfg.hvp, gamma);
      } else {
        const double w = importance_weight(traj, policy, theta_prev, theta, cfg.clip, &diag).clipped;
        correction += (inv_n * w * gscale) * pgt(traj, policy, theta_prev, gamma).vector;
      }
    }

    if (first || cfg.algorithm == Algorithm::VanillaPg) {
      st.u = g_new;
      st.beta = 1.0;
    } else if (hessian_aided) {
      st.u = ha_mbpg_combine(st.u, weighted_new, 1.0, correction, st.beta);
    } else {
      st.u = is_mbpg_combine_weighted(st.u, g_new, correction, st.beta);
    }
    if (!st.u.allFinite()) abort_run("non-finite momentum gradient", t, theta, st, diag.overflow_count);

    const double G = g_new.norm();
    st.sum_G_sq += G * G;
    if (cfg.fixed_eta) {
      st.eta = *cfg.fixed_eta;
    } else if (cfg.algorithm == Algorithm::VanillaPg) {
      st.eta = cfg.learning_rate;
    } else if (adaptive) {
      st.eta = eta_adaptive(cfg.schedule, st.sum_G_sq);
    } else {
      st.eta = eta_nonadaptive(cfg.schedule, t);
    }

    RunRow row;
    row.iteration = t;
    row.system_probes = probes;
    row.avg_return = batch.avg_return;
    row.grad_norm = G;
    row.eta = st.eta;
    row.beta = st.beta;
    if (cfg.wall_clock)
      row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    if (observer) observer(theta, row);
    result.record.rows.push_back(row);

    theta_prev = theta;
    theta += st.eta * st.u;
    if (!theta.allFinite() || theta.norm() > kDivergenceNorm)
      abort_run("parameters diverged", t, theta, st, diag.overflow_count);

    if (cfg.algorithm != Algorithm::VanillaPg)
      st.beta = cfg.fixed_beta ? *cfg.fixed_beta : beta_next(cfg.schedule, st.eta);
    result.iterations = t;
  }

  result.theta_final = theta;
  result.weight_overflows = diag.overflow_count;
  return result;
}

TrainResult train(const TrainConfig& cfg, const Environment& env, const Policy& policy, Rng& rng) {
  Rng init_rng(rng());
  return train(cfg, env, policy, rng, policy.initial_parameters(init_rng));
}

TrainResult vanilla_pg_train(const TrainConfig& cfg, const Environment& env, const Policy& policy,
                             Rng& rng, const ParamVector& theta_init) {
  TrainConfig c = cfg;
  c.algorithm = Algorithm::VanillaPg;
  return train(c, env, policy, rng, theta_init);
}

}  // namespace mbpg
