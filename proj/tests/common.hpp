#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "mbpg/env.hpp"
#include "mbpg/policy.hpp"

namespace mbpg::testing {

// Frozen 2-state, 2-action oracle MDP with H=3, gamma=0.9 and rho0=(0.6, 0.4).
inline TabularMdpSpec canonical_mdp() {
  TabularMdpSpec m;
  m.num_states = 2;
  m.num_actions = 2;
  m.transition = {{{0.7, 0.3}, {0.2, 0.8}}, {{0.45, 0.55}, {0.9, 0.1}}};
  m.reward = {{0.5, -0.8}, {-0.3, 0.9}};
  m.initial_dist = {0.6, 0.4};
  m.horizon = 3;
  m.discount = 0.9;
  m.reward_max = 1.0;
  return m;
}

inline std::shared_ptr<const Policy> tabular_policy(const TabularMdpSpec& m) {
  return make_policy({PolicyKind::TabularSoftmax, m.num_states, m.num_actions, {}});
}

inline Vector random_vector(Rng& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

inline std::vector<double> random_simplex(Rng& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& x : p) total += (x = u(rng));
  for (auto& x : p) x /= total;
  double rest = 1.0;
  for (int i = 0; i + 1 < n; ++i) rest -= p[i];
  p[n - 1] = rest;
  return p;
}

inline TabularMdpSpec random_mdp(Rng& rng, int states, int actions, int horizon, double gamma) {
  TabularMdpSpec m;
  m.num_states = states;
  m.num_actions = actions;
  m.horizon = horizon;
  m.discount = gamma;
  m.reward_max = 1.0;
  std::uniform_real_distribution<double> r(-1.0, 1.0);
  m.transition.assign(states, {});
  m.reward.assign(states, std::vector<double>(actions));
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) {
      m.transition[s].push_back(random_simplex(rng, states));
      m.reward[s][a] = r(rng);
    }
  }
  m.initial_dist = random_simplex(rng, states);
  return m;
}

// Backward induction over the finite horizon, independent of enumeration.
inline double dp_value(const TabularMdpSpec& m, const Policy& policy, const ParamVector& theta) {
  std::vector<double> next(m.num_states, 0.0);
  for (int h = m.horizon - 1; h >= 0; --h) {
    std::vector<double> cur(m.num_states, 0.0);
    const double disc = std::pow(m.discount, h);
    for (int s = 0; s < m.num_states; ++s) {
      const auto obs = tabular_observation(s, m.num_states);
      for (int a = 0; a < m.num_actions; ++a) {
        const double pi = std::exp(policy.log_prob(theta, obs, Action::discrete(a)));
        double cont = 0.0;
        for (int s2 = 0; s2 < m.num_states; ++s2) cont += m.transition[s][a][s2] * next[s2];
        cur[s] += pi * (disc * m.reward[s][a] + cont);
      }
    }
    next = cur;
  }
  double j = 0.0;
  for (int s = 0; s < m.num_states; ++s) j += m.initial_dist[s] * next[s];
  return j;
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mbpg::testing
