// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"
#include "mbpg/estimators.hpp"
#include "mbpg/harness.hpp"
#include "mbpg/optimizers.hpp"
#include "mbpg/oracle.hpp"

using namespace mbpg;
using mbpg::testing::canonical_mdp;
using mbpg::testing::loglog_slope;
using mbpg::testing::random_vector;
using mbpg::testing::tabular_policy;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %2d: %s (%s; %.2f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double max_abs(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

Vector enum_mean(const std::vector<WeightedTrajectory>& all, const std::function<Vector(const Trajectory&)>& f) {
  Vector total;
  for (const auto& wt : all) {
    const Vector g = f(wt.trajectory);
    if (total.size() == 0) total = Vector::Zero(g.size());
    total += wt.probability * g;
  }
  return total;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return kInf;
  if (n % 2) return v[n / 2];
  const double a = v[n / 2 - 1], b = v[n / 2];
  return std::isinf(a) || std::isinf(b) ? std::max(a, b) : 0.5 * (a + b);
}

// First probe count at which the trailing mean over `window` iterations
// reaches `threshold`, or infinity.
double probes_to_threshold(const RunRecord& r, double threshold, std::size_t window = 10) {
  double sum = 0.0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    sum += r.rows[i].avg_return;
    if (i >= window) sum -= r.rows[i - window].avg_return;
    if (i + 1 >= window && sum / window >= threshold) return static_cast<double>(r.rows[i].system_probes);
  }
  return kInf;
}

double final_trailing_mean(const RunRecord& r, std::size_t window = 10) {
  const std::size_t n = std::min(window, r.rows.size());
  double sum = 0.0;
  for (std::size_t i = r.rows.size() - n; i < r.rows.size(); ++i) sum += r.rows[i].avg_return;
  return n ? sum / n : 0.0;
}

const std::vector<std::string> kCartPoleRow = {"--env", "cartpole", "--batch", "50", "--horizon", "100", "--gamma",
                                          "0.99", "--probes", "500000", "--seeds", "1-10"};

SuiteResult cartpole_suite(std::vector<std::string> extra) {
  auto args = kCartPoleRow;
  args.insert(args.end(), extra.begin(), extra.end());
  return run_suite(parse_config(args), 0);
}

// Child mode for criterion 14: one CartPole seed exported to `dir`.
int emit(const std::string& algo, const std::string& dir) {
  auto args = kCartPoleRow;
  args.back() = "1";
  args[9] = "100000";
  args.insert(args.end(), {"--algo", algo});
  export_suite(run_suite(parse_config(args), 1), dir, ExportFormat::Csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 4 && std::string(argv[1]) == "--emit") return emit(argv[2], argv[3]);
  const std::string self = std::filesystem::canonical("/proc/self/exe").string();
  const auto mdp = canonical_mdp();
  const auto policy = tabular_policy(mdp);
  const Policy& p = *policy;
  const double gamma = mdp.discount;

  report(1, "REINFORCE/PGT/GPOMDP enumeration means equal the exact gradient", [&] {
    Rng rng = make_rng(101);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      const auto theta = random_vector(rng, p.dim(), 1.5);
      const Vector exact = oracle::exact_grad_J(mdp, p, theta);
      const auto all = enumerate_trajectories(mdp, p, theta);
      worst = std::max({worst,
                        max_abs(enum_mean(all, [&](const Trajectory& t) { return reinforce(t, p, theta, gamma).vector; }) - exact),
                        max_abs(enum_mean(all, [&](const Trajectory& t) { return pgt(t, p, theta, gamma).vector; }) - exact),
                        max_abs(enum_mean(all, [&](const Trajectory& t) { return gpomdp(t, p, theta, gamma).vector; }) - exact)});
    }
    return Outcome{worst <= 1e-10, fmt("max error %.3g, tolerance 1e-10", worst)};
  });

  report(2, "PGT equals GPOMDP pointwise", [&] {
    Rng rng = make_rng(102);
    TabularEnv env(mdp);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto theta = random_vector(rng, p.dim(), 1.5);
      const auto t = rollout(env, p, theta, rng, mdp.horizon);
      worst = std::max(worst, max_abs(pgt(t, p, theta, gamma).vector - gpomdp(t, p, theta, gamma).vector));
    }
    return Outcome{worst <= 1e-12, fmt("max difference %.3g over 1000 trajectories, tolerance 1e-12", worst)};
  });

  report(3, "importance-weight identities E[w]=1 and E[w^2]-1=Var[w]", [&] {
    Rng rng = make_rng(103);
    double worst_mean = 0.0, worst_var = 0.0;
    for (int i = 0; i < 10; ++i) {
      const auto den = random_vector(rng, p.dim());
      const auto num = random_vector(rng, p.dim());
      const auto all = enumerate_trajectories(mdp, p, den);
      double e = 0.0, e2 = 0.0, var = 0.0;
      for (const auto& wt : all) {
        const double w = importance_weight(wt.trajectory, p, num, den).raw;
        e += wt.probability * w;
        e2 += wt.probability * w * w;
      }
      for (const auto& wt : all) {
        const double w = importance_weight(wt.trajectory, p, num, den).raw;
        var += wt.probability * (w - e) * (w - e);
      }
      worst_mean = std::max(worst_mean, std::abs(e - 1.0));
      worst_var = std::max(worst_var, std::abs(e2 - 1.0 - var));
    }
    return Outcome{worst_mean <= 1e-10 && worst_var <= 1e-10,
                   fmt("|E[w]-1| %.3g, |E[w^2]-1-Var| %.3g, tolerance 1e-10", worst_mean, worst_var)};
  });

  report(4, "weight variance scales as eps^2", [&] {
    Rng rng = make_rng(104);
    const auto theta = random_vector(rng, p.dim());
    const auto all = enumerate_trajectories(mdp, p, theta);
    const std::vector<double> eps{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
    double lo = kInf, hi = -kInf;
    for (int dir = 0; dir < 5; ++dir) {
      Vector u = random_vector(rng, p.dim());
      u.normalize();
      std::vector<double> vars;
      for (double e : eps) {
        double m1 = 0.0, m2 = 0.0;
        for (const auto& wt : all) {
          const double w = importance_weight(wt.trajectory, p, theta + e * u, theta).raw;
          m1 += wt.probability * w;
          m2 += wt.probability * w * w;
        }
        vars.push_back(m2 - m1 * m1);
      }
      const double s = loglog_slope(eps, vars);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    return Outcome{lo >= 1.8 && hi <= 2.2, fmt("slopes in [%.4f, %.4f] over 5 directions, target 2 +- 0.2", lo, hi)};
  });

  report(5, "gradient-difference correction matches the exact gradient difference", [&] {
    Rng rng = make_rng(105);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      const auto prev = random_vector(rng, p.dim());
      const auto cur = random_vector(rng, p.dim());
      const Vector mean = enum_mean(enumerate_trajectories(mdp, p, cur), [&](const Trajectory& t) {
        const double w = importance_weight(t, p, prev, cur).raw;
        return Vector(pgt(t, p, cur, gamma).vector - w * pgt(t, p, prev, gamma).vector);
      });
      worst = std::max(worst, max_abs(mean - (oracle::exact_grad_J(mdp, p, cur) - oracle::exact_grad_J(mdp, p, prev))));
    }
    return Outcome{worst <= 1e-10, fmt("max error %.3g, tolerance 1e-10", worst)};
  });

  report(6, "policy-Hessian estimator mean equals the finite-difference Hessian", [&] {
    Rng rng = make_rng(106);
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      const auto theta = random_vector(rng, p.dim());
      Matrix mean = Matrix::Zero(p.dim(), p.dim());
      for (const auto& wt : enumerate_trajectories(mdp, p, theta))
        mean += wt.probability * hessian_estimate(wt.trajectory, p, theta, gamma);
      worst = std::max(worst, (mean - oracle::exact_hessian_J(mdp, p, theta).hessian).cwiseAbs().maxCoeff());
    }
    return Outcome{worst <= 1e-5, fmt("max error %.3g, tolerance 1e-5", worst)};
  });

  report(7, "Delta_t fixed-alpha mean and 32-node alpha quadrature", [&] {
    Rng rng = make_rng(107);
    const auto rule = oracle::gauss_legendre_unit(32);
    double worst_fixed = 0.0, worst_quad = 0.0;
    for (int i = 0; i < 3; ++i) {
      const auto prev = random_vector(rng, p.dim());
      const auto cur = random_vector(rng, p.dim());
      const Vector v = cur - prev;
      Vector integrated = Vector::Zero(p.dim());
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double alpha = rule.nodes[q];
        const ParamVector mixed = mix_parameters(cur, prev, alpha);
        const Vector mean = enum_mean(enumerate_trajectories(mdp, p, mixed), [&](const Trajectory& t) {
          return delta_t(t, p, cur, prev, alpha, HvpConfig{}, gamma);
        });
        worst_fixed = std::max(worst_fixed, max_abs(mean - oracle::exact_hessian_J(mdp, p, mixed).hessian * v));
        integrated += rule.weights[q] * mean;
      }
      worst_quad = std::max(worst_quad, max_abs(integrated - (oracle::exact_grad_J(mdp, p, cur) - oracle::exact_grad_J(mdp, p, prev))));
    }
    return Outcome{worst_fixed <= 1e-5 && worst_quad <= 1e-5,
                   fmt("fixed-alpha error %.3g, quadrature error %.3g, tolerance 1e-5", worst_fixed, worst_quad)};
  });

  report(8, "finite-difference HVP error is second order in delta", [&] {
    Rng rng = make_rng(108);
    TabularEnv env(mdp);
    const std::vector<double> deltas{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    double lo = kInf, hi = -kInf;
    for (int i = 0; i < 5; ++i) {
      const auto theta = random_vector(rng, p.dim());
      const auto t = rollout(env, p, theta, rng, mdp.horizon);
      const Vector v = random_vector(rng, p.dim());
      const Vector exact = hvp_phi_analytic(t, p, theta, v, gamma);
      std::vector<double> errs;
      for (double d : deltas) errs.push_back(max_abs(hvp_phi_fd(t, p, theta, v, HvpConfig{d, false}, gamma) - exact));
      const double s = loglog_slope(deltas, errs);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    return Outcome{lo >= 1.8 && hi <= 2.2, fmt("slopes in [%.4f, %.4f] over 5 trajectories, target 2 +- 0.2", lo, hi)};
  });

  report(9, "momentum recursion conditional-expectation identities", [&] {
    Rng rng = make_rng(109);
    const auto rule = oracle::gauss_legendre_unit(32);
    double worst_is = 0.0, worst_ha = 0.0;
    for (int i = 0; i < 10; ++i) {
      const auto prev = random_vector(rng, p.dim());
      const auto cur = random_vector(rng, p.dim());
      const Vector u_prev = random_vector(rng, p.dim());
      const double beta = 0.05 + 0.09 * i;
      const Vector g_cur = oracle::exact_grad_J(mdp, p, cur);
      const Vector rhs = (1 - beta) * (u_prev - oracle::exact_grad_J(mdp, p, prev));

      const Vector is_mean = enum_mean(enumerate_trajectories(mdp, p, cur), [&](const Trajectory& t) {
        return is_mbpg_combine(u_prev, pgt(t, p, cur, gamma).vector, pgt(t, p, prev, gamma).vector,
                               importance_weight(t, p, prev, cur).raw, beta);
      });
      worst_is = std::max(worst_is, max_abs(is_mean - g_cur - rhs));

      Vector integrated = Vector::Zero(p.dim());
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double alpha = rule.nodes[q];
        const ParamVector mixed = mix_parameters(cur, prev, alpha);
        integrated += rule.weights[q] * enum_mean(enumerate_trajectories(mdp, p, mixed), [&](const Trajectory& t) {
          return ha_mbpg_combine(u_prev, pgt(t, p, cur, gamma).vector, importance_weight(t, p, cur, mixed).raw,
                                 delta_t(t, p, cur, prev, alpha, HvpConfig{}, gamma), beta);
        });
      }
      worst_ha = std::max(worst_ha, max_abs(integrated - g_cur - rhs));
    }
    return Outcome{worst_is <= 1e-10 && worst_ha <= 1e-5,
                   fmt("IS error %.3g (tol 1e-10), HA error %.3g (tol 1e-5)", worst_is, worst_ha)};
  });

  // CartPole suites shared by criteria 10, 11 and 13.
  const auto is_suite = cartpole_suite({"--algo", "is-mbpg", "--k", "0.75", "--c", "2", "--m", "2"});
  const auto star_suite = cartpole_suite({"--algo", "is-mbpg-star", "--k", "0.9", "--c", "2", "--m", "2"});
  const auto vanilla_suite = cartpole_suite({"--algo", "vanilla-pg", "--lr", "0.01"});

  report(10, "schedule invariants on logged runs", [&] {
    const auto dir = std::filesystem::temp_directory_path() / "mbpg_acceptance_logs";
    std::filesystem::remove_all(dir);
    std::vector<RunRecord> logs;
    for (const auto* suite : {&is_suite, &star_suite}) {
      const auto files = export_suite(*suite, dir.string(), ExportFormat::Csv);
      for (std::size_t i = 0; i < suite->runs.size(); ++i) logs.push_back(from_csv(read_text_file(files[i])));
    }
    bool monotone = true, beta_ok = true, eta1_ok = true, beta2_ok = true;
    const double base = 0.75 / std::cbrt(2.0);
    const bool base_ok = std::abs(base - 0.595275) <= 1e-6;
    for (std::size_t r = 0; r < logs.size(); ++r) {
      const auto& rows = logs[r].rows;
      for (std::size_t i = 1; i < rows.size(); ++i) monotone &= rows[i].eta <= rows[i - 1].eta;
      for (const auto& row : rows) beta_ok &= row.beta > 0.0 && row.beta <= 1.0;
      if (r < is_suite.runs.size() && rows.size() >= 2) {
        const double g1 = rows[0].grad_norm;
        eta1_ok &= rows[0].eta == 0.75 / std::cbrt(2.0 + g1 * g1);
        beta2_ok &= rows[1].beta == 2.0 * rows[0].eta * rows[0].eta;
      }
    }
    std::filesystem::remove_all(dir);
    const bool pass = monotone && beta_ok && eta1_ok && beta2_ok && base_ok;
    return Outcome{pass, std::string("eta non-increasing ") + (monotone ? "yes" : "no") + ", beta in (0,1] " +
                             (beta_ok ? "yes" : "no") + ", eta_1 from logged G_1 " + (eta1_ok ? "exact" : "mismatch") +
                             fmt(" (G-free value %.6f)", base) + ", beta_2 = c eta_1^2 " +
                             (beta2_ok ? "exact" : "mismatch") + fmt(", %.0f logs", double(logs.size()))};
  });

  report(11, "CartPole IS-MBPG reaches return 80 and beats vanilla PG on probes-to-threshold", [&] {
    int reached = 0;
    std::vector<double> is_probes, star_probes, vanilla_probes;
    for (const auto& r : is_suite.runs) {
      is_probes.push_back(r.failed ? kInf : probes_to_threshold(r.record, 80.0));
      reached += std::isfinite(is_probes.back());
    }
    for (const auto& r : star_suite.runs) star_probes.push_back(r.failed ? kInf : probes_to_threshold(r.record, 80.0));
    for (const auto& r : vanilla_suite.runs) vanilla_probes.push_back(r.failed ? kInf : probes_to_threshold(r.record, 80.0));
    const double mi = median(is_probes), ms = median(star_probes), mv = median(vanilla_probes);
    const bool pass = reached >= 7 && mi < mv && ms < mv;
    return Outcome{pass, fmt("IS-MBPG reached on %.0f/10 seeds (need 7); ", reached) +
                             fmt("median probes IS-MBPG %.0f, IS-MBPG* %.0f, vanilla %.0f", mi, ms, mv)};
  });

  report(12, "CartPole IS-MBPG with batch 1 reaches return 50", [&] {
    auto args = kCartPoleRow;
    args[3] = "1";
    args.insert(args.end(), {"--algo", "is-mbpg", "--k", "0.75", "--c", "2", "--m", "2"});
    const auto suite = run_suite(parse_config(args), 0);
    int reached = 0;
    for (const auto& r : suite.runs) reached += !r.failed && std::isfinite(probes_to_threshold(r.record, 50.0));
    return Outcome{reached >= 6, fmt("reached on %.0f/10 seeds (need 6)", reached)};
  });

  report(13, "IS-MBPG* final return within 15% of IS-MBPG", [&] {
    std::vector<double> is_final, star_final;
    for (const auto& r : is_suite.runs) is_final.push_back(r.failed ? 0.0 : final_trailing_mean(r.record));
    for (const auto& r : star_suite.runs) star_final.push_back(r.failed ? 0.0 : final_trailing_mean(r.record));
    const double mi = median(is_final), ms = median(star_final);
    const double rel = std::abs(ms - mi) / mi;
    return Outcome{rel <= 0.15, fmt("median final IS-MBPG %.2f, IS-MBPG* %.2f, relative gap %.3f (tol 0.15)", mi, ms, rel)};
  });

  report(14, "byte-identical CSV export across two executions", [&] {
    const auto dir = std::filesystem::temp_directory_path() / "mbpg_acceptance_determinism";
    std::filesystem::remove_all(dir);
    bool same = true;
    int compared = 0;
    for (const char* algo : {"is-mbpg", "ha-mbpg"}) {
      for (const char* run : {"a", "b"}) {
        const std::string cmd = "'" + self + "' --emit " + algo + " '" + (dir / algo / run).string() + "'";
        if (std::system(cmd.c_str()) != 0) return Outcome{false, "child execution failed: " + cmd};
      }
      for (const char* file : {"run_seed1.csv", "aggregate.csv", "suite.json"}) {
        same &= read_text_file((dir / algo / "a" / file).string()) == read_text_file((dir / algo / "b" / file).string());
        ++compared;
      }
    }
    std::filesystem::remove_all(dir);
    return Outcome{same, fmt("%.0f file pairs from separate processes compared", compared)};
  });

  std::printf("%d of 14 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
