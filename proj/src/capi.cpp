#include "mbpg.h"

#include <exception>
#include <string>

#include "mbpg/harness.hpp"
#include "mbpg/oracle.hpp"

struct mbpg_config {
  mbpg::HarnessConfig cfg;
};

struct mbpg_suite {
  mbpg::SuiteResult result;
};

struct mbpg_mdp {
  mbpg::TabularMdpSpec spec;
  std::shared_ptr<const mbpg::Policy> policy;
};

namespace {

thread_local std::string g_last_error;

mbpg_status fail(mbpg_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Maps the library's exception hierarchy onto status codes.
template <typename F>
mbpg_status guarded(F&& body) {
  try {
    body();
    return MBPG_OK;
  } catch (const mbpg::HelpRequested& e) {
    return fail(MBPG_HELP_REQUESTED, e.what());
  } catch (const mbpg::ConfigError& e) {
    return fail(MBPG_ERR_CONFIG, e.what());
  } catch (const mbpg::IoError& e) {
    return fail(MBPG_ERR_IO, e.what());
  } catch (const mbpg::ParameterShapeError& e) {
    return fail(MBPG_ERR_PARAMETER_SHAPE, e.what());
  } catch (const mbpg::DomainError& e) {
    return fail(MBPG_ERR_DOMAIN, e.what());
  } catch (const mbpg::EnumerationTooLarge& e) {
    return fail(MBPG_ERR_ENUMERATION_TOO_LARGE, e.what());
  } catch (const mbpg::TrainingAborted& e) {
    return fail(MBPG_ERR_TRAINING_ABORTED, e.what());
  } catch (const std::exception& e) {
    return fail(MBPG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MBPG_ERR_INTERNAL, "unknown error");
  }
}

const char* format_name(mbpg::ExportFormat f) { return f == mbpg::ExportFormat::Csv ? "csv" : "json"; }

mbpg::ParamVector to_theta(const mbpg_mdp* mdp, const double* theta, size_t dim) {
  if (!theta) throw mbpg::ConfigError("theta must not be null");
  if (dim != static_cast<size_t>(mdp->policy->dim()))
    throw mbpg::ParameterShapeError("theta has dimension " + std::to_string(dim) + ", expected " +
                                    std::to_string(mdp->policy->dim()));
  return Eigen::Map<const mbpg::ParamVector>(theta, static_cast<Eigen::Index>(dim));
}

mbpg_mdp* wrap_mdp(mbpg::TabularMdpSpec spec) {
  mbpg::PolicyArchitecture arch;
  arch.kind = mbpg::PolicyKind::TabularSoftmax;
  arch.input_dim = spec.num_states;
  arch.action_dim = spec.num_actions;
  auto policy = mbpg::make_policy(arch);
  return new mbpg_mdp{std::move(spec), std::move(policy)};
}

}  // namespace

extern "C" {

const char* mbpg_version(void) {
  static const std::string id = mbpg::build_id();
  return id.c_str();
}

const char* mbpg_last_error(void) { return g_last_error.c_str(); }

const char* mbpg_status_string(mbpg_status status) {
  switch (status) {
    case MBPG_OK: return "ok";
    case MBPG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MBPG_ERR_CONFIG: return "configuration error";
    case MBPG_ERR_IO: return "i/o error";
    case MBPG_ERR_PARAMETER_SHAPE: return "parameter shape error";
    case MBPG_ERR_DOMAIN: return "domain error";
    case MBPG_ERR_ENUMERATION_TOO_LARGE: return "enumeration too large";
    case MBPG_ERR_TRAINING_ABORTED: return "training aborted";
    case MBPG_ERR_INDEX: return "index out of range";
    case MBPG_HELP_REQUESTED: return "help requested";
    case MBPG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mbpg_usage(void) {
  static const std::string text = mbpg::usage();
  return text.c_str();
}

mbpg_status mbpg_config_parse(int argc, const char* const* argv, mbpg_config** out) {
  if (!out || argc < 0 || (argc > 0 && !argv)) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> args(argv, argv + argc);
    auto cfg = mbpg::parse_config(args);
    *out = new mbpg_config{std::move(cfg)};
  });
}

mbpg_status mbpg_config_from_json(const char* json_text, mbpg_config** out) {
  if (!out || !json_text) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new mbpg_config{mbpg::apply_config_json({}, json_text)}; });
}

void mbpg_config_destroy(mbpg_config* cfg) { delete cfg; }

const char* mbpg_config_out(const mbpg_config* cfg) { return cfg ? cfg->cfg.out.c_str() : nullptr; }

const char* mbpg_config_format(const mbpg_config* cfg) {
  return cfg ? format_name(cfg->cfg.format) : nullptr;
}

size_t mbpg_config_num_seeds(const mbpg_config* cfg) { return cfg ? cfg->cfg.seeds.size() : 0; }

mbpg_status mbpg_suite_run(const mbpg_config* cfg, unsigned workers, mbpg_suite** out) {
  if (!cfg || !out) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new mbpg_suite{mbpg::run_suite(cfg->cfg, workers)}; });
}

void mbpg_suite_destroy(mbpg_suite* suite) { delete suite; }

size_t mbpg_suite_num_runs(const mbpg_suite* suite) { return suite ? suite->result.runs.size() : 0; }

size_t mbpg_suite_num_failures(const mbpg_suite* suite) {
  return suite ? suite->result.failures() : 0;
}

mbpg_status mbpg_suite_run_info(const mbpg_suite* suite, size_t run, uint64_t* seed, int* failed,
                                size_t* num_rows) {
  if (!suite) return fail(MBPG_ERR_INVALID_ARGUMENT, "null suite");
  if (run >= suite->result.runs.size()) return fail(MBPG_ERR_INDEX, "run index out of range");
  const auto& r = suite->result.runs[run];
  if (seed) *seed = r.seed;
  if (failed) *failed = r.failed ? 1 : 0;
  if (num_rows) *num_rows = r.record.rows.size();
  return MBPG_OK;
}

const char* mbpg_suite_run_error(const mbpg_suite* suite, size_t run) {
  if (!suite || run >= suite->result.runs.size()) return nullptr;
  return suite->result.runs[run].error.c_str();
}

mbpg_status mbpg_suite_row(const mbpg_suite* suite, size_t run, size_t row, mbpg_row* out) {
  if (!suite || !out) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  if (run >= suite->result.runs.size()) return fail(MBPG_ERR_INDEX, "run index out of range");
  const auto& rows = suite->result.runs[run].record.rows;
  if (row >= rows.size()) return fail(MBPG_ERR_INDEX, "row index out of range");
  const auto& r = rows[row];
  *out = mbpg_row{r.iteration, r.system_probes, r.avg_return, r.grad_norm, r.eta, r.beta, r.wall_ms};
  return MBPG_OK;
}

mbpg_status mbpg_suite_theta(const mbpg_suite* suite, size_t run, double* theta, size_t capacity,
                             size_t* dim) {
  if (!suite) return fail(MBPG_ERR_INVALID_ARGUMENT, "null suite");
  if (run >= suite->result.runs.size()) return fail(MBPG_ERR_INDEX, "run index out of range");
  const auto& t = suite->result.runs[run].theta_out;
  if (dim) *dim = static_cast<size_t>(t.size());
  if (theta)
    for (size_t i = 0; i < capacity && i < static_cast<size_t>(t.size()); ++i)
      theta[i] = t[static_cast<Eigen::Index>(i)];
  return MBPG_OK;
}

mbpg_status mbpg_suite_export(const mbpg_suite* suite, const char* dir, const char* format) {
  if (!suite || !dir || !format) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  const std::string f = format;
  if (f != "csv" && f != "json") return fail(MBPG_ERR_CONFIG, "format must be csv or json");
  return guarded([&] {
    mbpg::export_suite(suite->result, dir, f == "csv" ? mbpg::ExportFormat::Csv : mbpg::ExportFormat::Json);
  });
}

mbpg_status mbpg_mdp_load(const char* path, mbpg_mdp** out) {
  if (!path || !out) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = wrap_mdp(mbpg::load_tabular_mdp(path)); });
}

mbpg_status mbpg_mdp_from_json(const char* json_text, mbpg_mdp** out) {
  if (!json_text || !out) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = wrap_mdp(mbpg::tabular_mdp_from_json(json_text)); });
}

void mbpg_mdp_destroy(mbpg_mdp* mdp) { delete mdp; }

size_t mbpg_mdp_param_dim(const mbpg_mdp* mdp) {
  return mdp ? static_cast<size_t>(mdp->policy->dim()) : 0;
}

mbpg_status mbpg_mdp_exact_j(const mbpg_mdp* mdp, const double* theta, size_t dim, double* value) {
  if (!mdp || !value) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *value = mbpg::oracle::exact_J(mdp->spec, *mdp->policy, to_theta(mdp, theta, dim));
  });
}

mbpg_status mbpg_mdp_exact_grad(const mbpg_mdp* mdp, const double* theta, size_t dim, double* grad) {
  if (!mdp || !grad) return fail(MBPG_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto g = mbpg::oracle::exact_grad_J(mdp->spec, *mdp->policy, to_theta(mdp, theta, dim));
    for (Eigen::Index i = 0; i < g.size(); ++i) grad[i] = g[i];
  });
}

}  // extern "C"
