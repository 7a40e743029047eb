#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mbpg {

/// One logged optimizer iteration.
struct RunRow {
  std::int64_t iteration = 0;
  /// Cumulative environment transitions after this iteration's sampling.
  std::int64_t system_probes = 0;
  /// Undiscounted episode return averaged over the iteration's batch.
  double avg_return = 0.0;
  /// G_t, the norm of the fresh gradient estimate at theta_t.
  double grad_norm = 0.0;
  double eta = 0.0;
  double beta = 0.0;
  std::int64_t wall_ms = 0;
  /// ||grad J(theta_t)|| from exact enumeration, tabular runs only.
  std::optional<double> exact_grad_norm;
};

struct RunRecord {
  std::vector<RunRow> rows;
  /// Resolved configuration, seed and build id, as string key/value pairs.
  std::map<std::string, std::string> metadata;
};

}  // namespace mbpg
