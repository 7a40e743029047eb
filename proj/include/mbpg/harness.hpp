#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mbpg/env.hpp"
#include "mbpg/optimizers.hpp"
#include "mbpg/policy.hpp"
#include "mbpg/record.hpp"

namespace mbpg {

enum class ExportFormat { Csv, Json };

/// Objective scale used on CartPole by the momentum variants unless
/// --grad-scale is given. Their step schedules are not scale free and the raw
/// return-weighted estimates are large enough to destabilize them.
inline constexpr double kCartPoleMomentumGradScale = 1e-3;

/// Everything the CLI resolves before a suite runs.
struct HarnessConfig {
  TrainConfig train{};
  /// "cartpole" or "tabular:<path>"
  std::string env = "cartpole";
  std::vector<int> hidden{8, 8};
  std::vector<std::uint64_t> seeds{1};
  std::string out;
  ExportFormat format = ExportFormat::Csv;

  void validate() const;
};

/// Parses CLI arguments (argv[0] excluded). `--config <file.json>` supplies
/// defaults; flags on the command line override them. Unknown keys in either
/// place are rejected with ConfigError.
HarnessConfig parse_config(const std::vector<std::string>& args);

/// Applies the key/value pairs of a JSON config object on top of `base`.
HarnessConfig apply_config_json(HarnessConfig base, const std::string& json_text);

std::string usage();
std::string build_id();

/// Resolved config as ordered string pairs, used as RunRecord metadata.
std::map<std::string, std::string> describe(const HarnessConfig& cfg, std::uint64_t seed);

struct Problem {
  std::unique_ptr<Environment> env;
  std::shared_ptr<const Policy> policy;
  std::optional<TabularMdpSpec> mdp;
};

/// Builds the environment and matching policy named by cfg.env.
Problem make_problem(const HarnessConfig& cfg);

struct SeedRun {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  RunRecord record;
  ParamVector theta_out;
};

struct AggregateCurve {
  std::int64_t bucket_width = 0;
  std::vector<std::int64_t> bucket_end;  // probes at the right edge of each bucket
  std::vector<double> mean_return;
  std::vector<double> std_return;
};

struct SuiteResult {
  std::vector<SeedRun> runs;  // ordered as the requested seeds
  AggregateCurve aggregate;

  std::size_t failures() const;
};

/// Runs one training per seed. Seeds must be distinct. A failing seed is
/// flagged and does not stop the others. `workers` = 0 picks the hardware
/// concurrency.
SuiteResult run_suite(const HarnessConfig& cfg, unsigned workers = 0);

/// Step-hold value of each run at every probe bucket edge, then the per-bucket
/// mean and standard deviation across successful runs.
AggregateCurve aggregate_runs(const std::vector<const RunRecord*>& records, std::int64_t budget);

/// Latest avg_return logged at or before `probes` (0 before the first row).
double return_at(const RunRecord& record, std::int64_t probes);

// ---------------------------------------------------------------------------
// Export

inline constexpr const char* kCsvHeader = "iteration,system_probes,avg_return,grad_norm,eta,beta,wall_ms";

std::string to_csv(const RunRecord& record);
RunRecord from_csv(const std::string& text);
std::string to_json(const RunRecord& record);
RunRecord from_json(const std::string& text);
std::string aggregate_to_csv(const AggregateCurve& curve);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

/// Writes run_seed<seed>.<ext> for every run plus aggregate.csv into `dir`.
std::vector<std::string> export_suite(const SuiteResult& suite, const std::string& dir,
                                      ExportFormat format);

}  // namespace mbpg
