// Command-line benchmark driver. Talks to the library only through the C API.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "mbpg.h"

namespace {

struct ConfigHandle {
  mbpg_config* ptr = nullptr;
  ~ConfigHandle() { mbpg_config_destroy(ptr); }
};

struct SuiteHandle {
  mbpg_suite* ptr = nullptr;
  ~SuiteHandle() { mbpg_suite_destroy(ptr); }
};

void print_summary(const mbpg_suite* suite) {
  const size_t runs = mbpg_suite_num_runs(suite);
  for (size_t i = 0; i < runs; ++i) {
    uint64_t seed = 0;
    int failed = 0;
    size_t rows = 0;
    mbpg_suite_run_info(suite, i, &seed, &failed, &rows);
    if (failed) {
      std::fprintf(stderr, "seed %llu FAILED: %s\n", static_cast<unsigned long long>(seed),
                   mbpg_suite_run_error(suite, i));
      continue;
    }
    mbpg_row last{};
    if (rows > 0) mbpg_suite_row(suite, i, rows - 1, &last);
    std::printf("seed %llu: %zu iterations, %lld probes, final avg return %.4f\n",
                static_cast<unsigned long long>(seed), rows,
                static_cast<long long>(last.system_probes), last.avg_return);
  }
}

}  // namespace

int main(int argc, char** argv) {
  ConfigHandle cfg;
  mbpg_status st = mbpg_config_parse(argc - 1, argv + 1, &cfg.ptr);
  if (st == MBPG_HELP_REQUESTED) {
    std::fputs(mbpg_usage(), stdout);
    return EXIT_SUCCESS;
  }
  if (st != MBPG_OK) {
    std::fprintf(stderr, "mbpg-cli: %s\n", mbpg_last_error());
    return 1;
  }

  SuiteHandle suite;
  st = mbpg_suite_run(cfg.ptr, 0, &suite.ptr);
  if (st != MBPG_OK) {
    std::fprintf(stderr, "mbpg-cli: %s\n", mbpg_last_error());
    return 1;
  }
  print_summary(suite.ptr);

  const std::string out = mbpg_config_out(cfg.ptr);
  if (!out.empty()) {
    st = mbpg_suite_export(suite.ptr, out.c_str(), mbpg_config_format(cfg.ptr));
    if (st != MBPG_OK) {
      std::fprintf(stderr, "mbpg-cli: export failed: %s\n", mbpg_last_error());
      return 1;
    }
  }
  return mbpg_suite_num_failures(suite.ptr) == 0 ? EXIT_SUCCESS : 2;
}
