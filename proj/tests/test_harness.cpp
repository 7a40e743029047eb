#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "mbpg/harness.hpp"

using namespace mbpg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mbpg_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_mdp(const fs::path& dir) {
  const auto path = (dir / "mdp.json").string();
  write_text_file(path, tabular_mdp_to_json(mbpg::testing::canonical_mdp()));
  return path;
}

}  // namespace

TEST_CASE("parse_config: full CartPole experiment row") {
  const auto cfg = parse_config({"--algo", "is-mbpg", "--env", "cartpole", "--k", "0.75", "--c", "2", "--m", "2",
                                 "--batch", "50", "--horizon", "100", "--gamma", "0.99", "--probes", "500000",
                                 "--seed", "1"});
  CHECK(cfg.train.algorithm == Algorithm::IsMbpg);
  CHECK(cfg.env == "cartpole");
  CHECK(cfg.train.schedule.k == 0.75);
  CHECK(cfg.train.schedule.c == 2.0);
  CHECK(cfg.train.schedule.m == 2.0);
  CHECK(cfg.train.batch == 50);
  CHECK(cfg.train.horizon == 100);
  CHECK(cfg.train.gamma == 0.99);
  CHECK(cfg.train.probe_budget == 500000);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
  CHECK(cfg.hidden == std::vector<int>{8, 8});
  CHECK(cfg.train.grad_scale == kCartPoleMomentumGradScale);
  CHECK(cfg.train.clip.has_value());
}

TEST_CASE("parse_config: vanilla PG and error cases") {
  const auto v = parse_config({"--algo", "vanilla-pg", "--lr", "0.01"});
  CHECK(v.train.algorithm == Algorithm::VanillaPg);
  CHECK(v.train.learning_rate == 0.01);
  CHECK(v.train.grad_scale == 1.0);

  CHECK_THROWS_AS(parse_config({"--batch", "0"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"--seeds", "1,1"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"--bogus", "1"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"--algo", "adam"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"--k", "abc"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"--help"}), HelpRequested);
  try {
    parse_config({"--k", "abc"});
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'k'") != std::string::npos);
  }
}

TEST_CASE("parse_config: seeds, clip and config files") {
  const auto dir = scratch("config");
  CHECK(parse_config({"--seeds", "1-4"}).seeds == std::vector<std::uint64_t>{1, 2, 3, 4});
  CHECK(parse_config({"--seeds", "3,7,9"}).seeds == std::vector<std::uint64_t>{3, 7, 9});
  CHECK_FALSE(parse_config({"--no-clip"}).train.clip.has_value());
  const auto c = parse_config({"--clip-low", "0.5", "--clip-high", "2"});
  CHECK(c.train.clip->low == 0.5);
  CHECK(c.train.clip->high == 2.0);

  const auto file = (dir / "cfg.json").string();
  write_text_file(file, R"({"algo": "ha-mbpg", "batch": 7, "k": 0.5, "seeds": [4, 5]})");
  const auto f = parse_config({"--config", file, "--k", "0.6"});
  CHECK(f.train.algorithm == Algorithm::HaMbpg);
  CHECK(f.train.batch == 7);
  CHECK(f.train.schedule.k == 0.6);
  CHECK(f.seeds == std::vector<std::uint64_t>{4, 5});

  write_text_file(file, R"({"unknown_key": 1})");
  CHECK_THROWS_AS(parse_config({"--config", file}), ConfigError);
  CHECK_THROWS_AS(parse_config({"--config", (dir / "missing.json").string()}), IoError);
}

TEST_CASE("tabular runs take horizon and gamma from the MDP file") {
  const auto dir = scratch("tabular_defaults");
  const auto mdp = write_mdp(dir);
  const auto cfg = parse_config({"--env", "tabular:" + mdp});
  CHECK(cfg.train.horizon == 3);
  CHECK(cfg.train.gamma == 0.9);
  CHECK(cfg.train.grad_scale == 1.0);
  CHECK(parse_config({"--env", "tabular:" + mdp, "--horizon", "2"}).train.horizon == 2);
}

TEST_CASE("CSV export round-trips byte for byte") {
  RunRecord empty;
  CHECK(to_csv(empty) == std::string(kCsvHeader) + "\n");

  RunRecord r;
  r.rows.push_back(RunRow{1, 15, 15.0, 0.1 + 0.2, 0.5952753, 1.0, 0});
  r.rows.push_back(RunRow{2, 40, 12.5, 1.0 / 3.0, 0.59, 0.708704, 3});
  const auto csv = to_csv(r);
  const auto back = from_csv(csv);
  CHECK(to_csv(back) == csv);
  CHECK(back.rows[0].grad_norm == r.rows[0].grad_norm);
  CHECK(back.rows[1].grad_norm == r.rows[1].grad_norm);
  CHECK_THROWS_AS(from_csv("wrong,header\n"), IoError);

  r.metadata["seed"] = "4";
  const auto json = to_json(r);
  CHECK(to_json(from_json(json)) == json);
}

TEST_CASE("run_suite: metadata, probe accounting and determinism") {
  const auto dir = scratch("suite");
  const auto mdp = write_mdp(dir);
  auto cfg = parse_config({"--env", "tabular:" + mdp, "--algo", "ha-mbpg", "--batch", "3", "--probes", "600",
                           "--seeds", "1-4"});
  const auto a = run_suite(cfg, 1);
  const auto b = run_suite(cfg, 4);
  REQUIRE(a.runs.size() == 4);
  CHECK(a.failures() == 0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.runs[i].seed == cfg.seeds[i]);
    CHECK(to_csv(a.runs[i].record) == to_csv(b.runs[i].record));
    CHECK(to_json(a.runs[i].record) == to_json(b.runs[i].record));
    std::int64_t last = 0;
    for (const auto& row : a.runs[i].record.rows) {
      CHECK(row.system_probes - last == 3 * 3);
      last = row.system_probes;
      CHECK(row.exact_grad_norm.has_value());
    }
    const auto& md = a.runs[i].record.metadata;
    CHECK(md.at("seed") == std::to_string(cfg.seeds[i]));
    for (const char* key : {"algo", "env", "k", "m", "c", "lr", "batch", "horizon", "gamma", "probes", "clip-low",
                            "clip-high", "hvp-delta", "grad-scale", "build"})
      CHECK(md.count(key) == 1);
  }
  const auto j = nlohmann::json::parse(to_json(a.runs[0].record));
  CHECK(j["metadata"]["seed"] == "1");
  CHECK(j["rows"][0].contains("exact_grad_norm"));
}

TEST_CASE("aggregate mean is the per-bucket mean of per-seed curves") {
  auto cfg = parse_config({"--probes", "3000", "--seeds", "1-3", "--batch", "2"});
  const auto suite = run_suite(cfg, 1);
  const auto& agg = suite.aggregate;
  CHECK(agg.bucket_width == 30);
  REQUIRE(agg.bucket_end.size() == 100);
  for (std::size_t b = 0; b < agg.bucket_end.size(); ++b) {
    double mean = 0.0;
    for (const auto& r : suite.runs) mean += return_at(r.record, agg.bucket_end[b]) / 3.0;
    CHECK(std::abs(agg.mean_return[b] - mean) < 1e-12);
    CHECK(agg.std_return[b] >= 0.0);
  }
  for (const auto& r : suite.runs) {
    std::int64_t last = 0;
    for (const auto& row : r.record.rows) {
      CHECK(row.system_probes > last);
      last = row.system_probes;
    }
  }
}

TEST_CASE("failed seeds are flagged while the suite continues") {
  const auto dir = scratch("failing");
  const auto mdp = write_mdp(dir);
  auto cfg = parse_config({"--env", "tabular:" + mdp, "--probes", "300", "--seeds", "1,2"});
  cfg.train.fixed_eta = 1e9;
  const auto suite = run_suite(cfg, 2);
  CHECK(suite.failures() == 2);
  CHECK(suite.runs[0].failed);
  CHECK(suite.runs[0].error.find("diverged") != std::string::npos);
  const auto files = export_suite(suite, (dir / "out").string(), ExportFormat::Csv);
  const auto summary = nlohmann::json::parse(read_text_file((dir / "out" / "suite.json").string()));
  CHECK(summary[0]["status"] == "failed");
  CHECK(files.size() == 4);
}

TEST_CASE("export writes per-seed files plus aggregate and summary") {
  const auto dir = scratch("export");
  auto cfg = parse_config({"--probes", "500", "--seeds", "2,5"});
  const auto suite = run_suite(cfg, 1);
  export_suite(suite, (dir / "csv").string(), ExportFormat::Csv);
  export_suite(suite, (dir / "json").string(), ExportFormat::Json);
  CHECK(fs::exists(dir / "csv" / "run_seed2.csv"));
  CHECK(fs::exists(dir / "csv" / "run_seed5.csv"));
  CHECK(fs::exists(dir / "csv" / "aggregate.csv"));
  CHECK(fs::exists(dir / "json" / "run_seed5.json"));
  const auto text = read_text_file((dir / "csv" / "run_seed2.csv").string());
  CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(to_csv(from_csv(text)) == text);
  CHECK_THROWS_AS(write_text_file("/proc/definitely/not/here.csv", "x"), IoError);
}
