#include "mbpg/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mbpg/oracle.hpp"

#ifndef MBPG_VERSION
#define MBPG_VERSION "0.0.0"
#endif

namespace mbpg {

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for '" + key + "': '" + text + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    // accept integral values written in floating notation, e.g. 5e5
    const double d = parse_double(key, text);
    if (d != std::floor(d) || std::abs(d) > 9e18)
      throw ConfigError("invalid integer for '" + key + "': '" + text + "'");
    return static_cast<std::int64_t>(d);
  }
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(text, ',')) {
    const auto dash = part.find('-', 1);
    if (dash != std::string::npos) {
      const auto lo = parse_int(key, part.substr(0, dash));
      const auto hi = parse_int(key, part.substr(dash + 1));
      if (lo < 0 || hi < lo) throw ConfigError("invalid seed range for '" + key + "': '" + part + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    } else {
      const auto s = parse_int(key, part);
      if (s < 0) throw ConfigError("seeds must be non-negative");
      seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (seeds.empty()) throw ConfigError("'" + key + "' names no seeds");
  return seeds;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "algo",      "env",       "k",        "m",          "c",       "lr",
      "batch",     "horizon",   "gamma",    "probes",     "seed",    "seeds",
      "clip-low",  "clip-high", "no-clip",  "hvp-delta",  "out",     "format",
      "hidden",    "wall-clock", "grad-scale"};
  return keys;
}

struct Overrides {
  bool horizon = false;
  bool gamma = false;
  bool grad_scale = false;
};

void apply_key(HarnessConfig& cfg, Overrides& ov, const std::string& key, const std::string& value) {
  auto& t = cfg.train;
  if (key == "algo") {
    t.algorithm = algorithm_from_string(value);
  } else if (key == "env") {
    if (value != "cartpole" && value.rfind("tabular:", 0) != 0)
      throw ConfigError("invalid value for 'env': '" + value + "' (expected cartpole or tabular:<path>)");
    cfg.env = value;
  } else if (key == "k") {
    t.schedule.k = parse_double(key, value);
  } else if (key == "m") {
    t.schedule.m = parse_double(key, value);
  } else if (key == "c") {
    t.schedule.c = parse_double(key, value);
  } else if (key == "lr") {
    t.learning_rate = parse_double(key, value);
  } else if (key == "grad-scale") {
    t.grad_scale = parse_double(key, value);
    ov.grad_scale = true;
  } else if (key == "batch") {
    t.batch = static_cast<int>(parse_int(key, value));
  } else if (key == "horizon") {
    t.horizon = static_cast<int>(parse_int(key, value));
    ov.horizon = true;
  } else if (key == "gamma") {
    t.gamma = parse_double(key, value);
    ov.gamma = true;
  } else if (key == "probes") {
    t.probe_budget = parse_int(key, value);
  } else if (key == "seed") {
    const auto s = parse_int(key, value);
    if (s < 0) throw ConfigError("seed must be non-negative");
    cfg.seeds = {static_cast<std::uint64_t>(s)};
  } else if (key == "seeds") {
    cfg.seeds = parse_seeds(key, value);
  } else if (key == "clip-low") {
    if (!t.clip) t.clip = ClipWindow{};
    t.clip->low = parse_double(key, value);
  } else if (key == "clip-high") {
    if (!t.clip) t.clip = ClipWindow{};
    t.clip->high = parse_double(key, value);
  } else if (key == "no-clip") {
    if (value == "true" || value == "1") t.clip.reset();
  } else if (key == "hvp-delta") {
    t.hvp.delta = parse_double(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "format") {
    if (value == "csv") cfg.format = ExportFormat::Csv;
    else if (value == "json") cfg.format = ExportFormat::Json;
    else throw ConfigError("invalid value for 'format': '" + value + "' (expected csv or json)");
  } else if (key == "hidden") {
    std::vector<int> sizes;
    for (const auto& part : split(value, value.find('x') != std::string::npos ? 'x' : ','))
      sizes.push_back(static_cast<int>(parse_int(key, part)));
    if (sizes.empty()) throw ConfigError("'hidden' needs at least one layer width");
    cfg.hidden = sizes;
  } else if (key == "wall-clock") {
    t.wall_clock = value == "true" || value == "1";
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

std::string json_scalar_to_string(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_float()) return fmt_double(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ',';
      out += json_scalar_to_string(key, item);
    }
    return out;
  }
  throw ConfigError("invalid value type for '" + key + "'");
}

void resolve_env_defaults(HarnessConfig& cfg, const Overrides& ov) {
  if (cfg.env == "cartpole") {
    if (!ov.grad_scale && cfg.train.algorithm != Algorithm::VanillaPg)
      cfg.train.grad_scale = kCartPoleMomentumGradScale;
    return;
  }
  if (cfg.env.rfind("tabular:", 0) != 0) return;
  const auto mdp = load_tabular_mdp(cfg.env.substr(8));
  if (!ov.horizon) cfg.train.horizon = mdp.horizon;
  if (!ov.gamma) cfg.train.gamma = mdp.discount;
}

HarnessConfig apply_json(HarnessConfig cfg, Overrides& ov, const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must contain a JSON object");
  for (const auto& [key, value] : j.items()) apply_key(cfg, ov, key, json_scalar_to_string(key, value));
  return cfg;
}

}  // namespace

void HarnessConfig::validate() const {
  train.validate();
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError("seeds must be distinct");
  if (env != "cartpole" && env.rfind("tabular:", 0) != 0)
    throw ConfigError("env must be cartpole or tabular:<path>");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden layer widths must be >= 1");
}

HarnessConfig apply_config_json(HarnessConfig base, const std::string& json_text) {
  Overrides ov;
  auto cfg = apply_json(std::move(base), ov, json_text);
  resolve_env_defaults(cfg, ov);
  cfg.validate();
  return cfg;
}

std::string usage() {
  return "usage: mbpg-cli [--config FILE] [--algo is-mbpg|ha-mbpg|is-mbpg-star|vanilla-pg]\n"
         "                [--env cartpole|tabular:PATH] [--k K] [--m M] [--c C] [--lr LR]\n"
         "                [--batch N] [--horizon H] [--gamma G] [--probes N] [--seed S]\n"
         "                [--seeds LIST] [--clip-low W] [--clip-high W] [--no-clip]\n"
         "                [--hvp-delta D] [--hidden 8,8] [--out DIR] [--format csv|json]\n"
         "                [--grad-scale S] [--wall-clock]\n";
}

std::string build_id() {
  std::string id = std::string("mbpg-") + MBPG_VERSION;
#if defined(__clang__)
  id += "-clang-" __clang_version__;
#elif defined(__GNUC__)
  id += "-gcc-" __VERSION__;
#endif
  return id;
}

HarnessConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"Momentum-based policy gradient benchmark"};
  app.allow_extras(false);
  std::string config_file;
  app.add_option("--config", config_file, "JSON config file; command-line flags override it");
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  for (const auto& key : known_keys()) {
    if (key == "no-clip" || key == "wall-clock") {
      flags[key] = false;
      app.add_flag("--" + key, flags[key]);
    } else {
      values[key];
      app.add_option("--" + key, values[key]);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(usage());
  } catch (const CLI::ParseError& e) {
    throw ConfigError(std::string(e.what()) + "\n" + usage());
  }

  HarnessConfig cfg;
  Overrides ov;
  if (!config_file.empty()) cfg = apply_json(cfg, ov, read_text_file(config_file));
  for (const auto& key : known_keys()) {
    auto* opt = app.get_option("--" + key);
    if (opt->count() == 0) continue;
    if (flags.count(key))
      apply_key(cfg, ov, key, "true");
    else
      apply_key(cfg, ov, key, values[key]);
  }
  resolve_env_defaults(cfg, ov);
  cfg.validate();
  return cfg;
}

std::map<std::string, std::string> describe(const HarnessConfig& cfg, std::uint64_t seed) {
  const auto& t = cfg.train;
  std::map<std::string, std::string> m;
  m["algo"] = to_string(t.algorithm);
  m["env"] = cfg.env;
  m["k"] = fmt_double(t.schedule.k);
  m["m"] = fmt_double(t.schedule.m);
  m["c"] = fmt_double(t.schedule.c);
  m["lr"] = fmt_double(t.learning_rate);
  m["grad-scale"] = fmt_double(t.grad_scale);
  m["batch"] = std::to_string(t.batch);
  m["horizon"] = std::to_string(t.horizon);
  m["gamma"] = fmt_double(t.gamma);
  m["probes"] = std::to_string(t.probe_budget);
  m["seed"] = std::to_string(seed);
  m["clip-low"] = t.clip ? fmt_double(t.clip->low) : "none";
  m["clip-high"] = t.clip ? fmt_double(t.clip->high) : "none";
  m["hvp-delta"] = fmt_double(t.hvp.delta);
  std::string hidden;
  for (int h : cfg.hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
  m["hidden"] = cfg.env == "cartpole" ? hidden : "none";
  m["policy"] = cfg.env == "cartpole" ? "mlp-softmax" : "tabular-softmax";
  m["build"] = build_id();
  return m;
}

Problem make_problem(const HarnessConfig& cfg) {
  Problem p;
  PolicyArchitecture arch;
  if (cfg.env == "cartpole") {
    CartPoleSpec spec;
    spec.horizon = cfg.train.horizon;
    spec.discount = cfg.train.gamma;
    p.env = std::make_unique<CartPoleEnv>(spec);
    arch.kind = PolicyKind::MlpSoftmax;
    arch.input_dim = 4;
    arch.action_dim = 2;
    arch.hidden = cfg.hidden;
  } else if (cfg.env.rfind("tabular:", 0) == 0) {
    p.mdp = load_tabular_mdp(cfg.env.substr(8));
    p.env = std::make_unique<TabularEnv>(*p.mdp);
    arch.kind = PolicyKind::TabularSoftmax;
    arch.input_dim = p.mdp->num_states;
    arch.action_dim = p.mdp->num_actions;
  } else {
    throw ConfigError("unknown env: " + cfg.env);
  }
  p.policy = make_policy(arch);
  return p;
}

std::size_t SuiteResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const SeedRun& r) { return r.failed; }));
}

double return_at(const RunRecord& record, std::int64_t probes) {
  double value = 0.0;
  for (const auto& row : record.rows) {
    if (row.system_probes > probes) break;
    value = row.avg_return;
  }
  return value;
}

AggregateCurve aggregate_runs(const std::vector<const RunRecord*>& records, std::int64_t budget) {
  AggregateCurve curve;
  curve.bucket_width = std::max<std::int64_t>(1, budget / 100);
  const std::int64_t buckets = (budget + curve.bucket_width - 1) / curve.bucket_width;
  for (std::int64_t b = 1; b <= buckets; ++b) {
    const std::int64_t edge = b * curve.bucket_width;
    curve.bucket_end.push_back(edge);
    double sum = 0.0;
    std::vector<double> vals;
    for (const auto* r : records) {
      vals.push_back(return_at(*r, edge));
      sum += vals.back();
    }
    const double n = static_cast<double>(vals.size());
    const double mean = vals.empty() ? 0.0 : sum / n;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    curve.mean_return.push_back(mean);
    curve.std_return.push_back(vals.empty() ? 0.0 : std::sqrt(ss / n));
  }
  return curve;
}

SuiteResult run_suite(const HarnessConfig& cfg, unsigned workers) {
  cfg.validate();
  const Problem problem = make_problem(cfg);
  SuiteResult suite;
  suite.runs.resize(cfg.seeds.size());

  auto run_one = [&](std::size_t i) {
    SeedRun& out = suite.runs[i];
    out.seed = cfg.seeds[i];
    try {
      Rng init_rng = make_rng(out.seed, 0);
      Rng rng = make_rng(out.seed, 1);
      const ParamVector theta0 = problem.policy->initial_parameters(init_rng);
      IterationObserver observer;
      if (problem.mdp && enumeration_size(*problem.mdp) <= enumeration_cap()) {
        observer = [&](const ParamVector& theta, RunRow& row) {
          row.exact_grad_norm = oracle::exact_grad_J(*problem.mdp, *problem.policy, theta).norm();
        };
      }
      auto result = train(cfg.train, *problem.env, *problem.policy, rng, theta0, observer);
      out.record = std::move(result.record);
      out.theta_out = std::move(result.theta_out);
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
    out.record.metadata = describe(cfg, out.seed);
    out.record.metadata["status"] = out.failed ? "failed" : "ok";
    if (out.failed) out.record.metadata["error"] = out.error;
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.seeds.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) run_one(i);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next >= cfg.seeds.size()) return;
            i = next++;
          }
          run_one(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<const RunRecord*> ok;
  for (const auto& r : suite.runs)
    if (!r.failed) ok.push_back(&r.record);
  suite.aggregate = aggregate_runs(ok, cfg.train.probe_budget);
  return suite;
}

// ---------------------------------------------------------------------------
// Export

std::string to_csv(const RunRecord& record) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : record.rows) {
    out += std::to_string(r.iteration) + ',' + std::to_string(r.system_probes) + ',' +
           fmt_double(r.avg_return) + ',' + fmt_double(r.grad_norm) + ',' + fmt_double(r.eta) +
           ',' + fmt_double(r.beta) + ',' + std::to_string(r.wall_ms) + '\n';
  }
  return out;
}

RunRecord from_csv(const std::string& text) {
  RunRecord record;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw IoError("CSV header does not match the run-record columns");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 7) throw IoError("CSV row has " + std::to_string(cells.size()) + " cells: " + line);
    RunRow r;
    r.iteration = parse_int("iteration", cells[0]);
    r.system_probes = parse_int("system_probes", cells[1]);
    r.avg_return = parse_double("avg_return", cells[2]);
    r.grad_norm = parse_double("grad_norm", cells[3]);
    r.eta = parse_double("eta", cells[4]);
    r.beta = parse_double("beta", cells[5]);
    r.wall_ms = parse_int("wall_ms", cells[6]);
    record.rows.push_back(r);
  }
  return record;
}

std::string to_json(const RunRecord& record) {
  nlohmann::ordered_json j;
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : record.metadata) j["metadata"][k] = v;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : record.rows) {
    nlohmann::ordered_json row;
    row["iteration"] = r.iteration;
    row["system_probes"] = r.system_probes;
    row["avg_return"] = r.avg_return;
    row["grad_norm"] = r.grad_norm;
    row["eta"] = r.eta;
    row["beta"] = r.beta;
    row["wall_ms"] = r.wall_ms;
    if (r.exact_grad_norm) row["exact_grad_norm"] = *r.exact_grad_norm;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

RunRecord from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunRecord record;
    for (const auto& [k, v] : j.at("metadata").items()) record.metadata[k] = v.get<std::string>();
    for (const auto& row : j.at("rows")) {
      RunRow r;
      r.iteration = row.at("iteration").get<std::int64_t>();
      r.system_probes = row.at("system_probes").get<std::int64_t>();
      r.avg_return = row.at("avg_return").get<double>();
      r.grad_norm = row.at("grad_norm").get<double>();
      r.eta = row.at("eta").get<double>();
      r.beta = row.at("beta").get<double>();
      r.wall_ms = row.at("wall_ms").get<std::int64_t>();
      if (row.contains("exact_grad_norm")) r.exact_grad_norm = row.at("exact_grad_norm").get<double>();
      record.rows.push_back(r);
    }
    return record;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("run-record JSON: ") + e.what());
  }
}

std::string aggregate_to_csv(const AggregateCurve& curve) {
  std::string out = "system_probes,mean_return,std_return\n";
  for (std::size_t i = 0; i < curve.bucket_end.size(); ++i)
    out += std::to_string(curve.bucket_end[i]) + ',' + fmt_double(curve.mean_return[i]) + ',' +
           fmt_double(curve.std_return[i]) + '\n';
  return out;
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << contents;
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> export_suite(const SuiteResult& suite, const std::string& dir,
                                      ExportFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  std::vector<std::string> written;
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (const auto& run : suite.runs) {
    const std::string base = (std::filesystem::path(dir) / ("run_seed" + std::to_string(run.seed))).string();
    const std::string path = base + (format == ExportFormat::Csv ? ".csv" : ".json");
    write_text_file(path, format == ExportFormat::Csv ? to_csv(run.record) : to_json(run.record));
    written.push_back(path);
    nlohmann::ordered_json entry;
    entry["seed"] = run.seed;
    entry["status"] = run.failed ? "failed" : "ok";
    if (run.failed) entry["error"] = run.error;
    entry["file"] = std::filesystem::path(path).filename().string();
    summary.push_back(std::move(entry));
  }
  const std::string agg = (std::filesystem::path(dir) / "aggregate.csv").string();
  write_text_file(agg, aggregate_to_csv(suite.aggregate));
  written.push_back(agg);
  const std::string sum = (std::filesystem::path(dir) / "suite.json").string();
  write_text_file(sum, summary.dump(2) + "\n");
  written.push_back(sum);
  return written;
}

}  // namespace mbpg
