#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "experiment.hpp"

namespace mealrl {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutDirEnv = "MEALRL_OUT_DIR";

namespace cli_detail {

struct CliError : std::runtime_error {
  CliError(std::string kind_, const std::string& message) : std::runtime_error(message), kind(std::move(kind_)) {}
  std::string kind;
};

inline std::string default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? env : "mealrl-out";
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = default_out_dir();
};

/// Loads the experiment config (or the defaults) and applies CLI overrides.
inline ExperimentConfig resolve_config(const CommonOptions& o, const std::optional<std::string>& policy = {},
                                       const std::optional<int>& training_days = {},
                                       const std::optional<int>& test_days = {}) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_experiment_config(o.config_path);
  if (!policy && !training_days && !test_days && !o.seed) return cfg;
  auto doc = to_json(cfg);
  if (o.seed) doc["seed"] = *o.seed;
  if (policy) doc["policy"] = *policy;
  if (training_days) doc["training_days"] = *training_days;
  if (test_days) doc["test_days"] = *test_days;
  return experiment_config_from_json(doc);
}

inline std::string out_path(const CommonOptions& o, const std::string& file) {
  return (std::filesystem::path(o.out_dir) / file).string();
}

inline void prepare_out_dir(const CommonOptions& o) {
  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  if (ec) throw CliError("io", "cannot create output directory '" + o.out_dir + "': " + ec.message());
}

/// Everything needed to rerun a command: pass it back with --config.
inline void write_manifest(const CommonOptions& o, const std::string& command, const std::vector<std::string>& argv,
                           const ExperimentConfig& cfg, const nlohmann::json& outputs, const std::string& started,
                           double wall_seconds) {
  nlohmann::json m{{"command", command},
                   {"argv", argv},
                   {"config", to_json(cfg)},
                   {"seeds",
                    {{"experiment", cfg.seed},
                     {"agent_init", derive_seed(cfg.seed, SeedStream::AgentInit)},
                     {"exploration", derive_seed(cfg.seed, SeedStream::Exploration)}}},
                   {"version", kVersion},
                   {"outputs", outputs},
                   {"started_utc", started},
                   {"wall_seconds", wall_seconds}};
  write_text_file(out_path(o, "manifest.json"), m.dump(2) + "\n");
}

inline std::string per_day_csv(const std::vector<EpisodeMetrics>& days) {
  std::ostringstream out;
  out << "day," << std::string(kMetricsCsvHeader).substr(std::string("policy,").size()) << '\n';
  for (std::size_t d = 0; d < days.size(); ++d) out << d << metrics_csv_row("", days[d]) << '\n';
  return out.str();
}

inline std::vector<SweepAxis> load_grid(const std::string& spec) {
  if (spec == "hyper") return hyperparameter_grid();
  if (spec == "sensitivity") return sensitivity_grid();
  const auto doc = parse_json_text(read_text_file(spec), spec);
  std::vector<SweepAxis> axes;
  try {
    for (const auto& a : doc) axes.push_back({a.at("pointer").get<std::string>(), a.at("values").get<std::vector<nlohmann::json>>()});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("grid '" + spec + "': " + e.what());
  }
  if (axes.empty()) throw ConfigError("grid '" + spec + "' has no axes");
  return axes;
}

inline std::string order_log_csv(const std::vector<Order>& orders) {
  std::ostringstream out;
  out << "order,restaurant,origin_row,origin_col,dest_row,dest_col,placed,prep,status,courier,delivered,delivery_time\n";
  for (const auto& o : orders) {
    static const char* names[] = {"pending", "assigned", "delivered", "rejected"};
    out << o.id << ',' << o.restaurant_id << ',' << o.origin.row << ',' << o.origin.col << ',' << o.destination.row
        << ',' << o.destination.col << ',' << o.placed_minute << ',' << o.prep_time << ','
        << names[static_cast<int>(o.status)] << ',' << (o.assigned_courier ? std::to_string(*o.assigned_courier) : "")
        << ',' << (o.delivered_minute ? std::to_string(*o.delivered_minute) : "") << ','
        << (o.delivery_time() ? std::to_string(*o.delivery_time()) : "") << '\n';
  }
  return out.str();
}

}  // namespace cli_detail

/// Runs one CLI invocation. Returns the process exit code; errors are
/// reported on stderr as a single JSON line.
inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Courier dispatch simulation and reinforcement-learning toolkit", "mealrl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions common;
  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) {
      sub->add_option("--config", common.config_path, "Experiment config or run manifest (JSON)")
          ->check(CLI::ExistingFile);
    }
    sub->add_option("--seed", common.seed, "Seed for all randomness (overrides the config)");
    sub->add_option("--out-dir", common.out_dir, std::string("Output directory (default $") + kOutDirEnv + ")");
  };

  int height = 10, width = 10, restaurants = 7;
  std::string region_output;
  auto* gen = app.add_subcommand("generate-region", "Write a synthetic region file");
  gen->add_option("--height", height, "Grid rows")->check(CLI::PositiveNumber);
  gen->add_option("--width", width, "Grid columns")->check(CLI::PositiveNumber);
  gen->add_option("--restaurants", restaurants, "Restaurant count")->check(CLI::PositiveNumber);
  gen->add_option("--output", region_output, "Region file to write")->required();
  add_common(gen, false);

  std::optional<std::string> policy;
  std::optional<int> training_days, test_days;
  std::string checkpoint;
  std::vector<std::string> checkpoints;
  std::string grid = "hyper";
  int jobs = 1;
  int day = 0;
  bool trace = false;

  auto* train = app.add_subcommand("train", "Train a learning policy; writes log, checkpoint and manifest");
  add_common(train);
  train->add_option("--policy", policy, "Algorithm variant");
  train->add_option("--training-days", training_days)->check(CLI::NonNegativeNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a baseline or checkpoint on the test days");
  add_common(evaluate);
  evaluate->add_option("--policy", policy, "p45, p60 or a variant name (needs --checkpoint)");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file");
  evaluate->add_option("--test-days", test_days)->check(CLI::NonNegativeNumber);

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate every cell of a parameter grid");
  add_common(sweep);
  sweep->add_option("--grid", grid, "hyper, sensitivity or a grid JSON file");
  sweep->add_option("--jobs", jobs, "Parallel cells")->check(CLI::PositiveNumber);
  sweep->add_option("--training-days", training_days)->check(CLI::NonNegativeNumber);
  sweep->add_option("--test-days", test_days)->check(CLI::NonNegativeNumber);

  auto* compare = app.add_subcommand("compare", "Baselines vs. checkpoints on shared test seeds");
  add_common(compare);
  compare->add_option("--checkpoint", checkpoints, "Checkpoint file(s)");
  compare->add_option("--test-days", test_days)->check(CLI::NonNegativeNumber);

  auto* simulate = app.add_subcommand("simulate", "Play one test day under a policy and dump its order log");
  add_common(simulate);
  simulate->add_option("--policy", policy, "p45, p60 or a variant name (needs --checkpoint)");
  simulate->add_option("--checkpoint", checkpoint, "Checkpoint file");
  simulate->add_option("--day", day, "Test-day index")->check(CLI::NonNegativeNumber);
  simulate->add_flag("--trace", trace, "Also write the per-minute courier trace");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    out << app.help();
    err << nlohmann::json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  const auto started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  try {
    if (gen->parsed()) {
      const auto region = generate_synthetic_region(height, width, restaurants, common.seed.value_or(1));
      save_region(region, region_output);
      out << region_output << '\n';
      return 0;
    }

    if (train->parsed()) {
      const auto cfg = resolve_config(common, policy, training_days);
      if (!cfg.learned()) throw ConfigError("train: policy '" + cfg.policy + "' is not a learning variant");
      prepare_out_dir(common);
      const auto result = run_training(cfg);
      const auto log_path = out_path(common, "training_log.csv");
      const auto ck_path = out_path(common, "checkpoint.bin");
      write_text_file(log_path, training_log_csv(result.log));
      save_checkpoint(result.checkpoint, ck_path);
      write_manifest(common, "train", args, cfg, {{"training_log", log_path}, {"checkpoint", ck_path}}, started,
                     elapsed());
      out << log_path << '\n' << ck_path << '\n';
      return 0;
    }

    if (evaluate->parsed() || simulate->parsed()) {
      auto cfg = resolve_config(common, policy, {}, test_days);
      std::string ck = checkpoint;
      if (ck.empty() && cfg.learned() && !common.config_path.empty()) {
        // A train manifest names its checkpoint.
        const auto doc = parse_json_text(read_text_file(common.config_path), common.config_path);
        if (doc.contains("outputs") && doc["outputs"].contains("checkpoint")) {
          ck = doc["outputs"]["checkpoint"].get<std::string>();
        }
      }
      if (cfg.learned() && ck.empty()) throw ConfigError("policy '" + cfg.policy + "' needs --checkpoint");
      auto pol = make_policy(cfg.policy, ck);
      prepare_out_dir(common);

      if (simulate->parsed()) {
        cfg.test_days = day + 1;
        std::ostringstream trace_csv;
        trace_csv << "minute,courier,row,col,mode,event\n";
        World world(cfg.region, cfg.profile, {cfg.couriers, cfg.max_queue});
        if (trace) {
          world.set_trace([&](const TraceRow& r) {
            trace_csv << r.minute << ',' << r.courier << ',' << r.position.row << ',' << r.position.col << ','
                      << to_string(r.mode) << ',' << r.event << '\n';
          });
        }
        const auto outcome = simulate_day(world, day_orders(cfg, SeedStream::TestDays, day), day, cfg.reward_target,
                                          [&](const World& w, const SimEvent& ev, const Observation&) {
                                            return pol->decide(w, ev);
                                          });
        MetricsAccumulator acc(cfg.couriers);
        acc.add_day(world, outcome.cumulative_reward);
        nlohmann::json outputs;
        const auto orders_path = out_path(common, "orders.csv");
        write_text_file(orders_path, order_log_csv(world.orders()));
        outputs["orders"] = orders_path;
        if (trace) {
          const auto trace_path = out_path(common, "trace.csv");
          write_text_file(trace_path, trace_csv.str());
          outputs["trace"] = trace_path;
        }
        const auto summary_path = out_path(common, "summary.json");
        write_text_file(summary_path, to_json(acc.finish()).dump(2) + "\n");
        outputs["summary"] = summary_path;
        write_manifest(common, "simulate", args, cfg, outputs, started, elapsed());
        out << std::string(kMetricsCsvHeader) << '\n' << metrics_csv_row(pol->name(), acc.finish()) << '\n';
        return 0;
      }

      const auto result = run_evaluation(cfg, *pol);
      const auto results_path = out_path(common, "results.csv");
      const auto per_day_path = out_path(common, "per_day.csv");
      const auto summary_path = out_path(common, "summary.json");
      const auto row = metrics_csv_row(pol->name(), result.aggregate);
      write_text_file(results_path, std::string(kMetricsCsvHeader) + "\n" + row + "\n");
      write_text_file(per_day_path, per_day_csv(result.per_day));
      write_text_file(summary_path, to_json(result.aggregate).dump(2) + "\n");
      write_manifest(common, "evaluate", args, cfg,
                     {{"results", results_path}, {"per_day", per_day_path}, {"summary", summary_path},
                      {"checkpoint", ck}},
                     started, elapsed());
      out << kMetricsCsvHeader << '\n' << row << '\n';
      return 0;
    }

    if (compare->parsed()) {
      const auto cfg = resolve_config(common, {}, {}, test_days);
      prepare_out_dir(common);
      std::vector<std::unique_ptr<Policy>> policies;
      policies.push_back(make_policy("p45"));
      policies.push_back(make_policy("p60"));
      for (const auto& path : checkpoints) policies.push_back(make_policy("learned", path));
      std::string csv = std::string(kMetricsCsvHeader) + "\n";
      nlohmann::json summary = nlohmann::json::array();
      for (const auto& p : policies) {
        const auto m = run_evaluation(cfg, *p).aggregate;
        csv += metrics_csv_row(p->name(), m) + "\n";
        summary.push_back({{"policy", p->name()}, {"metrics", to_json(m)}});
      }
      const auto csv_path = out_path(common, "compare.csv");
      const auto summary_path = out_path(common, "summary.json");
      write_text_file(csv_path, csv);
      write_text_file(summary_path, summary.dump(2) + "\n");
      write_manifest(common, "compare", args, cfg, {{"results", csv_path}, {"summary", summary_path}}, started,
                     elapsed());
      out << csv;
      return 0;
    }

    if (sweep->parsed()) {
      const auto cfg = resolve_config(common, {}, training_days, test_days);
      const auto axes = load_grid(grid);
      prepare_out_dir(common);
      const auto rows = run_sweep(cfg, axes, jobs);
      nlohmann::json summary = nlohmann::json::array();
      for (const auto& r : rows) {
        summary.push_back({{"settings", r.settings}, {"metrics", to_json(r.metrics)}, {"error", r.error}});
      }
      const auto csv_path = out_path(common, "sweep.csv");
      const auto summary_path = out_path(common, "summary.json");
      const auto csv = sweep_csv(axes, rows);
      write_text_file(csv_path, csv);
      write_text_file(summary_path, summary.dump(2) + "\n");
      nlohmann::json grid_json = nlohmann::json::array();
      for (const auto& a : axes) grid_json.push_back({{"pointer", a.pointer}, {"values", a.values}});
      write_manifest(common, "sweep", args, cfg, {{"results", csv_path}, {"summary", summary_path}, {"grid", grid_json}},
                     started, elapsed());
      out << csv;
      const bool any_failed = std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.error.empty(); });
      return any_failed ? 1 : 0;
    }
  } catch (const ConfigError& e) {
    out << app.help();
    err << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const CliError& e) {
    err << nlohmann::json{{"error", e.kind}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << nlohmann::json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}

inline int cli_dispatch(int argc, char** argv) {
  return cli_dispatch(std::vector<std::string>(argv, argv + argc));
}

}  // namespace mealrl
