// Command-line front end: simulate, sweep, capacity, calibrate, generate-trace.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cascadesim/cascade.hpp"
#include "cascadesim/error.hpp"
#include "cascadesim/experiment.hpp"
#include "cascadesim/metrics.hpp"
#include "cascadesim/server.hpp"
#include "cascadesim/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cascadesim;

namespace {

// Writes through a temporary file so readers never observe partial output.
void write_atomically(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string(), tmp.string());
    out << content;
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + tmp.string(), tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorKind::kConfigInvalid, "bad seed '" + item + "' in --seed-list",
                  "seeds");
    }
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw Error(ErrorKind::kConfigInvalid, "empty --seed-list", "seeds");
  return seeds;
}

std::vector<SchedulerKind> parse_kinds(const std::string& text, SchedulerKind fallback) {
  if (text.empty()) return {fallback};
  if (text == "both") return {SchedulerKind::kMultitasc, SchedulerKind::kStatic};
  return {scheduler_kind_from_string(text)};
}

std::string number_label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

json capacity_json(const CapacityResult& r) {
  json sched = json::array();
  for (const auto& [b, n] : r.schedule) sched.push_back({b, n});
  return {{"capacity", r.capacity}, {"schedule", sched}, {"time_used_ms", r.time_used}};
}

BatchLatencyTable table_from_json_text(const std::string& text, int max_effective) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfigParse, std::string("bad --table: ") + e.what(), "table");
  }
  json server{{"batch_latency_table", j}};
  int max_key = 1;
  if (j.is_object()) {
    for (const auto& [k, _] : j.items()) {
      try {
        max_key = std::max(max_key, std::stoi(k));
      } catch (const std::exception&) {
      }
    }
  }
  server["max_effective_batch"] = max_effective > 0 ? max_effective : max_key;
  // Reuse the config parser for validation and field-path errors.
  json doc{{"fleet", json::array({{{"tier", "mid"},
                                   {"count", 1},
                                   {"t_inf_ms", 1.0},
                                   {"trace",
                                    {{"synthetic",
                                      {{"light_accuracy", 0.5},
                                       {"heavy_accuracy_given_light_correct", 0.5},
                                       {"heavy_accuracy_given_light_wrong", 0.5},
                                       {"count", 1}}}}}}})},
           {"server", server},
           {"scheduler", {{"kind", "static"}}}};
  return parse_experiment_config(doc).table;
}

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::string& seed_list, const std::string& kind_text,
                 const std::string& event_log, int devices, bool lifetimes) {
  auto cfg = load_experiment_config(config_path);
  if (!seed_list.empty()) cfg.seeds = parse_seed_list(seed_list);
  if (devices > 0) cfg = with_device_count(cfg, static_cast<std::size_t>(devices));
  const auto kinds = parse_kinds(kind_text, cfg.scheduler.kind);
  const std::size_t runs = kinds.size() * cfg.slos_ms.size() * cfg.seeds.size();

  json written = json::array();
  for (auto kind : kinds) {
    for (double slo : cfg.slos_ms) {
      std::vector<MetricsReport> group;
      for (auto seed : cfg.seeds) {
        const std::string tag = std::string(to_string(kind)) + "_slo" + number_label(slo);
        std::ostringstream log;
        auto run = run_experiment(cfg, kind, seed, slo, event_log.empty() ? nullptr : &log,
                                  lifetimes);
        if (!event_log.empty()) {
          std::string path = event_log;
          if (runs > 1) path += "." + tag + "_seed" + std::to_string(seed);
          write_atomically(path, log.str());
          written.push_back(path);
        }
        const fs::path p = fs::path(out_dir) / ("report_" + tag + "_seed" +
                                                std::to_string(seed) + ".json");
        write_atomically(p, to_json(run.report).dump(2) + "\n");
        written.push_back(p.string());
        run.report.sample_lifetimes.reset();
        group.push_back(std::move(run.report));
      }
      const auto mean = mean_report(group);
      const fs::path p = fs::path(out_dir) / ("report_" + std::string(to_string(kind)) +
                                              "_slo" + number_label(slo) + "_mean.json");
      write_atomically(p, to_json(mean).dump(2) + "\n");
      written.push_back(p.string());
    }
  }
  std::cout << json{{"status", "ok"}, {"files", written}}.dump(2) << "\n";
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& range_text,
              const std::string& out_dir, const std::string& seed_list,
              const std::string& kind_text) {
  auto cfg = load_experiment_config(config_path);
  if (!seed_list.empty()) cfg.seeds = parse_seed_list(seed_list);
  const auto range = parse_device_range(range_text);
  const auto kinds = parse_kinds(kind_text.empty() ? "both" : kind_text, cfg.scheduler.kind);
  const auto rows = sweep(cfg, range, kinds, [](const MetricsReport& r) {
    std::cerr << "devices=" << r.devices << " scheduler=" << r.scheduler
              << " slo=" << r.slo_ms << " satisfaction=" << r.slo_satisfaction.at(r.slo_ms)
              << " throughput=" << r.total_throughput << " accuracy=" << r.cascade_accuracy
              << "\n";
  });
  std::ostringstream csv;
  write_sweep_csv(rows, csv);
  const fs::path p = fs::path(out_dir) / "sweep.csv";
  write_atomically(p, csv.str());
  std::cout << json{{"status", "ok"}, {"files", {p.string()}}, {"rows", rows.size()}}.dump(2)
            << "\n";
  return 0;
}

int run_capacity(const std::string& config_path, const std::string& table_text,
                 double slo, int max_effective, bool exact) {
  BatchLatencyTable table;
  if (!config_path.empty()) {
    table = load_experiment_config(config_path).table;
  } else if (!table_text.empty()) {
    table = table_from_json_text(table_text, max_effective);
  } else {
    throw Error(ErrorKind::kConfigInvalid, "one of --config or --table is required",
                "server.batch_latency_table");
  }
  if (!(slo > 0.0)) throw Error(ErrorKind::kInvalidParams, "slo must be positive", "slo");
  json out = capacity_json(compute_capacity_greedy(table, slo));
  out["slo_ms"] = slo;
  out["max_effective_batch"] = table.max_effective_batch;
  out["peak_throughput"] = table.peak_throughput();
  if (exact) out["exact"] = capacity_json(compute_capacity_exact(table, slo));
  std::cout << out.dump(2) << "\n";
  return 0;
}

json calibration_json(const CalibrationResult& r) {
  return {{"threshold", r.threshold.value()},
          {"forward_rate", r.forward_rate},
          {"accuracy", r.accuracy},
          {"max_accuracy", r.max_accuracy},
          {"fallback_used", r.fallback_used}};
}

int run_calibrate(const std::string& config_path, const std::string& trace_path,
                  double target, double tolerance) {
  if (!trace_path.empty()) {
    const auto trace = load_trace_csv_file(trace_path);
    std::cout << calibration_json(calibrate_static_threshold_detailed(trace, target, tolerance))
                     .dump(2)
              << "\n";
    return 0;
  }
  if (config_path.empty()) {
    throw Error(ErrorKind::kConfigInvalid, "one of --config or --trace is required", "trace");
  }
  auto cfg = load_experiment_config(config_path);
  cfg.scheduler.calibration.target_forward_rate = target;
  cfg.scheduler.calibration.accuracy_tolerance = tolerance;
  cfg.scheduler.static_threshold.reset();
  validate(cfg);
  const auto results = resolve_thresholds(cfg);
  json arr = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    json j = calibration_json(results[i]);
    j["tier"] = std::string(to_string(cfg.fleet[i].tier));
    j["light_model"] = cfg.fleet[i].light_model;
    arr.push_back(std::move(j));
  }
  std::cout << json{{"server_model", cfg.server_model}, {"calibrations", arr}}.dump(2) << "\n";
  return 0;
}

int run_generate_trace(const std::string& config_path, std::size_t entry, std::uint64_t seed,
                       const std::string& out_path) {
  const auto cfg = load_experiment_config(config_path);
  if (entry >= cfg.fleet.size()) {
    throw Error(ErrorKind::kConfigInvalid, "fleet entry out of range", "fleet");
  }
  const auto* params = std::get_if<SyntheticTraceParams>(&cfg.fleet[entry].trace);
  if (!params) {
    throw Error(ErrorKind::kConfigInvalid, "fleet entry does not use a synthetic trace",
                "fleet[" + std::to_string(entry) + "].trace");
  }
  std::ostringstream csv;
  write_trace_csv(generate_synthetic_trace(*params, seed), csv);
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    write_atomically(out_path, csv.str());
  }
  return 0;
}

void print_error(const std::string& kind, const std::string& message,
                 const std::string& field = {}) {
  json j{{"error", kind}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator for multi-device DNN cascades sharing one server"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", seed_list, kind_text, event_log, range_text;
  std::string table_text, trace_path, out_path;
  int devices = 0;
  int max_effective = 0;
  bool lifetimes = false;
  bool exact = false;
  double slo = 0.0;
  double target = 0.30;
  double tolerance = 0.01;
  std::size_t entry = 0;
  std::uint64_t seed = 1;

  auto* simulate_cmd = app.add_subcommand("simulate", "Run every (scheduler, SLO, seed) combination");
  simulate_cmd->add_option("--config", config_path, "Experiment config JSON")->required();
  simulate_cmd->add_option("--out", out_dir, "Output directory for reports");
  simulate_cmd->add_option("--seed-list", seed_list, "Comma-separated seeds overriding the config");
  simulate_cmd->add_option("--scheduler", kind_text, "multitasc|static|both");
  simulate_cmd->add_option("--event-log", event_log, "Write the event log to this path");
  simulate_cmd->add_option("--devices", devices, "Override the total device count");
  simulate_cmd->add_flag("--lifetimes", lifetimes, "Include per-sample lifetimes in reports");

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep over device counts and emit CSV");
  sweep_cmd->add_option("--config", config_path, "Experiment config JSON")->required();
  sweep_cmd->add_option("--devices", range_text, "Device range A..B:STEP")->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory for sweep.csv");
  sweep_cmd->add_option("--seed-list", seed_list, "Comma-separated seeds overriding the config");
  sweep_cmd->add_option("--scheduler", kind_text, "multitasc|static|both (default both)");

  auto* capacity_cmd = app.add_subcommand("capacity", "Compute the server Capacity for an SLO");
  capacity_cmd->add_option("--config", config_path, "Take the table from this config");
  capacity_cmd->add_option("--table", table_text, R"(Batch latency table, e.g. {"1":10,"2":12})");
  capacity_cmd->add_option("--slo", slo, "Latency SLO in ms")->required();
  capacity_cmd->add_option("--max-effective", max_effective, "Largest batch size to use");
  capacity_cmd->add_flag("--exact", exact, "Also run the exact knapsack solver");

  auto* calibrate_cmd = app.add_subcommand("calibrate", "Calibrate the static threshold");
  calibrate_cmd->add_option("--config", config_path, "Calibrate every fleet entry of a config");
  calibrate_cmd->add_option("--trace", trace_path, "Calibrate on a trace CSV");
  calibrate_cmd->add_option("--target", target, "Target forward rate (default 0.30)");
  calibrate_cmd->add_option("--tolerance", tolerance, "Accuracy tolerance (default 0.01)");

  auto* gen_cmd = app.add_subcommand("generate-trace", "Write a synthetic trace as CSV");
  gen_cmd->add_option("--config", config_path, "Experiment config JSON")->required();
  gen_cmd->add_option("--entry", entry, "Fleet entry index");
  gen_cmd->add_option("--seed", seed, "Generator seed");
  gen_cmd->add_option("--out", out_path, "Output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 64;
  }

  try {
    if (*simulate_cmd) {
      return run_simulate(config_path, out_dir, seed_list, kind_text, event_log, devices,
                          lifetimes);
    }
    if (*sweep_cmd) return run_sweep(config_path, range_text, out_dir, seed_list, kind_text);
    if (*capacity_cmd) return run_capacity(config_path, table_text, slo, max_effective, exact);
    if (*calibrate_cmd) return run_calibrate(config_path, trace_path, target, tolerance);
    if (*gen_cmd) return run_generate_trace(config_path, entry, seed, out_path);
  } catch (const Error& e) {
    print_error(std::string(to_string(e.kind())), e.what(), e.field());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 3;
  }
  return 0;
}
