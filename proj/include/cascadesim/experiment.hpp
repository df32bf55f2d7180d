#pragma once

// Experiment configuration (a JSON document), fleet/trace construction, and
// orchestration of single runs, multi-seed runs and device-count sweeps.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascadesim/cascade.hpp"
#include "cascadesim/metrics.hpp"
#include "cascadesim/scheduler.hpp"
#include "cascadesim/server.hpp"
#include "cascadesim/sim.hpp"
#include "cascadesim/trace.hpp"

namespace cascadesim {

struct CsvTraceSource {
  std::string path;
  std::optional<std::size_t> samples_per_device;
  std::optional<std::string> calibration_path;
  bool operator==(const CsvTraceSource&) const = default;
};

struct FleetEntry {
  Tier tier = Tier::kMid;
  int count = 1;
  double local_latency_ms = 43.0;
  std::string light_model;
  std::variant<SyntheticTraceParams, CsvTraceSource> trace;
  bool operator==(const FleetEntry&) const = default;
};

struct CalibrationSpec {
  double target_forward_rate = 0.30;
  double accuracy_tolerance = 0.01;
  std::int64_t count = 10000;
  std::uint64_t seed = 20230601;
  bool operator==(const CalibrationSpec&) const = default;
};

struct SchedulerSection {
  SchedulerKind kind = SchedulerKind::kMultitasc;
  SchedulerConfig params;  // slo_ms is set per run from the config's slos
  std::optional<double> static_threshold;
  CalibrationSpec calibration;
  bool operator==(const SchedulerSection&) const = default;
};

struct ExperimentConfig {
  std::string name;
  std::vector<FleetEntry> fleet;
  std::string server_model;
  BatchLatencyTable table;
  SchedulerSection scheduler;
  NetworkModel network;
  bool include_local_in_latency = true;
  // Each device's first inference starts at a seeded uniform offset in
  // [0, t_inf) so that devices are not phase-locked.
  bool stagger_start = true;
  std::vector<double> slos_ms{100.0, 200.0};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::optional<double> horizon_ms;

  std::size_t device_count() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Parses and validates. Errors carry the dotted field path, e.g.
// `server.batch_latency_table`. Relative CSV paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::string& base_dir = {});
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

void validate(const ExperimentConfig& config);

// Total device count `devices` split evenly over the fleet entries. Throws
// config-invalid when it does not divide evenly.
ExperimentConfig with_device_count(const ExperimentConfig& config, std::size_t devices);

// Calibrated (or configured static) threshold per fleet entry.
std::vector<CalibrationResult> resolve_thresholds(const ExperimentConfig& config);

struct Fleet {
  std::vector<DeviceSpec> devices;
  std::map<DeviceId, TraceSet> traces;
};

Fleet build_fleet(const ExperimentConfig& config, std::uint64_t seed,
                  const std::vector<CalibrationResult>& thresholds);

SimulationConfig make_simulation_config(const ExperimentConfig& config,
                                        const Fleet& fleet, SchedulerKind kind,
                                        double slo_ms);

struct RunResult {
  MetricsReport report;
  SimulationResult simulation;
};

RunResult run_experiment(const ExperimentConfig& config, SchedulerKind kind,
                         std::uint64_t seed, double slo_ms,
                         std::ostream* event_log = nullptr,
                         bool keep_lifetimes = false);

struct SimulateOutput {
  std::vector<MetricsReport> per_seed;  // (kind, slo, seed) order
  std::vector<MetricsReport> means;     // (kind, slo) order
};

SimulateOutput simulate(const ExperimentConfig& config,
                        const std::vector<SchedulerKind>& kinds,
                        bool keep_lifetimes = false);

struct DeviceRange {
  std::size_t first = 5;
  std::size_t last = 50;
  std::size_t step = 5;

  std::vector<std::size_t> points() const;
};

// Accepts `A..B:STEP` or `A..B` (step 1).
DeviceRange parse_device_range(const std::string& text);

// Per-seed and mean rows for every device count, scheduler kind and SLO.
// `progress`, when set, receives one call per finished sweep point.
std::vector<SweepRow> sweep(
    const ExperimentConfig& config, const DeviceRange& range,
    const std::vector<SchedulerKind>& kinds,
    const std::function<void(const MetricsReport&)>& progress = {});

}  // namespace cascadesim
