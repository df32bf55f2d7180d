#pragma once

// Evaluation metrics over a finished run: throughput, cascade accuracy,
// latency SLO satisfaction, and the same figures split by device tier.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascadesim/scheduler.hpp"
#include "cascadesim/sim.hpp"

namespace cascadesim {

// Fraction of started samples whose latency is within `slo_ms`. Samples still
// in flight count as violations. Throws empty-input when nothing started.
double slo_satisfaction(std::span<const SampleLifetime> lifetimes, double slo_ms);

// Finalized samples per second over `makespan_ms`.
double throughput(std::span<const SampleLifetime> lifetimes, double makespan_ms);

// Fraction of finalized samples that were classified correctly.
double accuracy(std::span<const SampleLifetime> lifetimes);

struct TierReport {
  std::size_t devices = 0;
  std::size_t samples = 0;
  double accuracy = 0.0;
  double throughput = 0.0;
  double forward_rate = 0.0;
  std::map<double, double> slo_satisfaction;

  bool operator==(const TierReport&) const = default;
};

std::map<Tier, TierReport> aggregate_by_tier(std::span<const SampleLifetime> lifetimes,
                                             const std::map<DeviceId, Tier>& tiers,
                                             double makespan_ms,
                                             std::span<const double> slos_ms);

struct MetricsReport {
  std::string scheduler;
  std::size_t devices = 0;
  std::optional<std::uint64_t> seed;  // absent for a cross-seed mean
  std::vector<std::uint64_t> seeds;
  double slo_ms = 0.0;  // SLO the scheduler's capacity was computed for

  double total_throughput = 0.0;
  double cascade_accuracy = 0.0;
  double device_mean_accuracy = 0.0;
  std::map<double, double> slo_satisfaction;
  std::map<Tier, TierReport> per_tier;
  double forward_rate = 0.0;
  double mean_queue_length = 0.0;
  double max_queue_length = 0.0;
  double arrival_rate = 0.0;
  double server_throughput = 0.0;  // peak batch throughput of the table
  double slo_throughput = 0.0;     // capacity / slo
  ServerState server_state = ServerState::kUnderutilized;
  std::int64_t capacity = 0;
  double makespan_s = 0.0;
  std::uint64_t samples_finalized = 0;
  std::uint64_t samples_local = 0;
  std::uint64_t samples_served = 0;
  std::uint64_t samples_in_flight = 0;
  std::uint64_t flush_entries = 0;
  std::uint64_t batches_served = 0;

  std::optional<std::vector<SampleLifetime>> sample_lifetimes;

  bool operator==(const MetricsReport&) const = default;
};

struct ReportOptions {
  std::string scheduler;
  std::uint64_t seed = 0;
  std::vector<double> slos_ms;
  bool keep_lifetimes = false;
};

MetricsReport build_report(const SimulationResult& run,
                           std::span<const DeviceSpec> devices,
                           const BatchLatencyTable& table, double scheduler_slo_ms,
                           const ReportOptions& options);

// Field-wise arithmetic mean of per-seed reports for one configuration.
MetricsReport mean_report(std::span<const MetricsReport> reports);

nlohmann::json to_json(const MetricsReport& report);

struct SweepRow {
  std::size_t devices = 0;
  std::string seed;  // seed number or "mean"
  std::string scheduler;
  double slo_ms = 0.0;
  double satisfaction = 0.0;
  double throughput = 0.0;
  double accuracy = 0.0;
  double forward_rate = 0.0;
};

SweepRow sweep_row(const MetricsReport& report);

// Header `devices,seed,scheduler,slo_ms,satisfaction,throughput,accuracy,forward_rate`.
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

}  // namespace cascadesim
