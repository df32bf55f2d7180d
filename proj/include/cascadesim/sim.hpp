#pragma once

// Deterministic discrete-event engine for a fleet of open-loop devices
// sharing one batching server.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "cascadesim/cascade.hpp"
#include "cascadesim/scheduler.hpp"
#include "cascadesim/server.hpp"
#include "cascadesim/trace.hpp"

namespace cascadesim {

enum class EventKind {
  kDeviceSampleDone,
  kRequestArrival,
  kBatchComplete,
  kSchedulerTick,
  kThresholdApplied,
  kResponseArrival,
  kRunEnd,
};

std::string_view to_string(EventKind kind);

struct NetworkModel {
  double uplink_ms = 5.0;
  double downlink_ms = 5.0;
  bool operator==(const NetworkModel&) const = default;
};

struct DeviceSpec {
  DeviceId id = 0;
  Tier tier = Tier::kMid;
  double local_latency_ms = 43.0;
  Threshold initial_threshold;
  // First local inference begins here instead of at time 0.
  double start_offset_ms = 0.0;
};

struct SimulationConfig {
  std::vector<DeviceSpec> devices;
  BatchLatencyTable table;
  SchedulerKind scheduler_kind = SchedulerKind::kMultitasc;
  SchedulerConfig scheduler;
  NetworkModel network;
  // When false, a forwarded sample's latency starts at its uplink send.
  bool include_local_in_latency = true;
  std::optional<double> horizon_ms;
};

enum class SampleState { kNotStarted, kInFlight, kFinalized };

struct SampleLifetime {
  DeviceId device = 0;
  std::uint64_t sample_index = 0;
  double start_ms = 0.0;
  double completion_ms = 0.0;
  Location location = Location::kLocal;
  bool correct = false;
  // Threshold in force on the device when the forwarding decision was made.
  Threshold threshold;
  SampleState state = SampleState::kNotStarted;
  bool latency_includes_local = true;
  double local_latency_ms = 0.0;

  // End-to-end latency per the run's latency definition.
  double latency_ms() const {
    if (location == Location::kServer && !latency_includes_local) {
      return completion_ms - start_ms - local_latency_ms;
    }
    return completion_ms - start_ms;
  }

  bool operator==(const SampleLifetime&) const = default;
};

struct SimulationResult {
  std::vector<SampleLifetime> lifetimes;  // device-major, sample order
  std::map<DeviceId, Tier> tiers;
  double makespan_ms = 0.0;
  double mean_queue_length = 0.0;
  std::size_t max_queue_length = 0;
  std::int64_t capacity = 0;
  std::uint64_t batches_served = 0;
  std::uint64_t threshold_updates_applied = 0;
  std::uint64_t flush_entries = 0;
  std::uint64_t flush_exits = 0;
  std::uint64_t events_processed = 0;
  // Thresholds in force on each device when the run ended.
  std::map<DeviceId, Threshold> final_thresholds;
};

// Throws config-invalid or trace-missing. When `event_log` is set, each
// processed event is written as `time_ms\tseq\tkind\tpayload-json`.
SimulationResult run_simulation(const SimulationConfig& config,
                                const std::map<DeviceId, TraceSet>& traces,
                                std::ostream* event_log = nullptr);

// Sum over devices of forward_probability / local latency, in requests/s.
double estimate_arrival_rate(
    std::span<const std::pair<double, double>> forward_prob_and_latency_ms);

enum class ServerState { kUnderutilized, kEquilibrium, kOverloaded };

std::string_view to_string(ServerState state);

ServerState classify_server_state(double arrival_rate, double server_throughput);

}  // namespace cascadesim
