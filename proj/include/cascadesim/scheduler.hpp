#pragma once

// Threshold control loop. Each tick the scheduler looks at the request queue
// length and the mean of recent batch sizes, both relative to the server's
// Capacity, and moves the thresholds of a fraction of the fleet by a fixed
// margin. Which devices move depends on their tier. An emergency flush zeroes
// every threshold while the queue is far beyond capacity.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascadesim/cascade.hpp"

namespace cascadesim {

enum class Tier { kLow, kMid, kHigh };

std::string_view to_string(Tier tier);
// Throws config-invalid for an unknown name.
Tier tier_from_string(std::string_view name);

using DeviceId = std::uint32_t;

struct SchedulerConfig {
  double update_fraction = 0.20;  // P
  double margin = 0.05;           // M
  int window = 5;                 // L, batches averaged into b_bar
  double alpha = 0.83;
  double beta = 0.125;
  double tick_period_ms = 2000.0;
  double flush_factor = 2.0;  // flush when QL > flush_factor * C
  double slo_ms = 100.0;

  void validate() const;
  bool operator==(const SchedulerConfig&) const = default;
};

struct DeviceState {
  DeviceId id = 0;
  Tier tier = Tier::kMid;
  Threshold threshold;
  double local_latency_ms = 0.0;
  std::uint64_t forward_count = 0;
  std::uint64_t sample_count = 0;

  double forward_probability() const {
    return sample_count == 0 ? 0.0
                             : static_cast<double>(forward_count) /
                                   static_cast<double>(sample_count);
  }
};

class SchedulerState {
 public:
  explicit SchedulerState(int window = 5) : window_(window) {}

  void record_batch(int batch_size);
  // Arithmetic mean of the retained batch sizes, 0 when none.
  double mean_recent_batch() const;
  const std::deque<int>& recent_batches() const { return recent_; }

  bool flush_active() const { return saved_.has_value(); }
  const std::optional<std::map<DeviceId, Threshold>>& saved_thresholds() const {
    return saved_;
  }
  void enter_flush(std::map<DeviceId, Threshold> saved) { saved_ = std::move(saved); }
  std::map<DeviceId, Threshold> exit_flush();

  // Tick of the device's last threshold change; -1 when never updated.
  std::int64_t last_update_tick(DeviceId id) const;
  void mark_updated(DeviceId id) { last_update_[id] = tick_; }

  std::int64_t tick_count() const { return tick_; }
  void advance_tick() { ++tick_; }

 private:
  int window_;
  std::deque<int> recent_;
  std::optional<std::map<DeviceId, Threshold>> saved_;
  std::map<DeviceId, std::int64_t> last_update_;
  std::int64_t tick_ = 0;
};

struct ThresholdUpdate {
  DeviceId device = 0;
  Threshold threshold;
  bool operator==(const ThresholdUpdate&) const = default;
};

enum class Direction { kDecrease, kIncrease };

// -margin, 0, or +margin.
double threshold_change(double mean_batch, std::size_t queue_length,
                        std::int64_t capacity, const SchedulerConfig& cfg);

// ceil(P * |devices|) ids in tier-priority, least-recently-updated, id order.
std::vector<DeviceId> select_update_targets(std::span<const DeviceState> devices,
                                            Direction direction,
                                            const SchedulerConfig& cfg,
                                            const SchedulerState& state);

enum class FlushTransition { kNone, kEnter, kExit };

struct FlushResult {
  FlushTransition transition = FlushTransition::kNone;
  std::vector<ThresholdUpdate> updates;
};

// Enters flush when QL > flush_factor * C, saving every threshold and zeroing
// it; leaves when QL <= beta * C, restoring the saved map.
FlushResult flush_check(SchedulerState& state, std::size_t queue_length,
                        std::int64_t capacity, const SchedulerConfig& cfg,
                        std::span<const DeviceState> devices);

// One control step. `devices` carries the thresholds the scheduler last
// issued; the caller applies the returned updates to it.
std::vector<ThresholdUpdate> scheduler_tick(std::span<const DeviceState> devices,
                                            SchedulerState& state,
                                            std::size_t queue_length,
                                            std::int64_t capacity,
                                            const SchedulerConfig& cfg);

// Fixed thresholds; never issues an update.
std::vector<ThresholdUpdate> baseline_tick(std::span<const DeviceState> devices,
                                           SchedulerState& state,
                                           std::size_t queue_length,
                                           std::int64_t capacity,
                                           const SchedulerConfig& cfg);

enum class SchedulerKind { kMultitasc, kStatic };

std::string_view to_string(SchedulerKind kind);
SchedulerKind scheduler_kind_from_string(std::string_view name);

}  // namespace cascadesim
