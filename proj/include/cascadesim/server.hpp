#pragma once

// Shared server model: batch-latency profile, dynamic batch-size selection,
// the Capacity metric (samples servable inside one SLO window), and the FIFO
// request queue.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace cascadesim {

inline constexpr std::array<int, 7> kBatchPool = {1, 2, 4, 8, 16, 32, 64};

struct BatchLatencyTable {
  std::map<int, double> entries;  // batch size -> latency (ms)
  int max_effective_batch = 1;

  // Throws config-invalid describing the first violated invariant.
  void validate() const;

  double latency(int batch) const;
  // Batch sizes usable for serving, ascending.
  std::vector<int> usable_sizes() const;
  // Highest b/latency(b) among usable sizes, in samples per second.
  double peak_throughput() const;

  bool operator==(const BatchLatencyTable&) const = default;
};

// latency(b) = latency_at_1 + slope * (b - 1) for every pool size up to
// max_effective_batch.
BatchLatencyTable make_linear_table(double latency_at_1, double slope_ms,
                                    int max_effective_batch);

std::optional<int> select_batch_size(std::size_t queue_length,
                                     const BatchLatencyTable& table);

struct CapacityResult {
  std::int64_t capacity = 0;
  std::vector<std::pair<int, std::int64_t>> schedule;  // (batch size, count)
  double time_used = 0.0;

  bool operator==(const CapacityResult&) const = default;
};

CapacityResult compute_capacity_greedy(const BatchLatencyTable& table,
                                       double slo_ms);

inline constexpr double kDefaultCapacityGridLimitMs = 60000.0;

// Exact unbounded-knapsack solution on a 1 ms grid; latencies are rounded up
// to the grid and the SLO is rounded down.
CapacityResult compute_capacity_exact(
    const BatchLatencyTable& table, double slo_ms,
    double grid_limit_ms = kDefaultCapacityGridLimitMs);

// Samples per second the server sustains while every batch still fits into
// the SLO window: capacity / slo.
double slo_throughput(const BatchLatencyTable& table, double slo_ms);

struct Request {
  std::uint32_t device_id = 0;
  std::uint64_t sample_index = 0;
  double enqueue_ms = 0.0;

  bool operator==(const Request&) const = default;
};

class RequestQueue {
 public:
  void enqueue(const Request& request) { pending_.push_back(request); }
  // Removes the `batch` oldest requests. Throws underflow when fewer remain.
  std::vector<Request> dequeue_batch(std::size_t batch);

  std::size_t size() const { return pending_.size(); }
  bool empty() const { return pending_.empty(); }
  const Request& front() const { return pending_.front(); }

 private:
  std::deque<Request> pending_;
};

// Caches the capacity for a (table, slo) pair.
class ServerModel {
 public:
  ServerModel(BatchLatencyTable table, double slo_ms);

  const BatchLatencyTable& table() const { return table_; }
  double slo_ms() const { return slo_ms_; }
  const CapacityResult& capacity() const { return capacity_; }

  // For latency tables that change during a run.
  void recompute_capacity(BatchLatencyTable table, double slo_ms);

 private:
  BatchLatencyTable table_;
  double slo_ms_;
  CapacityResult capacity_;
};

}  // namespace cascadesim
