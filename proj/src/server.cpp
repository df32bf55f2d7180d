#include "cascadesim/server.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cascadesim/error.hpp"

namespace cascadesim {

namespace {

bool in_pool(int b) {
  return std::find(kBatchPool.begin(), kBatchPool.end(), b) != kBatchPool.end();
}

const std::string kTableField = "server.batch_latency_table";

}  // namespace

void BatchLatencyTable::validate() const {
  if (entries.empty() || !entries.contains(1)) {
    throw Error(ErrorKind::kConfigInvalid,
                "batch latency table must contain batch size 1", kTableField);
  }
  for (const auto& [b, lat] : entries) {
    if (!in_pool(b)) {
      throw Error(ErrorKind::kConfigInvalid,
                  "batch size " + std::to_string(b) + " not in {1,2,4,8,16,32,64}",
                  kTableField);
    }
    if (!(lat > 0.0) || !std::isfinite(lat)) {
      throw Error(ErrorKind::kConfigInvalid,
                  "latency for batch " + std::to_string(b) + " must be positive",
                  kTableField);
    }
  }
  if (!entries.contains(max_effective_batch)) {
    throw Error(ErrorKind::kConfigInvalid,
                "max_effective_batch must be one of the table's batch sizes",
                "server.max_effective_batch");
  }
  const auto sizes = usable_sizes();
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const int lo = sizes[i - 1];
    const int hi = sizes[i];
    if (hi / entries.at(hi) < lo / entries.at(lo)) {
      throw Error(ErrorKind::kConfigInvalid,
                  "throughput must not decrease from batch " + std::to_string(lo) +
                      " to " + std::to_string(hi) + " below max_effective_batch",
                  kTableField);
    }
  }
}

double BatchLatencyTable::latency(int batch) const {
  const auto it = entries.find(batch);
  if (it == entries.end()) {
    throw Error(ErrorKind::kConfigInvalid,
                "no latency for batch size " + std::to_string(batch), kTableField);
  }
  return it->second;
}

std::vector<int> BatchLatencyTable::usable_sizes() const {
  std::vector<int> out;
  for (const auto& [b, lat] : entries) {
    if (b <= max_effective_batch) out.push_back(b);
  }
  return out;
}

double BatchLatencyTable::peak_throughput() const {
  double best = 0.0;
  for (int b : usable_sizes()) best = std::max(best, 1000.0 * b / latency(b));
  return best;
}

BatchLatencyTable make_linear_table(double latency_at_1, double slope_ms,
                                    int max_effective_batch) {
  BatchLatencyTable t;
  for (int b : kBatchPool) {
    if (b > max_effective_batch) break;
    t.entries[b] = latency_at_1 + slope_ms * (b - 1);
  }
  t.max_effective_batch = max_effective_batch;
  return t;
}

std::optional<int> select_batch_size(std::size_t queue_length,
                                     const BatchLatencyTable& table) {
  std::optional<int> best;
  for (int b : table.usable_sizes()) {
    if (static_cast<std::size_t>(b) <= queue_length) best = b;
  }
  return best;
}

CapacityResult compute_capacity_greedy(const BatchLatencyTable& table,
                                       double slo_ms) {
  if (!(slo_ms > 0.0)) {
    throw Error(ErrorKind::kInvalidParams, "slo must be positive", "slo_ms");
  }
  CapacityResult result;
  double remaining = slo_ms;
  auto sizes = table.usable_sizes();
  for (auto it = sizes.rbegin(); it != sizes.rend(); ++it) {
    const double lat = table.latency(*it);
    // The epsilon absorbs representation error in remaining/lat near integers.
    const auto n = static_cast<std::int64_t>(std::floor(remaining / lat + 1e-9));
    if (n <= 0) continue;
    result.schedule.emplace_back(*it, n);
    result.capacity += static_cast<std::int64_t>(*it) * n;
    result.time_used += lat * static_cast<double>(n);
    remaining = std::max(0.0, slo_ms - result.time_used);
  }
  return result;
}

CapacityResult compute_capacity_exact(const BatchLatencyTable& table,
                                      double slo_ms, double grid_limit_ms) {
  if (!(slo_ms > 0.0)) {
    throw Error(ErrorKind::kInvalidParams, "slo must be positive", "slo");
  }
  if (slo_ms > grid_limit_ms) {
    throw Error(ErrorKind::kGridOverflow,
                "slo exceeds the exact solver's grid limit", "slo");
  }
  const auto budget = static_cast<std::size_t>(std::floor(slo_ms + 1e-9));
  struct Item {
    int batch;
    std::size_t cost;
  };
  std::vector<Item> items;
  for (int b : table.usable_sizes()) {
    items.push_back({b, static_cast<std::size_t>(std::ceil(table.latency(b) - 1e-9))});
  }

  // best[t]: max samples with total grid time <= t; choice[t]: item index of
  // the last batch used, -1 when best[t] == best[t-1].
  std::vector<std::int64_t> best(budget + 1, 0);
  std::vector<int> choice(budget + 1, -1);
  for (std::size_t t = 1; t <= budget; ++t) {
    best[t] = best[t - 1];
    for (std::size_t k = 0; k < items.size(); ++k) {
      const auto& it = items[k];
      if (it.cost > t) continue;
      const std::int64_t cand = best[t - it.cost] + it.batch;
      if (cand > best[t]) {
        best[t] = cand;
        choice[t] = static_cast<int>(k);
      }
    }
  }

  CapacityResult result;
  result.capacity = best[budget];
  std::map<int, std::int64_t> counts;
  std::size_t t = budget;
  while (t > 0) {
    if (choice[t] < 0) {
      --t;
      continue;
    }
    const auto& it = items[static_cast<std::size_t>(choice[t])];
    ++counts[it.batch];
    result.time_used += table.latency(it.batch);
    t -= it.cost;
  }
  for (auto it = counts.rbegin(); it != counts.rend(); ++it) {
    result.schedule.emplace_back(it->first, it->second);
  }
  return result;
}

double slo_throughput(const BatchLatencyTable& table, double slo_ms) {
  if (!(slo_ms > 0.0)) return 0.0;
  return 1000.0 * static_cast<double>(compute_capacity_greedy(table, slo_ms).capacity) /
         slo_ms;
}

std::vector<Request> RequestQueue::dequeue_batch(std::size_t batch) {
  if (batch > pending_.size()) {
    throw Error(ErrorKind::kUnderflow,
                "dequeue of " + std::to_string(batch) + " from queue of " +
                    std::to_string(pending_.size()));
  }
  std::vector<Request> out(pending_.begin(),
                           pending_.begin() + static_cast<std::ptrdiff_t>(batch));
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(batch));
  return out;
}

ServerModel::ServerModel(BatchLatencyTable table, double slo_ms)
    : table_(std::move(table)), slo_ms_(slo_ms) {
  table_.validate();
  capacity_ = compute_capacity_greedy(table_, slo_ms_);
}

void ServerModel::recompute_capacity(BatchLatencyTable table, double slo_ms) {
  table.validate();
  table_ = std::move(table);
  slo_ms_ = slo_ms;
  capacity_ = compute_capacity_greedy(table_, slo_ms_);
}

}  // namespace cascadesim
