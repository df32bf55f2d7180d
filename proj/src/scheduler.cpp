#include "cascadesim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "cascadesim/error.hpp"

namespace cascadesim {

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::kLow: return "low";
    case Tier::kMid: return "mid";
    case Tier::kHigh: return "high";
  }
  return "mid";
}

Tier tier_from_string(std::string_view name) {
  if (name == "low") return Tier::kLow;
  if (name == "mid") return Tier::kMid;
  if (name == "high") return Tier::kHigh;
  throw Error(ErrorKind::kConfigInvalid,
              "unknown tier '" + std::string(name) + "'", "tier");
}

std::string_view to_string(SchedulerKind kind) {
  return kind == SchedulerKind::kMultitasc ? "multitasc" : "static";
}

SchedulerKind scheduler_kind_from_string(std::string_view name) {
  if (name == "multitasc") return SchedulerKind::kMultitasc;
  if (name == "static") return SchedulerKind::kStatic;
  throw Error(ErrorKind::kConfigInvalid,
              "unknown scheduler kind '" + std::string(name) + "'",
              "scheduler.kind");
}

void SchedulerConfig::validate() const {
  auto fail = [](const char* field, const char* what) {
    throw Error(ErrorKind::kConfigInvalid, std::string(field) + ": " + what,
                std::string("scheduler.") + field);
  };
  if (!(update_fraction >= 0.0 && update_fraction <= 1.0)) {
    fail("update_fraction", "must lie in [0,1]");
  }
  if (!(margin >= 0.0 && margin <= 1.0)) fail("margin", "must lie in [0,1]");
  if (window < 1) fail("window", "must be a positive integer");
  if (!(alpha > 0.0)) fail("alpha", "must be positive");
  if (!(beta > 0.0)) fail("beta", "must be positive");
  if (!(beta < alpha)) fail("beta", "must be smaller than alpha");
  if (!(tick_period_ms > 0.0)) fail("tick_period_ms", "must be positive");
  if (!(flush_factor > 0.0)) fail("flush_factor", "must be positive");
  if (!(slo_ms > 0.0)) fail("slo_ms", "must be positive");
}

void SchedulerState::record_batch(int batch_size) {
  recent_.push_back(batch_size);
  while (recent_.size() > static_cast<std::size_t>(std::max(window_, 0))) {
    recent_.pop_front();
  }
}

double SchedulerState::mean_recent_batch() const {
  if (recent_.empty()) return 0.0;
  const double sum = std::accumulate(recent_.begin(), recent_.end(), 0.0);
  return sum / static_cast<double>(recent_.size());
}

std::map<DeviceId, Threshold> SchedulerState::exit_flush() {
  auto saved = std::move(saved_).value_or(std::map<DeviceId, Threshold>{});
  saved_.reset();
  return saved;
}

std::int64_t SchedulerState::last_update_tick(DeviceId id) const {
  const auto it = last_update_.find(id);
  return it == last_update_.end() ? -1 : it->second;
}

double threshold_change(double mean_batch, std::size_t queue_length,
                        std::int64_t capacity, const SchedulerConfig& cfg) {
  const double c = static_cast<double>(capacity);
  const double ql = static_cast<double>(queue_length);
  if (mean_batch > cfg.alpha * c && ql > cfg.alpha * c) return -cfg.margin;
  if (mean_batch <= cfg.beta * c && ql <= cfg.beta * c) return cfg.margin;
  return 0.0;
}

std::vector<DeviceId> select_update_targets(std::span<const DeviceState> devices,
                                            Direction direction,
                                            const SchedulerConfig& cfg,
                                            const SchedulerState& state) {
  auto rank = [direction](Tier t) {
    // decrease: high, mid, low; increase: low, mid, high
    const int r = static_cast<int>(t);
    return direction == Direction::kIncrease ? r : 2 - r;
  };
  std::vector<const DeviceState*> order;
  order.reserve(devices.size());
  for (const auto& d : devices) order.push_back(&d);
  std::sort(order.begin(), order.end(), [&](const DeviceState* a, const DeviceState* b) {
    const auto ka = std::tuple(rank(a->tier), state.last_update_tick(a->id), a->id);
    const auto kb = std::tuple(rank(b->tier), state.last_update_tick(b->id), b->id);
    return ka < kb;
  });

  // The epsilon keeps products like 0.2 * 15 from rounding up past an integer.
  const double want = std::ceil(cfg.update_fraction * static_cast<double>(devices.size()) - 1e-9);
  const auto count = static_cast<std::size_t>(
      std::clamp(want, 0.0, static_cast<double>(devices.size())));
  std::vector<DeviceId> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(order[i]->id);
  return out;
}

FlushResult flush_check(SchedulerState& state, std::size_t queue_length,
                        std::int64_t capacity, const SchedulerConfig& cfg,
                        std::span<const DeviceState> devices) {
  FlushResult result;
  const double c = static_cast<double>(capacity);
  const double ql = static_cast<double>(queue_length);
  if (!state.flush_active() && ql > cfg.flush_factor * c) {
    std::map<DeviceId, Threshold> saved;
    for (const auto& d : devices) {
      saved[d.id] = d.threshold;
      result.updates.push_back({d.id, Threshold(0.0)});
    }
    state.enter_flush(std::move(saved));
    result.transition = FlushTransition::kEnter;
  } else if (state.flush_active() && ql <= cfg.beta * c) {
    for (const auto& [id, t] : state.exit_flush()) {
      result.updates.push_back({id, t});
    }
    result.transition = FlushTransition::kExit;
  }
  return result;
}

std::vector<ThresholdUpdate> scheduler_tick(std::span<const DeviceState> devices,
                                            SchedulerState& state,
                                            std::size_t queue_length,
                                            std::int64_t capacity,
                                            const SchedulerConfig& cfg) {
  state.advance_tick();
  auto flush = flush_check(state, queue_length, capacity, cfg, devices);
  if (flush.transition != FlushTransition::kNone || state.flush_active()) {
    return std::move(flush.updates);
  }

  const double change =
      threshold_change(state.mean_recent_batch(), queue_length, capacity, cfg);
  if (change == 0.0 || devices.empty()) return {};

  const auto direction = change < 0.0 ? Direction::kDecrease : Direction::kIncrease;
  const auto targets = select_update_targets(devices, direction, cfg, state);
  std::vector<ThresholdUpdate> updates;
  updates.reserve(targets.size());
  for (DeviceId id : targets) {
    const auto it = std::find_if(devices.begin(), devices.end(),
                                 [id](const DeviceState& d) { return d.id == id; });
    updates.push_back({id, Threshold(it->threshold.value() + change)});
    state.mark_updated(id);
  }
  return updates;
}

std::vector<ThresholdUpdate> baseline_tick(std::span<const DeviceState>,
                                           SchedulerState& state, std::size_t,
                                           std::int64_t, const SchedulerConfig&) {
  state.advance_tick();
  return {};
}

}  // namespace cascadesim
