#include "cascadesim/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <queue>
#include <string>

#include <nlohmann/json.hpp>

#include "cascadesim/error.hpp"

namespace cascadesim {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kDeviceSampleDone: return "device_sample_done";
    case EventKind::kRequestArrival: return "request_arrival";
    case EventKind::kBatchComplete: return "batch_complete";
    case EventKind::kSchedulerTick: return "scheduler_tick";
    case EventKind::kThresholdApplied: return "threshold_applied";
    case EventKind::kResponseArrival: return "response_arrival";
    case EventKind::kRunEnd: return "run_end";
  }
  return "unknown";
}

std::string_view to_string(ServerState state) {
  switch (state) {
    case ServerState::kUnderutilized: return "underutilized";
    case ServerState::kEquilibrium: return "equilibrium";
    case ServerState::kOverloaded: return "overloaded";
  }
  return "unknown";
}

double estimate_arrival_rate(
    std::span<const std::pair<double, double>> forward_prob_and_latency_ms) {
  double rate = 0.0;
  for (const auto& [p, t_inf_ms] : forward_prob_and_latency_ms) {
    rate += p / (t_inf_ms / 1000.0);
  }
  return rate;
}

ServerState classify_server_state(double arrival_rate, double server_throughput) {
  const double eps = 1e-9 * std::max(std::abs(arrival_rate), std::abs(server_throughput));
  if (std::abs(arrival_rate - server_throughput) <= eps) return ServerState::kEquilibrium;
  return arrival_rate < server_throughput ? ServerState::kUnderutilized
                                          : ServerState::kOverloaded;
}

namespace {

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kRunEnd;
  std::size_t device = 0;  // index into the fleet
  std::uint64_t sample = 0;
  double value = 0.0;  // threshold for kThresholdApplied
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

std::string format_ms(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

class Engine {
 public:
  Engine(const SimulationConfig& config, const std::map<DeviceId, TraceSet>& traces,
         std::ostream* log)
      : cfg_(config), log_(log), server_(config.table, config.scheduler.slo_ms),
        sched_state_(config.scheduler.window) {
    validate(traces);
    const std::size_t n = cfg_.devices.size();
    traces_.reserve(n);
    active_threshold_.resize(n);
    sample_offset_.resize(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& spec = cfg_.devices[i];
      const TraceSet& trace = traces.at(spec.id);
      traces_.push_back(&trace);
      sample_offset_[i] = total;
      total += trace.size();
      active_threshold_[i] = spec.initial_threshold;
      device_view_.push_back(DeviceState{spec.id, spec.tier, spec.initial_threshold,
                                         spec.local_latency_ms, 0, 0});
      id_to_index_[spec.id] = i;
      result_.tiers[spec.id] = spec.tier;
    }
    result_.lifetimes.resize(total);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < traces_[i]->size(); ++k) {
        auto& lt = result_.lifetimes[sample_offset_[i] + k];
        lt.device = cfg_.devices[i].id;
        lt.sample_index = k;
        lt.latency_includes_local = cfg_.include_local_in_latency;
        lt.local_latency_ms = cfg_.devices[i].local_latency_ms;
      }
    }
    total_samples_ = total;
    result_.capacity = server_.capacity().capacity;
  }

  SimulationResult run() {
    for (std::size_t i = 0; i < cfg_.devices.size(); ++i) {
      start_sample(i, 0, cfg_.devices[i].start_offset_ms);
    }
    push({cfg_.scheduler.tick_period_ms, 0, EventKind::kSchedulerTick});
    if (cfg_.horizon_ms) push({*cfg_.horizon_ms, 0, EventKind::kRunEnd});

    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      advance_clock(ev.time);
      ++result_.events_processed;
      if (ev.kind == EventKind::kRunEnd) {
        log_event(ev, nlohmann::json{{"finalized", finalized_}, {"total", total_samples_}});
        break;
      }
      dispatch(ev);
    }

    result_.makespan_ms = last_completion_ms_;
    if (cfg_.horizon_ms && finalized_ < total_samples_) {
      result_.makespan_ms = *cfg_.horizon_ms;
    }
    result_.mean_queue_length =
        result_.makespan_ms > 0.0 ? queue_area_ / result_.makespan_ms : 0.0;
    for (std::size_t i = 0; i < cfg_.devices.size(); ++i) {
      result_.final_thresholds[cfg_.devices[i].id] = active_threshold_[i];
    }
    return std::move(result_);
  }

 private:
  void validate(const std::map<DeviceId, TraceSet>& traces) const {
    if (cfg_.devices.empty()) {
      throw Error(ErrorKind::kConfigInvalid, "fleet must contain at least one device",
                  "fleet");
    }
    if (cfg_.network.uplink_ms < 0.0 || cfg_.network.downlink_ms < 0.0) {
      throw Error(ErrorKind::kConfigInvalid, "network delays must be non-negative",
                  "network");
    }
    if (cfg_.scheduler_kind == SchedulerKind::kMultitasc) {
      if (!(cfg_.scheduler.tick_period_ms > 0.0) || !(cfg_.scheduler.slo_ms > 0.0)) {
        throw Error(ErrorKind::kConfigInvalid, "tick period and slo must be positive",
                    "scheduler");
      }
    } else if (!(cfg_.scheduler.tick_period_ms > 0.0)) {
      throw Error(ErrorKind::kConfigInvalid, "tick period must be positive",
                  "scheduler.tick_period_ms");
    }
    std::map<DeviceId, int> seen;
    for (const auto& d : cfg_.devices) {
      if (++seen[d.id] > 1) {
        throw Error(ErrorKind::kConfigInvalid,
                    "duplicate device id " + std::to_string(d.id), "fleet");
      }
      if (!(d.start_offset_ms >= 0.0)) {
        throw Error(ErrorKind::kConfigInvalid, "start offset must be non-negative",
                    "fleet");
      }
      if (!(d.local_latency_ms > 0.0)) {
        throw Error(ErrorKind::kConfigInvalid, "local latency must be positive",
                    "fleet.t_inf_ms");
      }
      const auto it = traces.find(d.id);
      if (it == traces.end()) {
        throw Error(ErrorKind::kTraceMissing,
                    "no trace bound to device " + std::to_string(d.id), "fleet");
      }
      if (it->second.empty()) {
        throw Error(ErrorKind::kEmptyTrace,
                    "empty trace bound to device " + std::to_string(d.id), "fleet");
      }
    }
  }

  void push(Event ev) {
    ev.seq = next_seq_++;
    events_.push(ev);
  }

  void advance_clock(double t) {
    queue_area_ += static_cast<double>(queue_.size()) * (t - now_);
    now_ = t;
  }

  SampleLifetime& lifetime(std::size_t device, std::uint64_t sample) {
    return result_.lifetimes[sample_offset_[device] + sample];
  }

  void start_sample(std::size_t device, std::uint64_t sample, double t) {
    auto& lt = lifetime(device, sample);
    lt.start_ms = t;
    lt.state = SampleState::kInFlight;
    push({t + cfg_.devices[device].local_latency_ms, 0, EventKind::kDeviceSampleDone,
          device, sample});
  }

  void finalize(SampleLifetime& lt, Location where, bool correct) {
    lt.completion_ms = now_;
    lt.location = where;
    lt.correct = correct;
    lt.state = SampleState::kFinalized;
    last_completion_ms_ = now_;
    if (++finalized_ == total_samples_) push({now_, 0, EventKind::kRunEnd});
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::kDeviceSampleDone: on_sample_done(ev); break;
      case EventKind::kRequestArrival: on_request_arrival(ev); break;
      case EventKind::kBatchComplete: on_batch_complete(ev); break;
      case EventKind::kSchedulerTick: on_tick(ev); break;
      case EventKind::kThresholdApplied: on_threshold_applied(ev); break;
      case EventKind::kResponseArrival: on_response(ev); break;
      case EventKind::kRunEnd: break;
    }
  }

  void on_sample_done(const Event& ev) {
    const std::size_t d = ev.device;
    const TraceRecord& rec = traces_[d]->records[ev.sample];
    auto& lt = lifetime(d, ev.sample);
    lt.threshold = active_threshold_[d];
    const Decision decision = decide(rec.bvsb, active_threshold_[d]);
    auto& view = device_view_[d];
    ++view.sample_count;

    log_event(ev, {{"device", cfg_.devices[d].id},
                   {"sample", ev.sample},
                   {"threshold", lt.threshold.value()},
                   {"decision", decision == Decision::kKeepLocal ? "local" : "forward"}});

    if (decision == Decision::kKeepLocal) {
      finalize(lt, Location::kLocal, rec.light_correct);
    } else {
      ++view.forward_count;
      lt.location = Location::kServer;
      push({now_ + cfg_.network.uplink_ms, 0, EventKind::kRequestArrival, d, ev.sample});
    }
    if (ev.sample + 1 < traces_[d]->size()) start_sample(d, ev.sample + 1, now_);
  }

  void on_request_arrival(const Event& ev) {
    queue_.enqueue({cfg_.devices[ev.device].id, ev.sample, now_});
    result_.max_queue_length = std::max(result_.max_queue_length, queue_.size());
    log_event(ev, {{"device", cfg_.devices[ev.device].id},
                   {"sample", ev.sample},
                   {"queue_length", queue_.size()}});
    if (!busy_) launch_batch();
  }

  void launch_batch() {
    const auto b = select_batch_size(queue_.size(), server_.table());
    if (!b) return;
    in_service_ = queue_.dequeue_batch(static_cast<std::size_t>(*b));
    busy_ = true;
    push({now_ + server_.table().latency(*b), 0, EventKind::kBatchComplete, 0,
          static_cast<std::uint64_t>(*b)});
  }

  void on_batch_complete(const Event& ev) {
    const int b = static_cast<int>(ev.sample);
    sched_state_.record_batch(b);
    ++result_.batches_served;
    nlohmann::json reqs = nlohmann::json::array();
    for (const auto& r : in_service_) {
      reqs.push_back({r.device_id, r.sample_index});
      push({now_ + cfg_.network.downlink_ms, 0, EventKind::kResponseArrival,
            id_to_index_.at(r.device_id), r.sample_index});
    }
    in_service_.clear();
    busy_ = false;
    log_event(ev, {{"batch", b}, {"requests", std::move(reqs)},
                   {"queue_length", queue_.size()}});
    if (!queue_.empty()) launch_batch();
  }

  void on_response(const Event& ev) {
    const TraceRecord& rec = traces_[ev.device]->records[ev.sample];
    log_event(ev, {{"device", cfg_.devices[ev.device].id}, {"sample", ev.sample}});
    finalize(lifetime(ev.device, ev.sample), Location::kServer, rec.heavy_correct);
  }

  void on_tick(const Event& ev) {
    const bool was_flushing = sched_state_.flush_active();
    const double mean_batch = sched_state_.mean_recent_batch();
    const std::int64_t capacity = server_.capacity().capacity;
    std::vector<ThresholdUpdate> updates;
    if (cfg_.scheduler_kind == SchedulerKind::kMultitasc) {
      updates = scheduler_tick(device_view_, sched_state_, queue_.size(), capacity,
                               cfg_.scheduler);
    } else {
      updates = baseline_tick(device_view_, sched_state_, queue_.size(), capacity,
                              cfg_.scheduler);
    }
    const bool flushing = sched_state_.flush_active();
    std::string flush = "none";
    if (!was_flushing && flushing) {
      flush = "enter";
      ++result_.flush_entries;
    } else if (was_flushing && !flushing) {
      flush = "exit";
      ++result_.flush_exits;
    } else if (flushing) {
      flush = "active";
    }

    nlohmann::json ups = nlohmann::json::array();
    for (const auto& u : updates) {
      const std::size_t idx = id_to_index_.at(u.device);
      device_view_[idx].threshold = u.threshold;
      ups.push_back({u.device, u.threshold.value()});
      push({now_ + cfg_.network.downlink_ms, 0, EventKind::kThresholdApplied, idx, 0,
            u.threshold.value()});
    }
    log_event(ev, {{"tick", sched_state_.tick_count()},
                   {"queue_length", queue_.size()},
                   {"mean_batch", mean_batch},
                   {"capacity", capacity},
                   {"flush", flush},
                   {"updates", std::move(ups)}});

    if (finalized_ < total_samples_) {
      push({now_ + cfg_.scheduler.tick_period_ms, 0, EventKind::kSchedulerTick});
    }
  }

  void on_threshold_applied(const Event& ev) {
    active_threshold_[ev.device] = Threshold(ev.value);
    ++result_.threshold_updates_applied;
    log_event(ev, {{"device", cfg_.devices[ev.device].id}, {"threshold", ev.value}});
  }

  void log_event(const Event& ev, const nlohmann::json& payload) {
    if (log_ == nullptr) return;
    *log_ << format_ms(ev.time) << '\t' << ev.seq << '\t' << to_string(ev.kind) << '\t'
          << payload.dump() << '\n';
  }

  const SimulationConfig& cfg_;
  std::ostream* log_;
  ServerModel server_;
  SchedulerState sched_state_;
  RequestQueue queue_;
  std::vector<Request> in_service_;
  bool busy_ = false;

  std::vector<const TraceSet*> traces_;
  std::vector<Threshold> active_threshold_;
  std::vector<DeviceState> device_view_;
  std::vector<std::size_t> sample_offset_;
  std::map<DeviceId, std::size_t> id_to_index_;

  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
  double queue_area_ = 0.0;
  double last_completion_ms_ = 0.0;
  std::size_t finalized_ = 0;
  std::size_t total_samples_ = 0;
  SimulationResult result_;
};

}  // namespace

SimulationResult run_simulation(const SimulationConfig& config,
                                const std::map<DeviceId, TraceSet>& traces,
                                std::ostream* event_log) {
  if (config.scheduler_kind == SchedulerKind::kMultitasc &&
      config.scheduler.window < 1) {
    throw Error(ErrorKind::kConfigInvalid, "window must be positive",
                "scheduler.window");
  }
  Engine engine(config, traces, event_log);
  return engine.run();
}

}  // namespace cascadesim
