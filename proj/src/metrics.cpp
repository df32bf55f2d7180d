#include "cascadesim/metrics.hpp"

#include <charconv>
#include <cmath>

#include "cascadesim/error.hpp"

namespace cascadesim {

namespace {

bool started(const SampleLifetime& lt) { return lt.state != SampleState::kNotStarted; }

// Decided means the forwarding decision has been taken.
bool decided(const SampleLifetime& lt) {
  return lt.state == SampleState::kFinalized ||
         (lt.state == SampleState::kInFlight && lt.location == Location::kServer);
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double forward_fraction(std::span<const SampleLifetime> lifetimes) {
  std::size_t n = 0;
  std::size_t fwd = 0;
  for (const auto& lt : lifetimes) {
    if (!decided(lt)) continue;
    ++n;
    if (lt.location == Location::kServer) ++fwd;
  }
  return n == 0 ? 0.0 : static_cast<double>(fwd) / static_cast<double>(n);
}

}  // namespace

double slo_satisfaction(std::span<const SampleLifetime> lifetimes, double slo_ms) {
  std::size_t n = 0;
  std::size_t ok = 0;
  for (const auto& lt : lifetimes) {
    if (!started(lt)) continue;
    ++n;
    if (lt.state == SampleState::kFinalized && lt.latency_ms() <= slo_ms) ++ok;
  }
  if (n == 0) {
    throw Error(ErrorKind::kEmptyInput, "no sample lifetimes to evaluate");
  }
  return static_cast<double>(ok) / static_cast<double>(n);
}

double throughput(std::span<const SampleLifetime> lifetimes, double makespan_ms) {
  if (!(makespan_ms > 0.0)) {
    throw Error(ErrorKind::kInvalidParams, "makespan must be positive", "makespan");
  }
  const auto n = std::count_if(lifetimes.begin(), lifetimes.end(), [](const auto& lt) {
    return lt.state == SampleState::kFinalized;
  });
  return static_cast<double>(n) / (makespan_ms / 1000.0);
}

double accuracy(std::span<const SampleLifetime> lifetimes) {
  std::size_t n = 0;
  std::size_t ok = 0;
  for (const auto& lt : lifetimes) {
    if (lt.state != SampleState::kFinalized) continue;
    ++n;
    if (lt.correct) ++ok;
  }
  return n == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(n);
}

std::map<Tier, TierReport> aggregate_by_tier(std::span<const SampleLifetime> lifetimes,
                                             const std::map<DeviceId, Tier>& tiers,
                                             double makespan_ms,
                                             std::span<const double> slos_ms) {
  std::map<Tier, std::vector<SampleLifetime>> split;
  std::map<Tier, std::size_t> device_counts;
  for (const auto& [id, tier] : tiers) ++device_counts[tier];
  for (const auto& lt : lifetimes) split[tiers.at(lt.device)].push_back(lt);

  std::map<Tier, TierReport> out;
  for (const auto& [tier, group] : split) {
    TierReport r;
    r.devices = device_counts[tier];
    r.samples = group.size();
    r.accuracy = accuracy(group);
    r.throughput = makespan_ms > 0.0 ? throughput(group, makespan_ms) : 0.0;
    r.forward_rate = forward_fraction(group);
    const bool any_started = std::any_of(group.begin(), group.end(), started);
    for (double slo : slos_ms) {
      r.slo_satisfaction[slo] = any_started ? slo_satisfaction(group, slo) : 0.0;
    }
    out[tier] = std::move(r);
  }
  return out;
}

MetricsReport build_report(const SimulationResult& run,
                           std::span<const DeviceSpec> devices,
                           const BatchLatencyTable& table, double scheduler_slo_ms,
                           const ReportOptions& options) {
  const std::span<const SampleLifetime> lts(run.lifetimes);
  MetricsReport r;
  r.scheduler = options.scheduler;
  r.devices = devices.size();
  r.seed = options.seed;
  r.seeds = {options.seed};
  r.slo_ms = scheduler_slo_ms;

  r.total_throughput = run.makespan_ms > 0.0 ? throughput(lts, run.makespan_ms) : 0.0;
  r.cascade_accuracy = accuracy(lts);
  for (double slo : options.slos_ms) r.slo_satisfaction[slo] = slo_satisfaction(lts, slo);
  r.per_tier = aggregate_by_tier(lts, run.tiers, run.makespan_ms, options.slos_ms);
  r.forward_rate = forward_fraction(lts);
  r.mean_queue_length = run.mean_queue_length;
  r.max_queue_length = static_cast<double>(run.max_queue_length);
  r.capacity = run.capacity;
  r.makespan_s = run.makespan_ms / 1000.0;
  r.flush_entries = run.flush_entries;
  r.batches_served = run.batches_served;

  // Per-device forward probability for the arrival-rate estimate, and the
  // unweighted device mean accuracy. Lifetimes are stored device-major.
  std::vector<std::pair<double, double>> rates;
  double acc_sum = 0.0;
  std::size_t begin = 0;
  for (const auto& spec : devices) {
    std::size_t end = begin;
    while (end < lts.size() && lts[end].device == spec.id) ++end;
    const auto slice = lts.subspan(begin, end - begin);
    rates.emplace_back(forward_fraction(slice), spec.local_latency_ms);
    acc_sum += accuracy(slice);
    begin = end;
  }
  r.device_mean_accuracy = devices.empty() ? 0.0 : acc_sum / static_cast<double>(devices.size());
  r.arrival_rate = estimate_arrival_rate(rates);
  r.server_throughput = table.peak_throughput();
  r.slo_throughput = static_cast<double>(run.capacity) / scheduler_slo_ms * 1000.0;
  r.server_state = classify_server_state(r.arrival_rate, r.server_throughput);

  for (const auto& lt : lts) {
    if (lt.state == SampleState::kFinalized) {
      ++r.samples_finalized;
      if (lt.location == Location::kLocal) {
        ++r.samples_local;
      } else {
        ++r.samples_served;
      }
    } else if (lt.state == SampleState::kInFlight) {
      ++r.samples_in_flight;
    }
  }
  if (options.keep_lifetimes) r.sample_lifetimes = run.lifetimes;
  return r;
}

MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) {
    throw Error(ErrorKind::kEmptyInput, "no reports to average");
  }
  const double n = static_cast<double>(reports.size());
  MetricsReport m;
  m.scheduler = reports.front().scheduler;
  m.devices = reports.front().devices;
  m.slo_ms = reports.front().slo_ms;
  m.capacity = reports.front().capacity;
  m.server_throughput = reports.front().server_throughput;
  m.slo_throughput = reports.front().slo_throughput;

  auto avg = [&](auto field) {
    double s = 0.0;
    for (const auto& r : reports) s += static_cast<double>(r.*field);
    return s / n;
  };
  auto avg_u = [&](auto field) {
    return static_cast<std::uint64_t>(std::llround(avg(field)));
  };
  for (const auto& r : reports) {
    m.seeds.insert(m.seeds.end(), r.seeds.begin(), r.seeds.end());
  }
  m.total_throughput = avg(&MetricsReport::total_throughput);
  m.cascade_accuracy = avg(&MetricsReport::cascade_accuracy);
  m.device_mean_accuracy = avg(&MetricsReport::device_mean_accuracy);
  m.forward_rate = avg(&MetricsReport::forward_rate);
  m.mean_queue_length = avg(&MetricsReport::mean_queue_length);
  m.max_queue_length = avg(&MetricsReport::max_queue_length);
  m.arrival_rate = avg(&MetricsReport::arrival_rate);
  m.makespan_s = avg(&MetricsReport::makespan_s);
  m.samples_finalized = avg_u(&MetricsReport::samples_finalized);
  m.samples_local = avg_u(&MetricsReport::samples_local);
  m.samples_served = avg_u(&MetricsReport::samples_served);
  m.samples_in_flight = avg_u(&MetricsReport::samples_in_flight);
  m.flush_entries = avg_u(&MetricsReport::flush_entries);
  m.batches_served = avg_u(&MetricsReport::batches_served);
  m.server_state = classify_server_state(m.arrival_rate, m.server_throughput);

  for (const auto& [slo, _] : reports.front().slo_satisfaction) {
    double s = 0.0;
    for (const auto& r : reports) s += r.slo_satisfaction.at(slo);
    m.slo_satisfaction[slo] = s / n;
  }
  for (const auto& [tier, first] : reports.front().per_tier) {
    TierReport t;
    t.devices = first.devices;
    double samples = 0.0;
    for (const auto& r : reports) {
      const auto& x = r.per_tier.at(tier);
      samples += static_cast<double>(x.samples);
      t.accuracy += x.accuracy / n;
      t.throughput += x.throughput / n;
      t.forward_rate += x.forward_rate / n;
      for (const auto& [slo, v] : x.slo_satisfaction) t.slo_satisfaction[slo] += v / n;
    }
    t.samples = static_cast<std::size_t>(std::llround(samples / n));
    m.per_tier[tier] = std::move(t);
  }
  return m;
}

nlohmann::json to_json(const MetricsReport& r) {
  using nlohmann::json;
  auto slo_map = [](const std::map<double, double>& m) {
    json j = json::object();
    for (const auto& [slo, v] : m) j[format_number(slo)] = v;
    return j;
  };
  json j;
  j["scheduler"] = r.scheduler;
  j["devices"] = r.devices;
  j["seed"] = r.seed ? json(*r.seed) : json("mean");
  j["seeds"] = r.seeds;
  j["slo_ms"] = r.slo_ms;
  j["total_throughput"] = r.total_throughput;
  j["cascade_accuracy"] = r.cascade_accuracy;
  j["device_mean_accuracy"] = r.device_mean_accuracy;
  j["slo_satisfaction"] = slo_map(r.slo_satisfaction);
  json tiers = json::object();
  for (const auto& [tier, t] : r.per_tier) {
    tiers[std::string(to_string(tier))] = {
        {"devices", t.devices},
        {"samples", t.samples},
        {"accuracy", t.accuracy},
        {"throughput", t.throughput},
        {"forward_rate", t.forward_rate},
        {"slo_satisfaction", slo_map(t.slo_satisfaction)},
    };
  }
  j["per_tier"] = std::move(tiers);
  j["forward_rate"] = r.forward_rate;
  j["mean_queue_length"] = r.mean_queue_length;
  j["max_queue_length"] = r.max_queue_length;
  j["arrival_rate"] = r.arrival_rate;
  j["server_throughput"] = r.server_throughput;
  j["slo_throughput"] = r.slo_throughput;
  j["server_state"] = std::string(to_string(r.server_state));
  j["capacity"] = r.capacity;
  j["makespan_s"] = r.makespan_s;
  j["samples_finalized"] = r.samples_finalized;
  j["samples_local"] = r.samples_local;
  j["samples_served"] = r.samples_served;
  j["samples_in_flight"] = r.samples_in_flight;
  j["flush_entries"] = r.flush_entries;
  j["batches_served"] = r.batches_served;
  j["notes"] =
      "samples in flight at a forced horizon are excluded from accuracy and "
      "counted as SLO violations";
  if (r.sample_lifetimes) {
    json arr = json::array();
    for (const auto& lt : *r.sample_lifetimes) {
      if (lt.state == SampleState::kNotStarted) continue;
      arr.push_back({
          {"device", lt.device},
          {"sample", lt.sample_index},
          {"start_ms", lt.start_ms},
          {"completion_ms", lt.completion_ms},
          {"location", lt.location == Location::kLocal ? "local" : "server"},
          {"correct", lt.correct},
          {"threshold", lt.threshold.value()},
          {"finalized", lt.state == SampleState::kFinalized},
      });
    }
    j["sample_lifetimes"] = std::move(arr);
  }
  return j;
}

SweepRow sweep_row(const MetricsReport& report) {
  SweepRow row;
  row.devices = report.devices;
  row.seed = report.seed ? std::to_string(*report.seed) : "mean";
  row.scheduler = report.scheduler;
  row.slo_ms = report.slo_ms;
  const auto it = report.slo_satisfaction.find(report.slo_ms);
  row.satisfaction = it == report.slo_satisfaction.end() ? 0.0 : it->second;
  row.throughput = report.total_throughput;
  row.accuracy = report.cascade_accuracy;
  row.forward_rate = report.forward_rate;
  return row;
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "devices,seed,scheduler,slo_ms,satisfaction,throughput,accuracy,forward_rate\n";
  for (const auto& r : rows) {
    out << r.devices << ',' << r.seed << ',' << r.scheduler << ','
        << format_number(r.slo_ms) << ',' << format_number(r.satisfaction) << ','
        << format_number(r.throughput) << ',' << format_number(r.accuracy) << ','
        << format_number(r.forward_rate) << '\n';
  }
}

}  // namespace cascadesim
