#include "cascadesim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "cascadesim/error.hpp"

namespace cascadesim {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kConfigInvalid, path + ": " + what, path);
}

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) invalid(join(path, key), "required field missing");
  return obj.at(key);
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) invalid(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) invalid(path, "expected a finite number");
  return v;
}

std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) invalid(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) invalid(path, "expected a string");
  return j.get<std::string>();
}

double number_or(const json& obj, const std::string& key, const std::string& path,
                 double fallback) {
  return obj.contains(key) ? get_number(obj.at(key), join(path, key)) : fallback;
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (key == "notes") continue;
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      invalid(join(path, key), "unknown field");
    }
  }
}

BetaShape parse_shape(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) invalid(path, "expected [a, b]");
  return {get_number(j[0], path + "[0]"), get_number(j[1], path + "[1]")};
}

SyntheticTraceParams parse_synthetic(const json& j, const std::string& path) {
  if (!j.is_object()) invalid(path, "expected an object");
  reject_unknown(j, path,
                 {"light_accuracy", "heavy_accuracy", "heavy_accuracy_given_light_correct",
                  "heavy_accuracy_given_light_wrong", "bvsb_shape_correct",
                  "bvsb_shape_wrong", "count"});
  SyntheticTraceParams p;
  p.light_accuracy = get_number(require(j, "light_accuracy", path), join(path, "light_accuracy"));
  p.heavy_accuracy_given_light_correct =
      get_number(require(j, "heavy_accuracy_given_light_correct", path),
                 join(path, "heavy_accuracy_given_light_correct"));
  if (j.contains("heavy_accuracy_given_light_wrong")) {
    p.heavy_accuracy_given_light_wrong =
        get_number(j.at("heavy_accuracy_given_light_wrong"),
                   join(path, "heavy_accuracy_given_light_wrong"));
  } else if (j.contains("heavy_accuracy")) {
    try {
      p.heavy_accuracy_given_light_wrong = heavy_accuracy_given_light_wrong_for(
          p.light_accuracy, get_number(j.at("heavy_accuracy"), join(path, "heavy_accuracy")),
          p.heavy_accuracy_given_light_correct);
    } catch (const Error& e) {
      invalid(join(path, "heavy_accuracy"), e.what());
    }
  } else {
    invalid(join(path, "heavy_accuracy"),
            "either heavy_accuracy or heavy_accuracy_given_light_wrong is required");
  }
  if (j.contains("bvsb_shape_correct")) {
    p.bvsb_shape_correct = parse_shape(j.at("bvsb_shape_correct"), join(path, "bvsb_shape_correct"));
  }
  if (j.contains("bvsb_shape_wrong")) {
    p.bvsb_shape_wrong = parse_shape(j.at("bvsb_shape_wrong"), join(path, "bvsb_shape_wrong"));
  }
  p.count = get_integer(require(j, "count", path), join(path, "count"));
  try {
    p.validate();
  } catch (const Error& e) {
    invalid(e.field().empty() ? path : join(path, e.field()), e.what());
  }
  return p;
}

BatchLatencyTable parse_server_table(const json& server) {
  BatchLatencyTable table;
  const int max_eff = static_cast<int>(get_integer(
      require(server, "max_effective_batch", "server"), "server.max_effective_batch"));
  if (server.contains("batch_latency_table")) {
    const auto& t = server.at("batch_latency_table");
    const std::string path = "server.batch_latency_table";
    if (!t.is_object() || t.empty()) invalid(path, "expected a non-empty object");
    for (const auto& [key, value] : t.items()) {
      int b = 0;
      try {
        std::size_t used = 0;
        b = std::stoi(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        invalid(path + "." + key, "batch size keys must be integers");
      }
      table.entries[b] = get_number(value, path + "." + key);
    }
  } else if (server.contains("linear_latency_model")) {
    const auto& m = server.at("linear_latency_model");
    const std::string path = "server.linear_latency_model";
    reject_unknown(m, path, {"latency_at_1", "slope_ms"});
    table = make_linear_table(
        get_number(require(m, "latency_at_1", path), path + ".latency_at_1"),
        get_number(require(m, "slope_ms", path), path + ".slope_ms"), max_eff);
  } else {
    invalid("server.batch_latency_table", "required field missing");
  }
  table.max_effective_batch = max_eff;
  table.validate();
  return table;
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
  if (base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

FleetEntry parse_fleet_entry(const json& j, const std::string& path,
                             const std::string& base_dir) {
  if (!j.is_object()) invalid(path, "expected an object");
  reject_unknown(j, path, {"tier", "count", "t_inf_ms", "light_model", "trace"});
  FleetEntry e;
  try {
    e.tier = tier_from_string(get_string(require(j, "tier", path), join(path, "tier")));
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::kConfigInvalid && err.field() == "tier") {
      invalid(join(path, "tier"), err.what());
    }
    throw;
  }
  e.count = static_cast<int>(get_integer(require(j, "count", path), join(path, "count")));
  if (e.count < 1) invalid(join(path, "count"), "must be positive");
  e.local_latency_ms = get_number(require(j, "t_inf_ms", path), join(path, "t_inf_ms"));
  if (!(e.local_latency_ms > 0.0)) invalid(join(path, "t_inf_ms"), "must be positive");
  if (j.contains("light_model")) e.light_model = get_string(j.at("light_model"), join(path, "light_model"));

  const std::string tpath = join(path, "trace");
  const auto& trace = require(j, "trace", path);
  if (trace.contains("synthetic") == trace.contains("csv")) {
    invalid(tpath, "exactly one of 'synthetic' or 'csv' is required");
  }
  if (trace.contains("synthetic")) {
    e.trace = parse_synthetic(trace.at("synthetic"), tpath + ".synthetic");
  } else {
    const auto& c = trace.at("csv");
    const std::string cpath = tpath + ".csv";
    reject_unknown(c, cpath, {"path", "samples_per_device", "calibration_path"});
    CsvTraceSource src;
    src.path = resolve_path(get_string(require(c, "path", cpath), cpath + ".path"), base_dir);
    if (c.contains("samples_per_device")) {
      const auto n = get_integer(c.at("samples_per_device"), cpath + ".samples_per_device");
      if (n < 1) invalid(cpath + ".samples_per_device", "must be positive");
      src.samples_per_device = static_cast<std::size_t>(n);
    }
    if (c.contains("calibration_path")) {
      src.calibration_path = resolve_path(
          get_string(c.at("calibration_path"), cpath + ".calibration_path"), base_dir);
    }
    e.trace = src;
  }
  return e;
}

json shape_json(const BetaShape& s) { return json::array({s.a, s.b}); }

}  // namespace

std::size_t ExperimentConfig::device_count() const {
  std::size_t n = 0;
  for (const auto& e : fleet) n += static_cast<std::size_t>(e.count);
  return n;
}

ExperimentConfig parse_experiment_config(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) invalid("$", "config must be a JSON object");
  reject_unknown(doc, "", {"name", "fleet", "server", "scheduler", "network", "slos",
                           "seeds", "horizon_ms", "stagger_start"});
  ExperimentConfig cfg;
  if (doc.contains("name")) cfg.name = get_string(doc.at("name"), "name");

  const auto& fleet = require(doc, "fleet", "");
  if (!fleet.is_array() || fleet.empty()) invalid("fleet", "must be a non-empty array");
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    cfg.fleet.push_back(
        parse_fleet_entry(fleet[i], "fleet[" + std::to_string(i) + "]", base_dir));
  }

  const auto& server = require(doc, "server", "");
  if (!server.is_object()) invalid("server", "expected an object");
  reject_unknown(server, "server",
                 {"model", "batch_latency_table", "linear_latency_model", "max_effective_batch"});
  if (server.contains("model")) cfg.server_model = get_string(server.at("model"), "server.model");
  cfg.table = parse_server_table(server);

  const auto& sched = require(doc, "scheduler", "");
  if (!sched.is_object()) invalid("scheduler", "expected an object");
  reject_unknown(sched, "scheduler",
                 {"kind", "update_fraction", "margin", "window", "alpha", "beta",
                  "tick_period_ms", "flush_factor", "static_threshold", "calibration"});
  cfg.scheduler.kind = scheduler_kind_from_string(
      get_string(require(sched, "kind", "scheduler"), "scheduler.kind"));
  auto& p = cfg.scheduler.params;
  p.update_fraction = number_or(sched, "update_fraction", "scheduler", p.update_fraction);
  p.margin = number_or(sched, "margin", "scheduler", p.margin);
  if (sched.contains("window")) {
    p.window = static_cast<int>(get_integer(sched.at("window"), "scheduler.window"));
  }
  p.alpha = number_or(sched, "alpha", "scheduler", p.alpha);
  p.beta = number_or(sched, "beta", "scheduler", p.beta);
  p.tick_period_ms = number_or(sched, "tick_period_ms", "scheduler", p.tick_period_ms);
  p.flush_factor = number_or(sched, "flush_factor", "scheduler", p.flush_factor);
  if (sched.contains("static_threshold")) {
    const double t = get_number(sched.at("static_threshold"), "scheduler.static_threshold");
    if (t < 0.0 || t > 1.0) invalid("scheduler.static_threshold", "must lie in [0,1]");
    cfg.scheduler.static_threshold = t;
  }
  if (sched.contains("calibration")) {
    const auto& c = sched.at("calibration");
    const std::string path = "scheduler.calibration";
    reject_unknown(c, path, {"target_forward_rate", "accuracy_tolerance", "count", "seed"});
    auto& cal = cfg.scheduler.calibration;
    cal.target_forward_rate = number_or(c, "target_forward_rate", path, cal.target_forward_rate);
    cal.accuracy_tolerance = number_or(c, "accuracy_tolerance", path, cal.accuracy_tolerance);
    if (c.contains("count")) cal.count = get_integer(c.at("count"), path + ".count");
    if (c.contains("seed")) {
      cal.seed = static_cast<std::uint64_t>(get_integer(c.at("seed"), path + ".seed"));
    }
  }

  if (doc.contains("network")) {
    const auto& n = doc.at("network");
    reject_unknown(n, "network", {"uplink_ms", "downlink_ms", "include_local_in_latency"});
    cfg.network.uplink_ms = number_or(n, "uplink_ms", "network", cfg.network.uplink_ms);
    cfg.network.downlink_ms = number_or(n, "downlink_ms", "network", cfg.network.downlink_ms);
    if (n.contains("include_local_in_latency")) {
      const auto& v = n.at("include_local_in_latency");
      if (!v.is_boolean()) invalid("network.include_local_in_latency", "expected a boolean");
      cfg.include_local_in_latency = v.get<bool>();
    }
  }

  if (doc.contains("slos")) {
    const auto& s = doc.at("slos");
    if (!s.is_array()) invalid("slos", "expected an array");
    cfg.slos_ms.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      cfg.slos_ms.push_back(get_number(s[i], "slos[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("seeds")) {
    const auto& s = doc.at("seeds");
    if (!s.is_array()) invalid("seeds", "expected an array");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto v = get_integer(s[i], "seeds[" + std::to_string(i) + "]");
      if (v < 0) invalid("seeds[" + std::to_string(i) + "]", "must be non-negative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }
  if (doc.contains("stagger_start")) {
    if (!doc.at("stagger_start").is_boolean()) invalid("stagger_start", "expected a boolean");
    cfg.stagger_start = doc.at("stagger_start").get<bool>();
  }
  if (doc.contains("horizon_ms")) cfg.horizon_ms = get_number(doc.at("horizon_ms"), "horizon_ms");

  validate(cfg);
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.fleet.empty()) invalid("fleet", "must be non-empty");
  cfg.table.validate();
  auto params = cfg.scheduler.params;
  if (cfg.scheduler.kind == SchedulerKind::kMultitasc) {
    params.validate();
  } else if (!(params.tick_period_ms > 0.0)) {
    invalid("scheduler.tick_period_ms", "must be positive");
  }
  const auto& cal = cfg.scheduler.calibration;
  if (!(cal.target_forward_rate > 0.0 && cal.target_forward_rate < 1.0)) {
    invalid("scheduler.calibration.target_forward_rate", "must lie in (0,1)");
  }
  if (!(cal.accuracy_tolerance >= 0.0)) {
    invalid("scheduler.calibration.accuracy_tolerance", "must be non-negative");
  }
  if (cal.count < 1) invalid("scheduler.calibration.count", "must be positive");
  for (std::size_t i = 0; i < cfg.fleet.size(); ++i) {
    const auto* csv = std::get_if<CsvTraceSource>(&cfg.fleet[i].trace);
    if (csv && !cfg.scheduler.static_threshold && !csv->calibration_path) {
      invalid("fleet[" + std::to_string(i) + "].trace.csv.calibration_path",
              "required unless scheduler.static_threshold is set");
    }
  }
  if (cfg.network.uplink_ms < 0.0) invalid("network.uplink_ms", "must be non-negative");
  if (cfg.network.downlink_ms < 0.0) invalid("network.downlink_ms", "must be non-negative");
  if (cfg.slos_ms.empty()) invalid("slos", "must be non-empty");
  for (std::size_t i = 0; i < cfg.slos_ms.size(); ++i) {
    if (!(cfg.slos_ms[i] > 0.0)) invalid("slos[" + std::to_string(i) + "]", "must be positive");
  }
  if (cfg.seeds.empty()) invalid("seeds", "must be non-empty");
  if (cfg.horizon_ms && !(*cfg.horizon_ms > 0.0)) invalid("horizon_ms", "must be positive");
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path, path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfigParse, std::string("config parse error: ") + e.what(), path);
  }
  return parse_experiment_config(doc, std::filesystem::path(path).parent_path().string());
}

json to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["name"] = cfg.name;
  json fleet = json::array();
  for (const auto& e : cfg.fleet) {
    json entry;
    entry["tier"] = std::string(to_string(e.tier));
    entry["count"] = e.count;
    entry["t_inf_ms"] = e.local_latency_ms;
    entry["light_model"] = e.light_model;
    if (const auto* s = std::get_if<SyntheticTraceParams>(&e.trace)) {
      entry["trace"]["synthetic"] = {
          {"light_accuracy", s->light_accuracy},
          {"heavy_accuracy_given_light_correct", s->heavy_accuracy_given_light_correct},
          {"heavy_accuracy_given_light_wrong", s->heavy_accuracy_given_light_wrong},
          {"bvsb_shape_correct", shape_json(s->bvsb_shape_correct)},
          {"bvsb_shape_wrong", shape_json(s->bvsb_shape_wrong)},
          {"count", s->count},
      };
    } else {
      const auto& c = std::get<CsvTraceSource>(e.trace);
      json cj{{"path", c.path}};
      if (c.samples_per_device) cj["samples_per_device"] = *c.samples_per_device;
      if (c.calibration_path) cj["calibration_path"] = *c.calibration_path;
      entry["trace"]["csv"] = std::move(cj);
    }
    fleet.push_back(std::move(entry));
  }
  doc["fleet"] = std::move(fleet);

  json table = json::object();
  for (const auto& [b, lat] : cfg.table.entries) table[std::to_string(b)] = lat;
  doc["server"] = {{"model", cfg.server_model},
                   {"batch_latency_table", std::move(table)},
                   {"max_effective_batch", cfg.table.max_effective_batch}};

  const auto& p = cfg.scheduler.params;
  json sched{{"kind", std::string(to_string(cfg.scheduler.kind))},
             {"update_fraction", p.update_fraction},
             {"margin", p.margin},
             {"window", p.window},
             {"alpha", p.alpha},
             {"beta", p.beta},
             {"tick_period_ms", p.tick_period_ms},
             {"flush_factor", p.flush_factor},
             {"calibration",
              {{"target_forward_rate", cfg.scheduler.calibration.target_forward_rate},
               {"accuracy_tolerance", cfg.scheduler.calibration.accuracy_tolerance},
               {"count", cfg.scheduler.calibration.count},
               {"seed", cfg.scheduler.calibration.seed}}}};
  if (cfg.scheduler.static_threshold) sched["static_threshold"] = *cfg.scheduler.static_threshold;
  doc["scheduler"] = std::move(sched);
  doc["network"] = {{"uplink_ms", cfg.network.uplink_ms},
                    {"downlink_ms", cfg.network.downlink_ms},
                    {"include_local_in_latency", cfg.include_local_in_latency}};
  doc["slos"] = cfg.slos_ms;
  doc["seeds"] = cfg.seeds;
  doc["stagger_start"] = cfg.stagger_start;
  if (cfg.horizon_ms) doc["horizon_ms"] = *cfg.horizon_ms;
  return doc;
}

ExperimentConfig with_device_count(const ExperimentConfig& config, std::size_t devices) {
  const std::size_t groups = config.fleet.size();
  if (devices == 0) invalid("fleet", "device count must be positive");
  if (devices % groups != 0) {
    invalid("fleet", "device count " + std::to_string(devices) +
                         " does not split evenly over " + std::to_string(groups) + " tiers");
  }
  ExperimentConfig out = config;
  for (auto& e : out.fleet) e.count = static_cast<int>(devices / groups);
  return out;
}

std::vector<CalibrationResult> resolve_thresholds(const ExperimentConfig& config) {
  std::vector<CalibrationResult> out;
  const auto& cal = config.scheduler.calibration;
  for (std::size_t i = 0; i < config.fleet.size(); ++i) {
    const auto& e = config.fleet[i];
    if (config.scheduler.static_threshold) {
      CalibrationResult r;
      r.threshold = Threshold(*config.scheduler.static_threshold);
      out.push_back(r);
      continue;
    }
    TraceSet calib;
    if (const auto* s = std::get_if<SyntheticTraceParams>(&e.trace)) {
      SyntheticTraceParams p = *s;
      p.count = cal.count;
      // Held-out stream: seeded independently of every run seed.
      calib = generate_synthetic_trace(p, mix_seed(cal.seed, 0xCA11B000ULL + i));
    } else {
      calib = load_trace_csv_file(*std::get<CsvTraceSource>(e.trace).calibration_path);
    }
    out.push_back(calibrate_static_threshold_detailed(calib, cal.target_forward_rate,
                                                      cal.accuracy_tolerance));
  }
  return out;
}

Fleet build_fleet(const ExperimentConfig& config, std::uint64_t seed,
                  const std::vector<CalibrationResult>& thresholds) {
  Fleet fleet;
  DeviceId next_id = 0;
  std::map<std::string, TraceSet> csv_cache;
  for (std::size_t i = 0; i < config.fleet.size(); ++i) {
    const auto& e = config.fleet[i];
    for (int k = 0; k < e.count; ++k) {
      const DeviceId id = next_id++;
      const std::uint64_t device_seed = mix_seed(seed, id);
      double offset = 0.0;
      if (config.stagger_start) {
        // top 53 bits -> uniform in [0,1)
        const double u = static_cast<double>(mix_seed(device_seed, 0x57A66E4ULL) >> 11) *
                         0x1.0p-53;
        offset = u * e.local_latency_ms;
      }
      fleet.devices.push_back(
          {id, e.tier, e.local_latency_ms, thresholds.at(i).threshold, offset});
      TraceSet trace;
      if (const auto* s = std::get_if<SyntheticTraceParams>(&e.trace)) {
        trace = generate_synthetic_trace(*s, device_seed);
      } else {
        const auto& c = std::get<CsvTraceSource>(e.trace);
        auto it = csv_cache.find(c.path);
        if (it == csv_cache.end()) {
          it = csv_cache.emplace(c.path, load_trace_csv_file(c.path)).first;
        }
        trace = subsample_trace(it->second, c.samples_per_device.value_or(it->second.size()),
                                device_seed);
      }
      trace.light_model_name = e.light_model;
      trace.heavy_model_name = config.server_model;
      fleet.traces.emplace(id, std::move(trace));
    }
  }
  return fleet;
}

SimulationConfig make_simulation_config(const ExperimentConfig& config,
                                        const Fleet& fleet, SchedulerKind kind,
                                        double slo_ms) {
  SimulationConfig sim;
  sim.devices = fleet.devices;
  sim.table = config.table;
  sim.scheduler_kind = kind;
  sim.scheduler = config.scheduler.params;
  sim.scheduler.slo_ms = slo_ms;
  sim.network = config.network;
  sim.include_local_in_latency = config.include_local_in_latency;
  sim.horizon_ms = config.horizon_ms;
  return sim;
}

namespace {

RunResult run_with_fleet(const ExperimentConfig& config, const Fleet& fleet,
                         SchedulerKind kind, std::uint64_t seed, double slo_ms,
                         std::ostream* event_log, bool keep_lifetimes) {
  const auto sim_cfg = make_simulation_config(config, fleet, kind, slo_ms);
  RunResult out;
  out.simulation = run_simulation(sim_cfg, fleet.traces, event_log);
  ReportOptions opts;
  opts.scheduler = std::string(to_string(kind));
  opts.seed = seed;
  opts.slos_ms = config.slos_ms;
  opts.keep_lifetimes = keep_lifetimes;
  out.report = build_report(out.simulation, sim_cfg.devices, config.table, slo_ms, opts);
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, SchedulerKind kind,
                         std::uint64_t seed, double slo_ms, std::ostream* event_log,
                         bool keep_lifetimes) {
  validate(config);
  const auto fleet = build_fleet(config, seed, resolve_thresholds(config));
  return run_with_fleet(config, fleet, kind, seed, slo_ms, event_log, keep_lifetimes);
}

SimulateOutput simulate(const ExperimentConfig& config,
                        const std::vector<SchedulerKind>& kinds, bool keep_lifetimes) {
  validate(config);
  const auto thresholds = resolve_thresholds(config);
  std::map<std::uint64_t, Fleet> fleets;
  for (auto seed : config.seeds) fleets.emplace(seed, build_fleet(config, seed, thresholds));

  SimulateOutput out;
  for (auto kind : kinds) {
    for (double slo : config.slos_ms) {
      std::vector<MetricsReport> group;
      for (auto seed : config.seeds) {
        group.push_back(run_with_fleet(config, fleets.at(seed), kind, seed, slo, nullptr,
                                       keep_lifetimes)
                            .report);
      }
      out.means.push_back(mean_report(group));
      for (auto& r : group) out.per_seed.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<std::size_t> DeviceRange::points() const {
  std::vector<std::size_t> out;
  for (std::size_t n = first; n <= last; n += step) out.push_back(n);
  return out;
}

DeviceRange parse_device_range(const std::string& text) {
  auto fail = [&]() -> DeviceRange {
    invalid("devices", "expected A..B:STEP, got '" + text + "'");
  };
  const auto dots = text.find("..");
  if (dots == std::string::npos) return fail();
  const auto colon = text.find(':', dots);
  auto parse = [&](const std::string& s) -> std::size_t {
    if (s.empty() || !std::all_of(s.begin(), s.end(), ::isdigit)) fail();
    return static_cast<std::size_t>(std::stoull(s));
  };
  DeviceRange r;
  r.first = parse(text.substr(0, dots));
  r.last = parse(text.substr(dots + 2, colon == std::string::npos ? std::string::npos
                                                                   : colon - dots - 2));
  r.step = colon == std::string::npos ? 1 : parse(text.substr(colon + 1));
  if (r.first == 0) invalid("devices", "device counts must be positive");
  if (r.step == 0) invalid("devices", "step must be positive");
  if (r.last < r.first) invalid("devices", "empty device range");
  return r;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const DeviceRange& range,
                            const std::vector<SchedulerKind>& kinds,
                            const std::function<void(const MetricsReport&)>& progress) {
  validate(config);
  const auto points = range.points();
  if (points.empty()) invalid("devices", "empty device range");
  // Validate every point before running any of them.
  for (auto n : points) with_device_count(config, n);

  const auto thresholds = resolve_thresholds(config);
  std::vector<SweepRow> rows;
  for (auto n : points) {
    const auto cfg = with_device_count(config, n);
    std::map<std::uint64_t, Fleet> fleets;
    for (auto seed : cfg.seeds) fleets.emplace(seed, build_fleet(cfg, seed, thresholds));
    for (auto kind : kinds) {
      for (double slo : cfg.slos_ms) {
        std::vector<MetricsReport> group;
        for (auto seed : cfg.seeds) {
          group.push_back(
              run_with_fleet(cfg, fleets.at(seed), kind, seed, slo, nullptr, false).report);
          rows.push_back(sweep_row(group.back()));
        }
        const auto mean = mean_report(group);
        rows.push_back(sweep_row(mean));
        if (progress) progress(mean);
      }
    }
  }
  return rows;
}

}  // namespace cascadesim
