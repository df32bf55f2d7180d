#include "cascadesim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

#include "cascadesim/error.hpp"

namespace cascadesim {

namespace {

constexpr std::string_view kCsvHeader =
    "sample_index,bvsb,light_correct,heavy_correct";

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

double draw_beta(std::mt19937_64& rng, const BetaShape& shape) {
  std::gamma_distribution<double> ga(shape.a, 1.0);
  std::gamma_distribution<double> gb(shape.b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  if (x + y <= 0.0) return 0.0;
  return std::clamp(x / (x + y), 0.0, 1.0);
}

Error row_error(ErrorKind kind, std::size_t line, const std::string& what) {
  return Error(kind, "row " + std::to_string(line) + ": " + what,
               "row " + std::to_string(line));
}

bool parse_bool(std::string_view s, bool& out) {
  if (s == "0") { out = false; return true; }
  if (s == "1") { out = true; return true; }
  return false;
}

}  // namespace

double SyntheticTraceParams::marginal_heavy_accuracy() const {
  return light_accuracy * heavy_accuracy_given_light_correct +
         (1.0 - light_accuracy) * heavy_accuracy_given_light_wrong;
}

void SyntheticTraceParams::validate() const {
  if (count <= 0) {
    throw Error(ErrorKind::kInvalidParams, "count must be positive", "count");
  }
  if (!is_probability(light_accuracy)) {
    throw Error(ErrorKind::kInvalidParams, "light_accuracy outside [0,1]",
                "light_accuracy");
  }
  if (!is_probability(heavy_accuracy_given_light_correct)) {
    throw Error(ErrorKind::kInvalidParams,
                "heavy_accuracy_given_light_correct outside [0,1]",
                "heavy_accuracy_given_light_correct");
  }
  if (!is_probability(heavy_accuracy_given_light_wrong)) {
    throw Error(ErrorKind::kInvalidParams,
                "heavy_accuracy_given_light_wrong outside [0,1]",
                "heavy_accuracy_given_light_wrong");
  }
  for (const auto& [shape, name] :
       {std::pair{bvsb_shape_correct, "bvsb_shape_correct"},
        std::pair{bvsb_shape_wrong, "bvsb_shape_wrong"}}) {
    if (!(shape.a > 0.0) || !(shape.b > 0.0) || !std::isfinite(shape.a) ||
        !std::isfinite(shape.b)) {
      throw Error(ErrorKind::kInvalidParams,
                  std::string(name) + " must be strictly positive", name);
    }
  }
  const double marginal = marginal_heavy_accuracy();
  if (!is_probability(marginal)) {
    throw Error(ErrorKind::kInvalidParams,
                "marginal heavy accuracy outside [0,1]");
  }
}

double heavy_accuracy_given_light_wrong_for(double light_accuracy,
                                            double heavy_accuracy,
                                            double heavy_given_light_correct) {
  if (!is_probability(light_accuracy) || light_accuracy >= 1.0) {
    throw Error(ErrorKind::kInvalidParams,
                "light_accuracy must lie in [0,1) to derive the conditional");
  }
  const double hw = (heavy_accuracy - light_accuracy * heavy_given_light_correct) /
                    (1.0 - light_accuracy);
  if (!is_probability(hw)) {
    throw Error(ErrorKind::kInvalidParams,
                "derived heavy_accuracy_given_light_wrong outside [0,1]");
  }
  return hw;
}

TraceSet generate_synthetic_trace(const SyntheticTraceParams& params,
                                  std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TraceSet trace;
  trace.source = TraceSource::kSynthetic;
  trace.records.reserve(static_cast<std::size_t>(params.count));
  for (std::int64_t i = 0; i < params.count; ++i) {
    TraceRecord r;
    r.sample_index = static_cast<std::uint64_t>(i);
    // Strict `<` keeps p=0 and p=1 degenerate.
    r.light_correct = unit(rng) < params.light_accuracy;
    const double hp = r.light_correct ? params.heavy_accuracy_given_light_correct
                                      : params.heavy_accuracy_given_light_wrong;
    r.heavy_correct = unit(rng) < hp;
    r.bvsb = draw_beta(rng, r.light_correct ? params.bvsb_shape_correct
                                            : params.bvsb_shape_wrong);
    trace.records.push_back(r);
  }
  return trace;
}

TraceSet load_trace_csv(std::istream& in) {
  TraceSet trace;
  trace.source = TraceSource::kFile;

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line != kCsvHeader) {
        throw row_error(ErrorKind::kParseError, line_no,
                        "expected header '" + std::string(kCsvHeader) + "'");
      }
      have_header = true;
      continue;
    }
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4) {
      throw row_error(ErrorKind::kParseError, line_no,
                      "expected 4 fields, got " + std::to_string(fields.size()));
    }

    TraceRecord r;
    {
      const auto f = fields[0];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), r.sample_index);
      if (ec != std::errc() || p != f.data() + f.size() || f.empty()) {
        throw row_error(ErrorKind::kParseError, line_no, "bad sample_index");
      }
    }
    {
      const auto f = fields[1];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), r.bvsb,
                                     std::chars_format::fixed);
      if (ec != std::errc() || p != f.data() + f.size() || f.empty()) {
        throw row_error(ErrorKind::kParseError, line_no, "bad bvsb");
      }
      if (!(r.bvsb >= 0.0 && r.bvsb <= 1.0)) {
        throw row_error(ErrorKind::kRangeError, line_no,
                        "bvsb " + std::string(f) + " outside [0,1]");
      }
    }
    if (!parse_bool(fields[2], r.light_correct)) {
      throw row_error(ErrorKind::kParseError, line_no, "light_correct must be 0 or 1");
    }
    if (!parse_bool(fields[3], r.heavy_correct)) {
      throw row_error(ErrorKind::kParseError, line_no, "heavy_correct must be 0 or 1");
    }
    if (r.sample_index != trace.records.size()) {
      throw row_error(ErrorKind::kParseError, line_no,
                      "sample_index must be consecutive from 0");
    }
    trace.records.push_back(r);
  }
  if (!have_header) {
    throw Error(ErrorKind::kParseError, "missing header");
  }
  if (trace.records.empty()) {
    throw Error(ErrorKind::kEmptyTrace, "trace has no data rows");
  }
  return trace;
}

TraceSet load_trace_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open trace file " + path, path);
  return load_trace_csv(in);
}

void write_trace_csv(const TraceSet& trace, std::ostream& out) {
  out << kCsvHeader << '\n';
  char buf[64];
  for (const auto& r : trace.records) {
    auto res = std::to_chars(buf, buf + sizeof(buf), r.bvsb, std::chars_format::fixed);
    out << r.sample_index << ',' << std::string_view(buf, res.ptr - buf) << ','
        << (r.light_correct ? '1' : '0') << ',' << (r.heavy_correct ? '1' : '0')
        << '\n';
  }
}

double trace_forward_rate(const TraceSet& trace, double threshold) {
  if (trace.empty()) return 0.0;
  const auto n = std::count_if(trace.records.begin(), trace.records.end(),
                               [&](const TraceRecord& r) { return r.bvsb < threshold; });
  return static_cast<double>(n) / static_cast<double>(trace.size());
}

double light_accuracy(const TraceSet& trace) {
  if (trace.empty()) return 0.0;
  const auto n = std::count_if(trace.records.begin(), trace.records.end(),
                               [](const TraceRecord& r) { return r.light_correct; });
  return static_cast<double>(n) / static_cast<double>(trace.size());
}

double heavy_accuracy(const TraceSet& trace) {
  if (trace.empty()) return 0.0;
  const auto n = std::count_if(trace.records.begin(), trace.records.end(),
                               [](const TraceRecord& r) { return r.heavy_correct; });
  return static_cast<double>(n) / static_cast<double>(trace.size());
}

TraceSet subsample_trace(const TraceSet& trace, std::size_t count,
                         std::uint64_t seed) {
  std::vector<std::size_t> idx(trace.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  const std::size_t take = std::min(count, idx.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  TraceSet out;
  out.source = trace.source;
  out.light_model_name = trace.light_model_name;
  out.heavy_model_name = trace.heavy_model_name;
  out.records.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    TraceRecord r = trace.records[idx[i]];
    r.sample_index = i;
    out.records.push_back(r);
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace cascadesim
