#pragma once

// Per-sample trace data: the light model's BvSB score and the correctness of
// both models for that sample. Stands in for running the actual networks.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace cascadesim {

struct TraceRecord {
  std::uint64_t sample_index = 0;
  double bvsb = 0.0;
  bool light_correct = false;
  bool heavy_correct = false;

  bool operator==(const TraceRecord&) const = default;
};

enum class TraceSource { kSynthetic, kFile };

struct TraceSet {
  std::vector<TraceRecord> records;
  TraceSource source = TraceSource::kSynthetic;
  std::string light_model_name;
  std::string heavy_model_name;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool operator==(const TraceSet&) const = default;
};

struct BetaShape {
  double a = 1.0;
  double b = 1.0;
  bool operator==(const BetaShape&) const = default;
};

struct SyntheticTraceParams {
  double light_accuracy = 0.75;
  double heavy_accuracy_given_light_correct = 0.9;
  double heavy_accuracy_given_light_wrong = 0.43;
  BetaShape bvsb_shape_correct{5.0, 1.0};
  BetaShape bvsb_shape_wrong{1.2, 3.0};
  std::int64_t count = 5000;

  // la*hc + (1-la)*hw
  double marginal_heavy_accuracy() const;
  void validate() const;
  bool operator==(const SyntheticTraceParams&) const = default;
};

// Solves la*hc + (1-la)*hw = heavy_accuracy for hw. Throws invalid-params when
// the result falls outside [0,1].
double heavy_accuracy_given_light_wrong_for(double light_accuracy,
                                            double heavy_accuracy,
                                            double heavy_given_light_correct);

TraceSet generate_synthetic_trace(const SyntheticTraceParams& params,
                                  std::uint64_t seed);

// CSV: header `sample_index,bvsb,light_correct,heavy_correct`, booleans 0/1.
TraceSet load_trace_csv(std::istream& in);
TraceSet load_trace_csv_file(const std::string& path);
void write_trace_csv(const TraceSet& trace, std::ostream& out);

// Fraction of records with bvsb < threshold; 0 for an empty trace.
double trace_forward_rate(const TraceSet& trace, double threshold);

double light_accuracy(const TraceSet& trace);
double heavy_accuracy(const TraceSet& trace);

// Draws `count` records without replacement and renumbers them from 0.
TraceSet subsample_trace(const TraceSet& trace, std::size_t count,
                         std::uint64_t seed);

// Stateless 64-bit mixer used to derive independent per-device seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace cascadesim
