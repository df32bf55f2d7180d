#pragma once

// Single-cascade semantics: the BvSB confidence score, the reconfigurable
// forwarding rule, per-sample outcome and offline accuracy, and the static
// baseline threshold calibration.

#include <algorithm>
#include <span>

#include "cascadesim/trace.hpp"

namespace cascadesim {

// Forwarding threshold, always within [0,1].
class Threshold {
 public:
  constexpr Threshold() = default;
  constexpr explicit Threshold(double v) : value_(std::clamp(v, 0.0, 1.0)) {}

  constexpr double value() const { return value_; }
  constexpr bool operator==(const Threshold&) const = default;

 private:
  double value_ = 0.0;
};

enum class Decision { kKeepLocal, kForward };
enum class Location { kLocal, kServer };

struct CascadeOutcome {
  Location location = Location::kLocal;
  bool correct = false;
  bool operator==(const CascadeOutcome&) const = default;
};

// Largest minus second-largest probability.
double bvsb(std::span<const double> softmax);

// keep_local iff score >= threshold.
constexpr Decision decide(double score, Threshold threshold) {
  return score >= threshold.value() ? Decision::kKeepLocal : Decision::kForward;
}

CascadeOutcome cascade_outcome(const TraceRecord& record, Threshold threshold);

double cascade_accuracy(const TraceSet& trace, Threshold threshold);

struct CalibrationResult {
  Threshold threshold;
  double forward_rate = 0.0;
  double accuracy = 0.0;
  double max_accuracy = 0.0;
  bool fallback_used = false;
};

inline constexpr int kCalibrationGridPoints = 201;

// Grid point i of the calibration scan, i in [0, 200].
constexpr double calibration_grid_value(int i) { return i / 200.0; }

CalibrationResult calibrate_static_threshold_detailed(
    const TraceSet& calibration_trace, double target_forward_rate = 0.30,
    double accuracy_tolerance = 0.01);

Threshold calibrate_static_threshold(const TraceSet& calibration_trace,
                                     double target_forward_rate = 0.30,
                                     double accuracy_tolerance = 0.01);

}  // namespace cascadesim
