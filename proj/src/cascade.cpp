#include "cascadesim/cascade.hpp"

#include <cmath>
#include <vector>

#include "cascadesim/error.hpp"

namespace cascadesim {

double bvsb(std::span<const double> softmax) {
  if (softmax.size() < 2) {
    throw Error(ErrorKind::kInvalidDistribution,
                "softmax vector needs at least two entries");
  }
  double sum = 0.0;
  double first = -1.0;
  double second = -1.0;
  for (double p : softmax) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorKind::kInvalidDistribution,
                  "softmax entries must be finite and non-negative");
    }
    sum += p;
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorKind::kInvalidDistribution, "softmax entries must sum to 1");
  }
  return std::clamp(first - second, 0.0, 1.0);
}

CascadeOutcome cascade_outcome(const TraceRecord& record, Threshold threshold) {
  if (decide(record.bvsb, threshold) == Decision::kKeepLocal) {
    return {Location::kLocal, record.light_correct};
  }
  return {Location::kServer, record.heavy_correct};
}

double cascade_accuracy(const TraceSet& trace, Threshold threshold) {
  if (trace.empty()) {
    throw Error(ErrorKind::kEmptyTrace, "cascade accuracy of an empty trace");
  }
  std::size_t correct = 0;
  for (const auto& r : trace.records) {
    if (cascade_outcome(r, threshold).correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(trace.size());
}

CalibrationResult calibrate_static_threshold_detailed(
    const TraceSet& calibration_trace, double target_forward_rate,
    double accuracy_tolerance) {
  if (calibration_trace.empty()) {
    throw Error(ErrorKind::kEmptyTrace, "calibration trace is empty");
  }
  if (!(target_forward_rate > 0.0 && target_forward_rate < 1.0)) {
    throw Error(ErrorKind::kInvalidTarget,
                "target forward rate must lie in (0,1)");
  }
  if (!(accuracy_tolerance >= 0.0)) {
    throw Error(ErrorKind::kInvalidTarget,
                "accuracy tolerance must be non-negative");
  }

  std::vector<double> rate(kCalibrationGridPoints);
  std::vector<double> acc(kCalibrationGridPoints);
  double max_acc = 0.0;
  int closest = 0;
  for (int i = 0; i < kCalibrationGridPoints; ++i) {
    const Threshold t(calibration_grid_value(i));
    rate[i] = trace_forward_rate(calibration_trace, t.value());
    acc[i] = cascade_accuracy(calibration_trace, t);
    max_acc = std::max(max_acc, acc[i]);
    // strict < keeps the lower threshold on ties
    if (std::abs(rate[i] - target_forward_rate) <
        std::abs(rate[closest] - target_forward_rate)) {
      closest = i;
    }
  }

  CalibrationResult result;
  result.max_accuracy = max_acc;
  int chosen = closest;
  // Accuracies are multiples of 1/n, so gaps equal to the tolerance are
  // common; the slack keeps "more than tolerance below" exact.
  constexpr double kSlack = 1e-12;
  if (max_acc - acc[closest] > accuracy_tolerance + kSlack) {
    for (int i = 0; i < kCalibrationGridPoints; ++i) {
      if (max_acc - acc[i] <= accuracy_tolerance + kSlack) {
        chosen = i;
        break;
      }
    }
    result.fallback_used = true;
  }
  result.threshold = Threshold(calibration_grid_value(chosen));
  result.forward_rate = rate[chosen];
  result.accuracy = acc[chosen];
  return result;
}

Threshold calibrate_static_threshold(const TraceSet& calibration_trace,
                                     double target_forward_rate,
                                     double accuracy_tolerance) {
  return calibrate_static_threshold_detailed(calibration_trace,
                                             target_forward_rate,
                                             accuracy_tolerance)
      .threshold;
}

}  // namespace cascadesim
