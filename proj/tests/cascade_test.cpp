#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cascadesim/cascade.hpp"
#include "cascadesim/error.hpp"
#include "test_support.hpp"

namespace cs = cascadesim;
using cs::testing::make_trace;

namespace {

// Brute-force per-record enumeration.
double enumerate_accuracy(const cs::TraceSet& t, double threshold) {
  long correct = 0;
  for (const auto& r : t.records) {
    bool local = !(r.bvsb < threshold);
    if (local && r.light_correct) ++correct;
    if (!local && r.heavy_correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(t.size());
}

// Full grid scan: closest forward rate (lowest threshold on ties), then the
// accuracy fallback.
struct GridPick {
  double threshold;
  double forward_rate;
  bool fallback;
};

GridPick grid_oracle(const cs::TraceSet& t, double target, double tol) {
  std::vector<double> thr, fr, acc;
  for (int i = 0; i <= 200; ++i) {
    double c = i / 200.0;
    long fwd = 0;
    for (const auto& r : t.records) fwd += r.bvsb < c ? 1 : 0;
    thr.push_back(c);
    fr.push_back(static_cast<double>(fwd) / t.size());
    acc.push_back(enumerate_accuracy(t, c));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < thr.size(); ++i)
    if (std::abs(fr[i] - target) < std::abs(fr[best] - target)) best = i;
  double max_acc = *std::max_element(acc.begin(), acc.end());
  // Gaps exactly at the tolerance are not "more than" it.
  if (max_acc - acc[best] > tol + 1e-12) {
    for (std::size_t i = 0; i < thr.size(); ++i)
      if (max_acc - acc[i] <= tol + 1e-12) return {thr[i], fr[i], true};
  }
  return {thr[best], fr[best], false};
}

cs::TraceSet random_trace(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 20);
  cs::TraceSet t;
  for (std::size_t i = 0; i < n; ++i) {
    // Mix continuous scores with exact grid values to exercise the boundary.
    double s = (i % 3 == 0) ? coarse(rng) / 20.0 : u(rng);
    t.records.push_back({i, s, u(rng) < 0.7, u(rng) < 0.8});
  }
  return t;
}

}  // namespace

TEST(Bvsb, Examples) {
  std::vector<double> a{0.7, 0.2, 0.1};
  EXPECT_NEAR(cs::bvsb(a), 0.5, 1e-12);
  std::vector<double> one_hot{1, 0, 0, 0};
  EXPECT_DOUBLE_EQ(cs::bvsb(one_hot), 1.0);
  std::vector<double> uni(4, 0.25);
  EXPECT_DOUBLE_EQ(cs::bvsb(uni), 0.0);
}

TEST(Bvsb, InvalidDistributions) {
  for (std::vector<double> bad :
       {std::vector<double>{1.0}, std::vector<double>{0.6, 0.6},
        std::vector<double>{1.2, -0.2}, std::vector<double>{NAN, 1.0}}) {
    try {
      cs::bvsb(bad);
      FAIL();
    } catch (const cs::Error& e) {
      EXPECT_EQ(e.kind(), cs::ErrorKind::kInvalidDistribution);
    }
  }
}

TEST(Decide, BoundaryKeepsLocal) {
  EXPECT_EQ(cs::decide(0.5, cs::Threshold(0.5)), cs::Decision::kKeepLocal);
  EXPECT_EQ(cs::decide(0.49, cs::Threshold(0.5)), cs::Decision::kForward);
  for (double s : {0.0, 0.3, 1.0})
    EXPECT_EQ(cs::decide(s, cs::Threshold(0.0)), cs::Decision::kKeepLocal);
}

TEST(Decide, MonotoneInThreshold) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    double s = u(rng), a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    if (cs::decide(s, cs::Threshold(a)) == cs::Decision::kForward)
      EXPECT_EQ(cs::decide(s, cs::Threshold(b)), cs::Decision::kForward);
  }
}

TEST(Threshold, Clamps) {
  EXPECT_DOUBLE_EQ(cs::Threshold(-0.1).value(), 0.0);
  EXPECT_DOUBLE_EQ(cs::Threshold(1.5).value(), 1.0);
}

TEST(CascadeOutcome, Examples) {
  EXPECT_EQ(cs::cascade_outcome({0, 0.9, true, false}, cs::Threshold(0.5)),
            (cs::CascadeOutcome{cs::Location::kLocal, true}));
  EXPECT_EQ(cs::cascade_outcome({0, 0.1, true, false}, cs::Threshold(0.5)),
            (cs::CascadeOutcome{cs::Location::kServer, false}));
  EXPECT_EQ(cs::cascade_outcome({0, 1.0, false, true}, cs::Threshold(1.0)),
            (cs::CascadeOutcome{cs::Location::kLocal, false}));
}

TEST(CascadeAccuracy, FourRecordExample) {
  auto t = make_trace({{0, 0.9, true, true},
                       {0, 0.4, false, true},
                       {0, 0.4, false, false},
                       {0, 0.8, true, false}});
  EXPECT_DOUBLE_EQ(cs::cascade_accuracy(t, cs::Threshold(0.5)), 0.75);
  EXPECT_DOUBLE_EQ(cs::cascade_accuracy(t, cs::Threshold(0.5)), enumerate_accuracy(t, 0.5));
}

TEST(CascadeAccuracy, ZeroThresholdIsLightAccuracy) {
  std::mt19937_64 rng(2);
  auto t = random_trace(rng, 2000);
  EXPECT_DOUBLE_EQ(cs::cascade_accuracy(t, cs::Threshold(0.0)), cs::light_accuracy(t));
  long below_one = 0;
  for (const auto& r : t.records) below_one += r.bvsb < 1.0 ? 1 : 0;
  EXPECT_DOUBLE_EQ(cs::trace_forward_rate(t, 1.0), static_cast<double>(below_one) / t.size());
}

TEST(CascadeAccuracy, OnlyCertainLocalBeatsHeavy) {
  std::mt19937_64 rng(3);
  auto t = random_trace(rng, 1000);
  t.records[0].bvsb = 1.0;
  for (auto& r : t.records) {
    r.heavy_correct = true;
    if (r.bvsb == 1.0) r.light_correct = true;
  }
  EXPECT_GE(cs::cascade_accuracy(t, cs::Threshold(1.0)), cs::heavy_accuracy(t));
  EXPECT_DOUBLE_EQ(cs::cascade_accuracy(t, cs::Threshold(1.0)), enumerate_accuracy(t, 1.0));
}

TEST(CascadeAccuracy, MatchesEnumerationOnRandomTraces) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    auto t = random_trace(rng, 10000);
    for (int i = 0; i <= 20; ++i) {
      double c = i / 20.0;
      ASSERT_EQ(cs::cascade_accuracy(t, cs::Threshold(c)), enumerate_accuracy(t, c));
    }
  }
}

TEST(CascadeAccuracy, EmptyTraceRejected) {
  cs::TraceSet t;
  try {
    cs::cascade_accuracy(t, cs::Threshold(0.5));
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::kEmptyTrace);
  }
}

TEST(Calibration, UniformGridAllHeavyCorrect) {
  std::vector<cs::TraceRecord> rows;
  for (int k = 0; k <= 10; ++k) rows.push_back({0, k / 10.0, true, true});
  auto t = make_trace(rows);
  auto r = cs::calibrate_static_threshold_detailed(t);
  auto o = grid_oracle(t, 0.30, 0.01);
  EXPECT_FALSE(r.fallback_used);
  EXPECT_DOUBLE_EQ(r.threshold.value(), o.threshold);
  EXPECT_DOUBLE_EQ(r.forward_rate, 3.0 / 11.0);
  EXPECT_DOUBLE_EQ(cs::trace_forward_rate(t, r.threshold.value()), 3.0 / 11.0);
}

TEST(Calibration, AccuracyFallback) {
  // Light model wrong below 0.5: keeping 0.3 and 0.4 local costs 2/11 accuracy.
  std::vector<cs::TraceRecord> rows;
  for (int k = 0; k <= 10; ++k) rows.push_back({0, k / 10.0, k >= 5, true});
  auto t = make_trace(rows);
  auto r = cs::calibrate_static_threshold_detailed(t);
  auto o = grid_oracle(t, 0.30, 0.01);
  EXPECT_TRUE(o.fallback);
  EXPECT_TRUE(r.fallback_used);
  EXPECT_DOUBLE_EQ(r.threshold.value(), o.threshold);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
}

TEST(Calibration, AllCertainNeverForwards) {
  std::vector<cs::TraceRecord> rows(50, {0, 1.0, true, false});
  for (int k = 0; k < 10; ++k) rows[k].light_correct = false;
  auto t = make_trace(rows);
  auto r = cs::calibrate_static_threshold_detailed(t);
  auto o = grid_oracle(t, 0.30, 0.01);
  EXPECT_DOUBLE_EQ(r.forward_rate, 0.0);
  EXPECT_DOUBLE_EQ(r.threshold.value(), o.threshold);
  EXPECT_EQ(r.fallback_used, o.fallback);
  EXPECT_FALSE(r.fallback_used);
}

TEST(Calibration, MatchesGridOracleOnSyntheticTraces) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cs::SyntheticTraceParams p;
    p.count = 4000;
    auto t = cs::generate_synthetic_trace(p, seed);
    for (double target : {0.1, 0.3, 0.5}) {
      auto r = cs::calibrate_static_threshold_detailed(t, target);
      auto o = grid_oracle(t, target, 0.01);
      EXPECT_DOUBLE_EQ(r.threshold.value(), o.threshold);
      EXPECT_EQ(r.fallback_used, o.fallback);
    }
  }
}

TEST(Calibration, TargetMustBeOpenInterval) {
  auto t = make_trace({{0, 0.5, true, true}});
  for (double bad : {0.0, 1.0, -0.5}) {
    try {
      cs::calibrate_static_threshold(t, bad);
      FAIL();
    } catch (const cs::Error& e) {
      EXPECT_EQ(e.kind(), cs::ErrorKind::kInvalidTarget);
    }
  }
  try {
    cs::calibrate_static_threshold(cs::TraceSet{});
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::kEmptyTrace);
  }
}
