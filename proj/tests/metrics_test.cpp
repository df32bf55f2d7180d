#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "cascadesim/error.hpp"
#include "cascadesim/metrics.hpp"

namespace cs = cascadesim;

namespace {

cs::SampleLifetime finished(double latency, bool correct = true,
                            cs::Location where = cs::Location::kLocal,
                            cs::DeviceId device = 0) {
  cs::SampleLifetime lt;
  lt.device = device;
  lt.start_ms = 0.0;
  lt.completion_ms = latency;
  lt.location = where;
  lt.correct = correct;
  lt.state = cs::SampleState::kFinalized;
  return lt;
}

}  // namespace

TEST(Satisfaction, Examples) {
  std::vector<cs::SampleLifetime> local(20, finished(43.0));
  EXPECT_DOUBLE_EQ(cs::slo_satisfaction(local, 100), 1.0);
  std::vector<cs::SampleLifetime> three{finished(50), finished(150), finished(250)};
  EXPECT_DOUBLE_EQ(cs::slo_satisfaction(three, 200), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(cs::slo_satisfaction(three, 10), 0.0);
}

TEST(Satisfaction, InFlightCountsAsViolation) {
  std::vector<cs::SampleLifetime> v{finished(50), finished(60)};
  v[1].state = cs::SampleState::kInFlight;
  cs::SampleLifetime idle;  // never started
  v.push_back(idle);
  EXPECT_DOUBLE_EQ(cs::slo_satisfaction(v, 100), 0.5);
  EXPECT_DOUBLE_EQ(cs::accuracy(v), 1.0);
}

TEST(Satisfaction, EmptyInput) {
  std::vector<cs::SampleLifetime> none;
  EXPECT_THROW(cs::slo_satisfaction(none, 100), cs::Error);
}

TEST(Satisfaction, MonotoneInSlo) {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> lat(1.0 / 120.0);
  std::vector<cs::SampleLifetime> v;
  for (int i = 0; i < 2000; ++i) v.push_back(finished(lat(rng)));
  double prev = 0.0;
  for (int slo = 0; slo <= 1000; slo += 5) {
    double s = cs::slo_satisfaction(v, slo);
    EXPECT_GE(s, prev);
    prev = s;
  }
}

TEST(Satisfaction, FloorIsLocalShare) {
  // Local latencies within the SLO, forwarded ones arbitrary.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<cs::SampleLifetime> v;
  long fwd = 0;
  for (int i = 0; i < 5000; ++i) {
    if (u(rng) < 0.3) {
      v.push_back(finished(50 + 500 * u(rng), true, cs::Location::kServer));
      ++fwd;
    } else {
      v.push_back(finished(43));
    }
  }
  EXPECT_GE(cs::slo_satisfaction(v, 100), 1.0 - fwd / 5000.0);
}

TEST(Throughput, Examples) {
  std::vector<cs::SampleLifetime> v(100, finished(43));
  EXPECT_NEAR(cs::throughput(v, 4300), 23.26, 0.005);
  EXPECT_THROW(cs::throughput(v, 0), cs::Error);
}

TEST(Accuracy, AllCorrect) {
  std::vector<cs::SampleLifetime> v(10, finished(10, true));
  EXPECT_DOUBLE_EQ(cs::accuracy(v), 1.0);
  v[0].correct = false;
  EXPECT_DOUBLE_EQ(cs::accuracy(v), 0.9);
}

TEST(TierAggregation, SingleTierEqualsTotals) {
  std::vector<cs::SampleLifetime> v;
  for (int i = 0; i < 30; ++i)
    v.push_back(finished(40 + 5 * i, i % 4 != 0,
                         i % 3 ? cs::Location::kLocal : cs::Location::kServer, i % 2));
  std::map<cs::DeviceId, cs::Tier> tiers{{0, cs::Tier::kMid}, {1, cs::Tier::kMid}};
  std::vector<double> slos{100, 200};
  auto agg = cs::aggregate_by_tier(v, tiers, 1000, slos);
  ASSERT_EQ(agg.size(), 1u);
  const auto& t = agg.at(cs::Tier::kMid);
  EXPECT_EQ(t.devices, 2u);
  EXPECT_EQ(t.samples, 30u);
  EXPECT_DOUBLE_EQ(t.accuracy, cs::accuracy(v));
  EXPECT_DOUBLE_EQ(t.throughput, cs::throughput(v, 1000));
  EXPECT_DOUBLE_EQ(t.slo_satisfaction.at(100), cs::slo_satisfaction(v, 100));
  EXPECT_DOUBLE_EQ(t.forward_rate, 10.0 / 30.0);
}

TEST(TierAggregation, PartitionsByTier) {
  std::vector<cs::SampleLifetime> v;
  for (int i = 0; i < 30; ++i) v.push_back(finished(10, i < 12, cs::Location::kLocal, i / 10));
  std::map<cs::DeviceId, cs::Tier> tiers{
      {0, cs::Tier::kLow}, {1, cs::Tier::kMid}, {2, cs::Tier::kHigh}};
  std::vector<double> slos{100};
  auto agg = cs::aggregate_by_tier(v, tiers, 1000, slos);
  EXPECT_DOUBLE_EQ(agg.at(cs::Tier::kLow).accuracy, 1.0);
  EXPECT_DOUBLE_EQ(agg.at(cs::Tier::kMid).accuracy, 0.2);
  EXPECT_DOUBLE_EQ(agg.at(cs::Tier::kHigh).accuracy, 0.0);
  std::size_t total = 0;
  for (const auto& [tier, r] : agg) total += r.samples;
  EXPECT_EQ(total, v.size());
}

TEST(SweepCsv, HeaderAndRows) {
  cs::MetricsReport r;
  r.devices = 10;
  r.scheduler = "static";
  r.slo_ms = 100;
  r.slo_satisfaction[100] = 0.75;
  r.total_throughput = 232.5;
  r.cascade_accuracy = 0.84;
  r.forward_rate = 0.3;
  std::vector<cs::SweepRow> rows{cs::sweep_row(r)};
  std::ostringstream out;
  cs::write_sweep_csv(rows, out);
  EXPECT_EQ(out.str(),
            "devices,seed,scheduler,slo_ms,satisfaction,throughput,accuracy,forward_rate\n"
            "10,mean,static,100,0.75,232.5,0.84,0.3\n");
}

TEST(MeanReport, AveragesFields) {
  cs::MetricsReport a, b;
  a.seed = 1;
  a.seeds = {1};
  b.seed = 2;
  b.seeds = {2};
  a.total_throughput = 100;
  b.total_throughput = 200;
  a.slo_satisfaction[100] = 0.5;
  b.slo_satisfaction[100] = 1.0;
  std::vector<cs::MetricsReport> v{a, b};
  auto m = cs::mean_report(v);
  EXPECT_FALSE(m.seed.has_value());
  EXPECT_EQ(m.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_DOUBLE_EQ(m.total_throughput, 150);
  EXPECT_DOUBLE_EQ(m.slo_satisfaction.at(100), 0.75);
  EXPECT_EQ(cs::to_json(m)["seed"], "mean");
}
