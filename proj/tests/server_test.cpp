#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cascadesim/error.hpp"
#include "cascadesim/server.hpp"

namespace cs = cascadesim;

namespace {

cs::BatchLatencyTable example_table() {
  cs::BatchLatencyTable t;
  t.entries = {{1, 10}, {2, 12}, {4, 16}, {8, 24}, {16, 40}};
  t.max_effective_batch = 16;
  return t;
}

// Unbounded knapsack over integer latencies, written independently of the
// library's solver.
long knapsack_oracle(const std::vector<std::pair<int, int>>& items, int budget) {
  std::vector<long> best(budget + 1, 0);
  for (int w = 1; w <= budget; ++w)
    for (auto [value, weight] : items)
      if (weight <= w) best[w] = std::max(best[w], best[w - weight] + value);
  return best[budget];
}

// Exhaustive recursion for small budgets.
long enumerate_oracle(const std::vector<std::pair<int, int>>& items, int budget) {
  std::function<long(std::size_t, int)> go = [&](std::size_t i, int left) -> long {
    if (i == items.size()) return 0;
    long best = 0;
    for (int n = 0; n * items[i].second <= left; ++n)
      best = std::max(best, n * static_cast<long>(items[i].first) +
                                go(i + 1, left - n * items[i].second));
    return best;
  };
  return go(0, budget);
}

cs::BatchLatencyTable random_monotone_table(std::mt19937_64& rng) {
  cs::BatchLatencyTable t;
  std::uniform_int_distribution<int> top(0, 6);
  int max_index = top(rng);
  std::uniform_int_distribution<int> l1(1, 250);
  int prev = l1(rng);
  t.entries[1] = prev;
  for (int i = 1; i <= max_index; ++i) {
    int b = cs::kBatchPool[i];
    // Doubling the batch must not more than double the latency.
    int hi = std::min(2 * prev, 500);
    if (hi < prev) break;
    std::uniform_int_distribution<int> next(prev, hi);
    prev = next(rng);
    t.entries[b] = prev;
  }
  t.max_effective_batch = t.entries.rbegin()->first;
  return t;
}

std::vector<std::pair<int, int>> items_of(const cs::BatchLatencyTable& t) {
  std::vector<std::pair<int, int>> items;
  for (int b : t.usable_sizes()) items.emplace_back(b, static_cast<int>(t.latency(b)));
  return items;
}

}  // namespace

TEST(BatchSize, Selection) {
  auto t64 = cs::make_linear_table(15, 4.5, 64);
  EXPECT_EQ(cs::select_batch_size(5, t64), 4);
  EXPECT_EQ(cs::select_batch_size(100, cs::make_linear_table(25, 4.5, 16)), 16);
  EXPECT_FALSE(cs::select_batch_size(0, t64).has_value());
}

TEST(BatchSize, NeverExceedsQueueOrMax) {
  auto t = cs::make_linear_table(10, 3, 16);
  for (std::size_t q = 1; q < 300; ++q) {
    int b = *cs::select_batch_size(q, t);
    EXPECT_LE(static_cast<std::size_t>(b), q);
    EXPECT_LE(b, 16);
  }
}

TEST(Capacity, GreedyExample) {
  auto r = cs::compute_capacity_greedy(example_table(), 100);
  EXPECT_EQ(r.capacity, 36);
  EXPECT_DOUBLE_EQ(r.time_used, 96);
  std::vector<std::pair<int, std::int64_t>> expect{{16, 2}, {4, 1}};
  EXPECT_EQ(r.schedule, expect);
  EXPECT_EQ(knapsack_oracle(items_of(example_table()), 100), 36);
  EXPECT_EQ(enumerate_oracle(items_of(example_table()), 100), 36);
}

TEST(Capacity, SingleEntry) {
  cs::BatchLatencyTable t;
  t.entries = {{1, 10}};
  EXPECT_EQ(cs::compute_capacity_greedy(t, 100).capacity, 10);
  EXPECT_EQ(cs::compute_capacity_exact(t, 95).capacity, 9);
}

TEST(Capacity, InfeasibleSloIsZero) {
  EXPECT_EQ(cs::compute_capacity_greedy(example_table(), 9).capacity, 0);
  EXPECT_EQ(cs::compute_capacity_exact(example_table(), 9).capacity, 0);
}

TEST(Capacity, ExactExampleAtLeastGreedy) {
  auto e = cs::compute_capacity_exact(example_table(), 100);
  EXPECT_GE(e.capacity, 36);
  EXPECT_EQ(e.capacity, knapsack_oracle(items_of(example_table()), 100));
}

TEST(Capacity, ZeroSloRejected) {
  for (auto fn : {+[] { cs::compute_capacity_exact(example_table(), 0); },
                  +[] { cs::compute_capacity_greedy(example_table(), 0); }}) {
    try {
      fn();
      FAIL();
    } catch (const cs::Error& e) {
      EXPECT_EQ(e.kind(), cs::ErrorKind::kInvalidParams);
    }
  }
}

TEST(Capacity, GridOverflow) {
  try {
    cs::compute_capacity_exact(example_table(), 1e6);
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::kGridOverflow);
  }
}

TEST(Capacity, GreedyEqualsExactOnRandomMonotoneTables) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> slo(50, 5000);
  int mismatches = 0;
  for (int k = 0; k < 300; ++k) {
    auto t = random_monotone_table(rng);
    ASSERT_NO_THROW(t.validate());
    int s = slo(rng);
    auto g = cs::compute_capacity_greedy(t, s);
    auto e = cs::compute_capacity_exact(t, s);
    long o = knapsack_oracle(items_of(t), s);
    EXPECT_EQ(e.capacity, o);
    if (g.capacity != e.capacity) ++mismatches;
    if (s <= 400) EXPECT_EQ(o, enumerate_oracle(items_of(t), s));
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(Capacity, MonotoneInSloAndLatency) {
  auto t = cs::make_linear_table(15, 4.5, 64);
  std::int64_t prev = 0;
  for (int s = 10; s <= 1000; s += 7) {
    auto c = cs::compute_capacity_greedy(t, s).capacity;
    EXPECT_GE(c, prev);
    prev = c;
  }
  auto faster = cs::make_linear_table(12, 4.0, 64);
  for (int s = 10; s <= 1000; s += 13)
    EXPECT_GE(cs::compute_capacity_greedy(faster, s).capacity,
              cs::compute_capacity_greedy(t, s).capacity);
}

TEST(Capacity, ScheduleFitsWindow) {
  auto t = cs::make_linear_table(15, 4.5, 64);
  for (double s : {100.0, 200.0, 333.0}) {
    auto r = cs::compute_capacity_greedy(t, s);
    double used = 0;
    std::int64_t samples = 0;
    for (auto [b, n] : r.schedule) {
      used += t.latency(b) * n;
      samples += b * n;
    }
    EXPECT_LE(used, s + 1e-9);
    EXPECT_EQ(samples, r.capacity);
    EXPECT_DOUBLE_EQ(cs::slo_throughput(t, s), r.capacity / s * 1000.0);
  }
}

TEST(LatencyTable, ValidationFailures) {
  std::vector<cs::BatchLatencyTable> bad(4);
  bad[0].entries = {{2, 10}};  // no batch 1
  bad[0].max_effective_batch = 2;
  bad[1].entries = {{1, 10}, {3, 12}};  // not in pool
  bad[1].max_effective_batch = 3;
  bad[2].entries = {{1, 10}, {2, 25}};  // throughput drops
  bad[2].max_effective_batch = 2;
  bad[3].entries = {{1, -1}};
  for (const auto& t : bad) {
    try {
      t.validate();
      FAIL();
    } catch (const cs::Error& e) {
      EXPECT_EQ(e.kind(), cs::ErrorKind::kConfigInvalid);
      EXPECT_EQ(e.field(), "server.batch_latency_table");
    }
  }
}

TEST(LatencyTable, LinearModel) {
  auto t = cs::make_linear_table(15, 4.5, 64);
  EXPECT_DOUBLE_EQ(t.latency(1), 15);
  EXPECT_DOUBLE_EQ(t.latency(64), 15 + 4.5 * 63);
  EXPECT_DOUBLE_EQ(t.peak_throughput(), 64 / (15 + 4.5 * 63) * 1000.0);
}

TEST(RequestQueue, Fifo) {
  cs::RequestQueue q;
  cs::Request a{1, 0, 0.0}, b{2, 0, 1.0}, c{3, 0, 2.0};
  q.enqueue(a);
  q.enqueue(b);
  EXPECT_EQ(q.dequeue_batch(2), (std::vector<cs::Request>{a, b}));
  q.enqueue(a);
  q.enqueue(b);
  q.enqueue(c);
  q.dequeue_batch(2);
  EXPECT_EQ(q.size(), 1u);
  EXPECT_EQ(q.front(), c);
}

TEST(RequestQueue, Underflow) {
  cs::RequestQueue q;
  try {
    q.dequeue_batch(1);
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::kUnderflow);
  }
}

TEST(ServerModel, CachesCapacity) {
  cs::ServerModel m(example_table(), 100);
  EXPECT_EQ(m.capacity().capacity, 36);
  m.recompute_capacity(example_table(), 200);
  EXPECT_EQ(m.capacity().capacity, cs::compute_capacity_greedy(example_table(), 200).capacity);
}
