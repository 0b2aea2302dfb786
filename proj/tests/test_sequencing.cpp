#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "maskfix/rng.hpp"
#include "maskfix/sequencing.hpp"

using namespace maskfix;

namespace {

bool is_permutation_of_range(const std::vector<int>& order, int n) {
  if (static_cast<int>(order.size()) != n) return false;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int p : order) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = true;
  }
  return true;
}

}  // namespace

TEST_CASE("van_der_corput radical inverse") {
  CHECK(van_der_corput(1, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(van_der_corput(3, 2) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(van_der_corput(2, 3) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(van_der_corput(1, 1), std::invalid_argument);
  CHECK_THROWS_AS(van_der_corput(0, 2), std::invalid_argument);
  for (std::uint64_t i = 1; i < 100; ++i) {
    double u = van_der_corput(i, 2);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("halton order starts at the recorded first cell") {
  // Point 1 is (1/2, 1/3) -> x = floor(0.5 * 16) = 8, y = floor(16/3) = 5.
  OrderPlan plan = halton_order(16, 16);
  CHECK(plan.order.front() == 5 * 16 + 8);
  CHECK(plan.kind == OrderKind::halton);

  OrderPlan again = halton_order(16, 16);
  CHECK(plan.order == again.order);

  CHECK(halton_order(1, 1).order == std::vector<int>{0});
}

TEST_CASE("every ordering kind yields a permutation") {
  const int dims[] = {1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64};
  for (int h : dims) {
    for (int w : dims) {
      int n = h * w;
      CHECK(is_permutation_of_range(halton_order(h, w).order, n));
      CHECK(is_permutation_of_range(raster_order(h, w).order, n));
      CHECK(is_permutation_of_range(spiral_order(h, w).order, n));
      CHECK(is_permutation_of_range(random_order(h, w, 7).order, n));
    }
  }
}

TEST_CASE("raster and spiral walk the expected cells") {
  CHECK(raster_order(2, 2).order == std::vector<int>{0, 1, 2, 3});
  CHECK(spiral_order(2, 2).order == std::vector<int>{0, 1, 3, 2});
  CHECK(spiral_order(3, 3).order ==
        std::vector<int>{0, 1, 2, 5, 8, 7, 6, 3, 4});
  CHECK(spiral_order(1, 4).order == std::vector<int>{0, 1, 2, 3});
  CHECK(spiral_order(4, 1).order == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("random order is seed-reproducible") {
  OrderPlan a = random_order(8, 8, 42);
  OrderPlan b = random_order(8, 8, 42);
  OrderPlan c = random_order(8, 8, 43);
  CHECK(a.order == b.order);
  CHECK(a.order != c.order);
}

TEST_CASE("roll rotates the visit order") {
  OrderPlan plan = raster_order(2, 2);
  CHECK(roll(plan, 0).order == std::vector<int>{0, 1, 2, 3});
  CHECK(roll(plan, 1).order == std::vector<int>{1, 2, 3, 0});
  OrderPlan there = roll(plan, 3);
  OrderPlan back = roll(there, 1);
  CHECK(back.order == plan.order);
  CHECK_THROWS_AS(roll(plan, 4), std::invalid_argument);
  CHECK_THROWS_AS(roll(plan, -1), std::invalid_argument);
}

TEST_CASE("mask_ratio endpoints and shape") {
  const ScheduleKind kinds[] = {ScheduleKind::arccos, ScheduleKind::cosine,
                                ScheduleKind::square, ScheduleKind::linear,
                                ScheduleKind::root, ScheduleKind::constant};
  for (ScheduleKind kind : kinds) {
    CHECK(mask_ratio(0.0, kind) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mask_ratio(1.0, kind) == doctest::Approx(0.0).epsilon(1e-12));
    double prev = mask_ratio(0.0, kind);
    for (int k = 1; k <= 1000; ++k) {
      double cur = mask_ratio(k / 1000.0, kind);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
  CHECK(mask_ratio(0.5, ScheduleKind::arccos) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(mask_ratio(-0.01, ScheduleKind::arccos),
                  std::invalid_argument);
  CHECK_THROWS_AS(mask_ratio(1.01, ScheduleKind::linear),
                  std::invalid_argument);
}

TEST_CASE("group_sizes covers n with positive groups") {
  StepSchedule equal = group_sizes(16, 4, ScheduleKind::constant);
  CHECK(equal.group_sizes == std::vector<int>{4, 4, 4, 4});

  const ScheduleKind kinds[] = {ScheduleKind::arccos, ScheduleKind::cosine,
                                ScheduleKind::square, ScheduleKind::linear,
                                ScheduleKind::root, ScheduleKind::constant};
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 1 + rng.below_int(1024);
    int m = 1 + rng.below_int(n);
    for (ScheduleKind kind : kinds) {
      StepSchedule s = group_sizes(n, m, kind);
      CHECK(static_cast<int>(s.group_sizes.size()) == m);
      int sum = 0;
      for (int g : s.group_sizes) {
        CHECK(g >= 1);
        sum += g;
      }
      CHECK(sum == n);
    }
  }
  CHECK_THROWS_AS(group_sizes(4, 5, ScheduleKind::linear),
                  std::invalid_argument);
  CHECK_THROWS_AS(group_sizes(4, 0, ScheduleKind::linear),
                  std::invalid_argument);
}

TEST_CASE("arccos group sizes grow with the step index") {
  StepSchedule s = group_sizes(576, 32, ScheduleKind::arccos);
  int sum = 0;
  for (std::size_t i = 1; i < s.group_sizes.size(); ++i) {
    CHECK(s.group_sizes[i] >= s.group_sizes[i - 1]);
  }
  for (int g : s.group_sizes) sum += g;
  CHECK(sum == 576);
}

TEST_CASE("partition slices the order by group sizes") {
  OrderPlan plan = raster_order(2, 2);
  StepSchedule schedule;
  schedule.steps = 2;
  schedule.group_sizes = {2, 2};
  GroupPartition parts = partition(plan, schedule);
  REQUIRE(parts.groups.size() == 2);
  CHECK(parts.groups[0] == std::vector<int>{0, 1});
  CHECK(parts.groups[1] == std::vector<int>{2, 3});

  StepSchedule whole;
  whole.steps = 1;
  whole.group_sizes = {4};
  GroupPartition one = partition(plan, whole);
  CHECK(one.groups.size() == 1);
  CHECK(one.groups[0] == plan.order);

  StepSchedule bad;
  bad.steps = 1;
  bad.group_sizes = {3};
  CHECK_THROWS_AS(partition(plan, bad), std::invalid_argument);
}

TEST_CASE("partition is a disjoint cover for fuzzed inputs") {
  Rng rng(7);
  const ScheduleKind kinds[] = {ScheduleKind::arccos, ScheduleKind::square,
                                ScheduleKind::constant};
  for (int trial = 0; trial < 100; ++trial) {
    int h = 1 + rng.below_int(16);
    int w = 1 + rng.below_int(16);
    int n = h * w;
    int m = 1 + rng.below_int(n);
    OrderPlan plan = make_order(OrderKind::random, h, w, trial);
    StepSchedule schedule = group_sizes(n, m, kinds[trial % 3]);
    GroupPartition parts = partition(plan, schedule);
    std::set<int> seen;
    for (const auto& group : parts.groups) {
      for (int p : group) {
        CHECK(seen.insert(p).second);
      }
    }
    CHECK(static_cast<int>(seen.size()) == n);
  }
}

TEST_CASE("halton spreads early visits more evenly than raster") {
  // Bucket the first quarter of visits into the sixteen 4x4 blocks of a
  // 16x16 grid; the low-discrepancy order should have a tighter max-min
  // spread than a raster scan, which floods the top rows first.
  auto spread = [](const std::vector<int>& order) {
    int counts[16] = {0};
    for (int k = 0; k < 64; ++k) {
      int pos = order[static_cast<std::size_t>(k)];
      int y = pos / 16, x = pos % 16;
      counts[(y / 4) * 4 + (x / 4)] += 1;
    }
    int lo = counts[0], hi = counts[0];
    for (int c : counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    return hi - lo;
  };
  int halton_spread = spread(halton_order(16, 16).order);
  int raster_spread = spread(raster_order(16, 16).order);
  CHECK(halton_spread < raster_spread);
}

TEST_CASE("kind names round-trip") {
  CHECK(order_kind_from_string("halton") == OrderKind::halton);
  CHECK(to_string(OrderKind::spiral) == "spiral");
  CHECK(schedule_kind_from_string("arccos") == ScheduleKind::arccos);
  CHECK(to_string(ScheduleKind::root) == "root");
  CHECK_THROWS_AS(order_kind_from_string("zigzag"), std::invalid_argument);
  CHECK_THROWS_AS(schedule_kind_from_string("cubic"), std::invalid_argument);
}
