#include "maskfix/sequencing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "maskfix/rng.hpp"

namespace maskfix {

OrderKind order_kind_from_string(const std::string& name) {
  if (name == "halton") return OrderKind::halton;
  if (name == "raster") return OrderKind::raster;
  if (name == "spiral") return OrderKind::spiral;
  if (name == "random") return OrderKind::random;
  throw std::invalid_argument("unknown order kind: " + name);
}

std::string to_string(OrderKind kind) {
  switch (kind) {
    case OrderKind::halton: return "halton";
    case OrderKind::raster: return "raster";
    case OrderKind::spiral: return "spiral";
    case OrderKind::random: return "random";
  }
  throw std::invalid_argument("bad order kind");
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "arccos") return ScheduleKind::arccos;
  if (name == "cosine") return ScheduleKind::cosine;
  if (name == "square") return ScheduleKind::square;
  if (name == "linear") return ScheduleKind::linear;
  if (name == "root") return ScheduleKind::root;
  if (name == "constant") return ScheduleKind::constant;
  throw std::invalid_argument("unknown schedule kind: " + name);
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::arccos: return "arccos";
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::square: return "square";
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::root: return "root";
    case ScheduleKind::constant: return "constant";
  }
  throw std::invalid_argument("bad schedule kind");
}

double van_der_corput(std::uint64_t index, int base) {
  if (base < 2) throw std::invalid_argument("base must be at least 2");
  if (index < 1) throw std::invalid_argument("index must be at least 1");
  double result = 0.0;
  double denom = 1.0;
  while (index > 0) {
    denom *= base;
    result += static_cast<double>(index % static_cast<std::uint64_t>(base)) / denom;
    index /= static_cast<std::uint64_t>(base);
  }
  return result;
}

static void check_dims(int height, int width) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("grid dimensions must be positive");
  }
}

OrderPlan halton_order(int height, int width) {
  check_dims(height, width);
  int n = height * width;
  OrderPlan plan;
  plan.kind = OrderKind::halton;
  plan.order.reserve(static_cast<std::size_t>(n));
  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  int emitted = 0;
  for (std::uint64_t i = 1; emitted < n; ++i) {
    double u = van_der_corput(i, 2);
    double v = van_der_corput(i, 3);
    int x = static_cast<int>(u * width);
    int y = static_cast<int>(v * height);
    if (x >= width) x = width - 1;
    if (y >= height) y = height - 1;
    int pos = y * width + x;
    if (!visited[static_cast<std::size_t>(pos)]) {
      visited[static_cast<std::size_t>(pos)] = true;
      plan.order.push_back(pos);
      ++emitted;
    }
  }
  return plan;
}

OrderPlan raster_order(int height, int width) {
  check_dims(height, width);
  OrderPlan plan;
  plan.kind = OrderKind::raster;
  plan.order.resize(static_cast<std::size_t>(height) * width);
  std::iota(plan.order.begin(), plan.order.end(), 0);
  return plan;
}

OrderPlan spiral_order(int height, int width) {
  check_dims(height, width);
  OrderPlan plan;
  plan.kind = OrderKind::spiral;
  plan.order.reserve(static_cast<std::size_t>(height) * width);
  int top = 0, bottom = height - 1, left = 0, right = width - 1;
  while (top <= bottom && left <= right) {
    for (int x = left; x <= right; ++x) plan.order.push_back(top * width + x);
    ++top;
    for (int y = top; y <= bottom; ++y) plan.order.push_back(y * width + right);
    --right;
    if (top <= bottom) {
      for (int x = right; x >= left; --x) plan.order.push_back(bottom * width + x);
      --bottom;
    }
    if (left <= right) {
      for (int y = bottom; y >= top; --y) plan.order.push_back(y * width + left);
      ++left;
    }
  }
  return plan;
}

OrderPlan random_order(int height, int width, std::uint64_t seed) {
  check_dims(height, width);
  OrderPlan plan;
  plan.kind = OrderKind::random;
  plan.order.resize(static_cast<std::size_t>(height) * width);
  std::iota(plan.order.begin(), plan.order.end(), 0);
  Rng rng = derive_rng(seed, stream::kOrderShuffle, height, width);
  rng.shuffle(plan.order);
  return plan;
}

OrderPlan make_order(OrderKind kind, int height, int width, std::uint64_t seed) {
  switch (kind) {
    case OrderKind::halton: return halton_order(height, width);
    case OrderKind::raster: return raster_order(height, width);
    case OrderKind::spiral: return spiral_order(height, width);
    case OrderKind::random: return random_order(height, width, seed);
  }
  throw std::invalid_argument("bad order kind");
}

OrderPlan roll(const OrderPlan& plan, int offset) {
  int n = static_cast<int>(plan.order.size());
  if (offset < 0 || offset >= n) {
    throw std::invalid_argument("roll offset outside [0, n)");
  }
  OrderPlan rolled = plan;
  std::rotate(rolled.order.begin(), rolled.order.begin() + offset,
              rolled.order.end());
  rolled.roll_offset = (plan.roll_offset + offset) % n;
  return rolled;
}

double mask_ratio(double t, ScheduleKind kind) {
  if (t < 0.0 || t > 1.0) {
    throw std::invalid_argument("progress t outside [0, 1]");
  }
  switch (kind) {
    case ScheduleKind::arccos: return (2.0 / M_PI) * std::acos(t);
    case ScheduleKind::cosine: return std::cos(M_PI * t / 2.0);
    case ScheduleKind::square: return 1.0 - t * t;
    case ScheduleKind::linear: return 1.0 - t;
    case ScheduleKind::root: return 1.0 - std::sqrt(t);
    case ScheduleKind::constant: return 1.0 - t;
  }
  throw std::invalid_argument("bad schedule kind");
}

StepSchedule group_sizes(int n, int m, ScheduleKind kind) {
  if (m < 1 || m > n) throw std::invalid_argument("need 1 <= m <= n");
  StepSchedule schedule;
  schedule.steps = m;
  schedule.kind = kind;
  schedule.group_sizes.resize(static_cast<std::size_t>(m));

  std::vector<double> quota(static_cast<std::size_t>(m));
  std::vector<double> remainder(static_cast<std::size_t>(m));
  int assigned = 0;
  for (int s = 0; s < m; ++s) {
    double hi = mask_ratio(static_cast<double>(s) / m, kind);
    double lo = mask_ratio(static_cast<double>(s + 1) / m, kind);
    quota[static_cast<std::size_t>(s)] = n * (hi - lo);
    int base = static_cast<int>(std::floor(quota[static_cast<std::size_t>(s)]));
    if (base < 0) base = 0;
    schedule.group_sizes[static_cast<std::size_t>(s)] = base;
    remainder[static_cast<std::size_t>(s)] =
        quota[static_cast<std::size_t>(s)] - base;
    assigned += base;
  }

  // Hand out the rounding shortfall by largest fractional remainder. Ties go
  // to the later step, which keeps sizes non-decreasing for the convex
  // schedules whose quotas grow with s.
  std::vector<int> by_remainder(static_cast<std::size_t>(m));
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::sort(by_remainder.begin(), by_remainder.end(), [&](int a, int b) {
    double ra = remainder[static_cast<std::size_t>(a)];
    double rb = remainder[static_cast<std::size_t>(b)];
    if (ra != rb) return ra > rb;
    return a > b;
  });
  for (int k = 0; assigned < n; ++k) {
    schedule.group_sizes[static_cast<std::size_t>(by_remainder[
        static_cast<std::size_t>(k % m)])] += 1;
    ++assigned;
  }

  // Every step must reveal something; borrow from the largest group (ties to
  // the later step) until no group is empty. Terminates because n >= m.
  for (int s = 0; s < m; ++s) {
    while (schedule.group_sizes[static_cast<std::size_t>(s)] == 0) {
      int largest = 0;
      for (int t = 1; t < m; ++t) {
        if (schedule.group_sizes[static_cast<std::size_t>(t)] >=
            schedule.group_sizes[static_cast<std::size_t>(largest)]) {
          largest = t;
        }
      }
      schedule.group_sizes[static_cast<std::size_t>(largest)] -= 1;
      schedule.group_sizes[static_cast<std::size_t>(s)] += 1;
    }
  }
  return schedule;
}

GroupPartition partition(const OrderPlan& plan, const StepSchedule& schedule) {
  int n = static_cast<int>(plan.order.size());
  int total = 0;
  for (int g : schedule.group_sizes) total += g;
  if (total != n) {
    throw std::invalid_argument("schedule does not cover the plan's positions");
  }
  GroupPartition result;
  result.groups.reserve(schedule.group_sizes.size());
  std::size_t cursor = 0;
  for (int g : schedule.group_sizes) {
    result.groups.emplace_back(plan.order.begin() + static_cast<long>(cursor),
                               plan.order.begin() + static_cast<long>(cursor + g));
    cursor += static_cast<std::size_t>(g);
  }
  return result;
}

}  // namespace maskfix
