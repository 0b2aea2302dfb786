#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maskfix {

enum class OrderKind { halton, raster, spiral, random };
enum class ScheduleKind { arccos, cosine, square, linear, root, constant };

OrderKind order_kind_from_string(const std::string& name);
std::string to_string(OrderKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);

// Visit order over the n = h*w grid positions. order is always a permutation
// of [0, n).
struct OrderPlan {
  std::vector<int> order;
  OrderKind kind = OrderKind::halton;
  int roll_offset = 0;
};

// How many positions are revealed at each of the m steps. Sizes are positive
// and sum to n.
struct StepSchedule {
  int steps = 1;
  std::vector<int> group_sizes;
  ScheduleKind kind = ScheduleKind::arccos;
};

// The ordered groups Z_0 .. Z_{m-1}: a disjoint cover of [0, n).
struct GroupPartition {
  std::vector<std::vector<int>> groups;
};

// Radical inverse of index in the given base. index >= 1, base >= 2; the
// result lies strictly inside (0, 1).
double van_der_corput(std::uint64_t index, int base);

// 2D Halton walk over the grid: point i = (vdc(i,2), vdc(i,3)) scaled to a
// cell via x = floor(u*w), y = floor(v*h). Base 2 drives x, base 3 drives y.
// Cells already visited are skipped, so the result is a permutation that
// preserves first-visit order.
OrderPlan halton_order(int height, int width);

OrderPlan raster_order(int height, int width);

// Clockwise inward spiral starting at the top-left cell.
OrderPlan spiral_order(int height, int width);

OrderPlan random_order(int height, int width, std::uint64_t seed);

OrderPlan make_order(OrderKind kind, int height, int width,
                     std::uint64_t seed = 0);

// Rotates the visit order left by offset (0 <= offset < n).
OrderPlan roll(const OrderPlan& plan, int offset);

// Fraction of tokens still masked at progress t in [0, 1]. All kinds start
// at 1 and end at 0. "constant" is the curve 1 - t, which exists only so
// group_sizes yields equal splits; it is not a claim about any schedule shape.
double mask_ratio(double t, ScheduleKind kind);

// Integer group sizes from the mask_ratio curve: quota for step s is
// n * (mask_ratio(s/m) - mask_ratio((s+1)/m)), integerized by largest
// remainder, then repaired so every group has at least one position by
// borrowing from the largest group.
StepSchedule group_sizes(int n, int m, ScheduleKind kind);

GroupPartition partition(const OrderPlan& plan, const StepSchedule& schedule);

}  // namespace maskfix
