#pragma once

#include <array>
#include <span>
#include <string_view>

#include "tumorfab/volume.hpp"

namespace tumorfab {

/// Composite BraTS evaluation regions: ET = {3}, TC = {1, 3}, WT = {1, 2, 3}.
enum class Region { ET, TC, WT };

inline constexpr std::array<Region, 3> kRegions{Region::ET, Region::TC, Region::WT};

std::string_view region_name(Region region);
bool region_contains(Region region, uint8_t label);

/// 2|A ∩ B| / (|A| + |B|) over the region's binarized masks; 1 when both are empty.
double dice(const SegMask& pred, const SegMask& gt, Region region);

struct DiceScores {
  double et = 0.0;
  double tc = 0.0;
  double wt = 0.0;
  double mean = 0.0;
};

DiceScores mean_dice(const SegMask& pred, const SegMask& gt);

struct TTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;
  double degrees_of_freedom = 0.0;
  /// Both samples had zero variance; p is 1 for equal means and 0 otherwise.
  bool degenerate = false;
};

/// Two-sample unequal-variance (Welch) t-test with a two-tailed p-value.
/// Each sample needs at least two values.
TTestResult two_tailed_t_test(std::span<const double> a, std::span<const double> b);

struct SampleSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

SampleSummary summarize(std::span<const double> values);

}  // namespace tumorfab
