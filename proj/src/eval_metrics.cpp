#include "tumorfab/eval_metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "tumorfab/error.hpp"

namespace tumorfab {

std::string_view region_name(Region region) {
  switch (region) {
    case Region::ET: return "ET";
    case Region::TC: return "TC";
    case Region::WT: return "WT";
  }
  return "?";
}

bool region_contains(Region region, uint8_t label) {
  switch (region) {
    case Region::ET: return label == 3;
    case Region::TC: return label == 1 || label == 3;
    case Region::WT: return label >= 1 && label <= 3;
  }
  return false;
}

double dice(const SegMask& pred, const SegMask& gt, Region region) {
  require_same_dims(pred.dims(), gt.dims(), "dice");
  const auto& p = pred.labels();
  const auto& g = gt.labels();
  int64_t both = 0, np = 0, ng = 0;
  for (size_t n = 0; n < p.size(); ++n) {
    const bool a = region_contains(region, p[n]);
    const bool b = region_contains(region, g[n]);
    np += a;
    ng += b;
    both += a && b;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(np + ng);
}

DiceScores mean_dice(const SegMask& pred, const SegMask& gt) {
  DiceScores s;
  s.et = dice(pred, gt, Region::ET);
  s.tc = dice(pred, gt, Region::TC);
  s.wt = dice(pred, gt, Region::WT);
  s.mean = (s.et + s.tc + s.wt) / 3.0;
  return s;
}

SampleSummary summarize(std::span<const double> values) {
  SampleSummary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

TTestResult two_tailed_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("t-test needs at least two values per sample");
  for (double v : a)
    if (!std::isfinite(v)) throw ValidationError("t-test sample contains a non-finite value");
  for (double v : b)
    if (!std::isfinite(v)) throw ValidationError("t-test sample contains a non-finite value");

  const auto sa = summarize(a);
  const auto sb = summarize(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = sa.stddev * sa.stddev / na;
  const double vb = sb.stddev * sb.stddev / nb;
  const double diff = sa.mean - sb.mean;

  TTestResult r;
  if (va + vb == 0.0) {
    r.degenerate = true;
    if (diff == 0.0) {
      r.t_statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), diff);
      r.p_value = 0.0;
    }
    return r;
  }
  r.t_statistic = diff / std::sqrt(va + vb);
  // Welch-Satterthwaite degrees of freedom.
  r.degrees_of_freedom = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  if (r.t_statistic == 0.0) {
    r.p_value = 1.0;
    return r;
  }
  const boost::math::students_t dist(r.degrees_of_freedom);
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t_statistic))), 0.0, 1.0);
  return r;
}

}  // namespace tumorfab
