#pragma once

#include <vector>

#include "rmst/dataset.hpp"

namespace rmst {

// Product-limit survival estimate. Entry j describes the step at
// jump_times[j]; survival[j] is S(t) on [jump_times[j], jump_times[j+1]).
struct KmCurve {
  std::vector<double> jump_times;
  std::vector<double> survival;
  std::vector<int> at_risk;
  std::vector<int> events;
  std::vector<double> se;  // Greenwood
  double last_time = 0.0;  // largest observed time in the source sample
  int n = 0;

  double survival_at(double t) const;
  double se_at(double t) const;
  // False when tau lies beyond the last observed time; the curve is then
  // carried flat over the uncovered stretch.
  bool covers(double tau) const { return tau <= last_time; }
};

// Ties: events at a time are processed before censorings at that time, so a
// subject censored at t is still in the risk set of events at t.
KmCurve km_fit(const Dataset& data);
KmCurve km_fit(const std::vector<double>& times, const std::vector<bool>& events);

// Exact area under the step function on [0, tau].
double rmst_from_curve(const KmCurve& curve, double tau);

}  // namespace rmst
