#include "rmst/km.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmst/error.hpp"

namespace rmst {

KmCurve km_fit(const std::vector<double>& times, const std::vector<bool>& events) {
  const auto n = times.size();
  if (n == 0) throw Error(ErrorKind::EmptyDataset, "km_fit: no records");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  KmCurve curve;
  curve.n = static_cast<int>(n);
  curve.last_time = times[order.back()];

  double s = 1.0;
  double greenwood = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = times[order[i]];
    const int at_risk = static_cast<int>(n - i);
    int d = 0;
    std::size_t j = i;
    for (; j < n && times[order[j]] == t; ++j) d += events[order[j]] ? 1 : 0;
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / at_risk;
      double se = 0.0;
      if (d < at_risk) {
        greenwood += static_cast<double>(d) / (static_cast<double>(at_risk) * (at_risk - d));
        se = s * std::sqrt(greenwood);
      }
      // Greenwood is undefined once the estimate reaches zero; report 0.
      curve.jump_times.push_back(t);
      curve.survival.push_back(s);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(d);
      curve.se.push_back(se);
    }
    i = j;
  }
  return curve;
}

KmCurve km_fit(const Dataset& data) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "km_fit: no records");
  std::vector<double> times;
  std::vector<bool> events;
  times.reserve(data.size());
  events.reserve(data.size());
  for (const auto& r : data.records) {
    times.push_back(r.time);
    events.push_back(r.event);
  }
  return km_fit(times, events);
}

namespace {

// Index of the last jump at or before t, or -1.
long step_index(const std::vector<double>& jumps, double t) {
  auto it = std::upper_bound(jumps.begin(), jumps.end(), t);
  return static_cast<long>(it - jumps.begin()) - 1;
}

}  // namespace

double KmCurve::survival_at(double t) const {
  long k = step_index(jump_times, t);
  return k < 0 ? 1.0 : survival[k];
}

double KmCurve::se_at(double t) const {
  long k = step_index(jump_times, t);
  return k < 0 ? 0.0 : se[k];
}

double rmst_from_curve(const KmCurve& curve, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::DomainError, "rmst: tau must be positive");
  double area = 0.0;
  double prev_t = 0.0;
  double s = 1.0;
  for (std::size_t j = 0; j < curve.jump_times.size(); ++j) {
    const double t = curve.jump_times[j];
    if (t >= tau) break;
    area += s * (t - prev_t);
    prev_t = t;
    s = curve.survival[j];
  }
  area += s * (tau - prev_t);
  return area;
}

}  // namespace rmst
