#include "rmst/tau.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "rmst/error.hpp"
#include "rmst/km.hpp"
#include "rmst/stats.hpp"

namespace rmst {

double resolve_tau(const Dataset& data, double requested_tau) {
  if (!(requested_tau > 0.0)) throw Error(ErrorKind::DomainError, "resolve_tau: tau must be positive");
  const double max0 = data.max_time_in_arm(0);
  const double max1 = data.max_time_in_arm(1);
  if (max0 < 0.0 || max1 < 0.0) throw Error(ErrorKind::SingleArm, "resolve_tau: both arms must be present");
  const double limit = std::min(max0, max1);
  return limit < requested_tau ? limit : requested_tau;
}

TauCandidates tau_candidates(const Dataset& data, const std::vector<double>& se_limits) {
  TauCandidates out;
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "tau_candidates: no records");

  std::vector<double> times;
  times.reserve(data.size());
  for (const auto& r : data.records) times.push_back(r.time);
  out.candidates.push_back({"percentile90", quantile_type7(times, 0.9)});

  const KmCurve km = km_fit(data);
  for (double limit : se_limits) {
    char name[64];
    std::snprintf(name, sizeof name, "se_below_%g", limit);
    std::size_t first_cross = km.jump_times.size();
    for (std::size_t j = 0; j < km.jump_times.size(); ++j) {
      if (km.se[j] >= limit && km.survival[j] > 0.0) {
        first_cross = j;
        break;
      }
    }
    if (first_cross == 0) {
      out.notes.push_back(std::string(name) + ": SE exceeds the limit at the first event time");
      continue;
    }
    const double tau = first_cross == km.jump_times.size() ? km.last_time : km.jump_times[first_cross - 1];
    if (!(tau > 0.0)) {
      out.notes.push_back(std::string(name) + ": no positive time satisfies the limit");
      continue;
    }
    out.candidates.push_back({name, tau});
  }

  try {
    out.candidates.push_back({"min_arm_max", resolve_tau(data, std::numeric_limits<double>::infinity())});
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingleArm) throw;
    out.notes.push_back("min_arm_max: only one arm present");
  }
  return out;
}

}  // namespace rmst
