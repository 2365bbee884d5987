#pragma once

#include <string>
#include <vector>

#include "rmst/dataset.hpp"

namespace rmst {

// Keeps tau inside the follow-up of both arms: returns requested_tau unless
// an arm's last observed time is smaller, in which case the smallest of the
// per-arm maxima is used.
double resolve_tau(const Dataset& data, double requested_tau);

struct TauCandidate {
  std::string rule;
  double tau = 0.0;
};

struct TauCandidates {
  std::vector<TauCandidate> candidates;
  std::vector<std::string> notes;  // rules that could not be satisfied
};

// Data-driven restriction times:
//   percentile90     90th percentile (type 7) of all observed times
//   se_below_<lim>   largest time before the pooled KM Greenwood SE first
//                    reaches lim
//   min_arm_max      smallest of the per-arm maximum observed times
TauCandidates tau_candidates(const Dataset& data, const std::vector<double>& se_limits);

}  // namespace rmst
