#pragma once

#include <vector>

#include "rmst/dataset.hpp"

namespace rmst {

enum class PseudoAlgorithm { naive, fast };

// Jackknife pseudo-values of the KM-integrated RMST, one per record and in
// dataset order: n * theta - (n - 1) * theta(-i).
struct PseudoObsVector {
  double tau = 0.0;
  std::vector<double> values;
  double full_rmst = 0.0;  // theta, the full-sample KM integral on [0, tau]
};

// naive refits the product-limit estimator without each subject (O(n^2));
// fast derives every leave-one-out integral from one pass over the
// full-sample risk sets (O(n log n)).
PseudoObsVector pseudo_obs(const Dataset& data, double tau, PseudoAlgorithm algorithm = PseudoAlgorithm::fast);

}  // namespace rmst
