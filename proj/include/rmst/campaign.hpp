#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmst/gmm.hpp"
#include "rmst/metrics.hpp"
#include "rmst/sampler.hpp"
#include "rmst/sim.hpp"

namespace rmst {

// Comma-separated covariate names. "A*E" (or "arm*E") adds E as a main effect
// and interacts it with treatment; a bare "A" or "arm" is accepted and
// ignored since treatment is always in the model. Unknown names are input
// errors.
RegressionSpec parse_model(const std::vector<std::string>& covariate_names, const std::string& model,
                           InteractionEncoding encoding = InteractionEncoding::product);

struct CampaignConfig {
  ScenarioSpec scenario;
  int n = 200;
  int replications = 200;
  std::uint64_t seed = 1;
  std::optional<double> tau;  // scenario tau when absent
  std::string model;
  InteractionEncoding encoding = InteractionEncoding::product;
  SamplerConfig sampler;
  double prior_sd = 3.1622776601683795;
  int workers = 1;
  bool run_gmm = true;
};

// Truth for one design column, when the scenario defines one.
struct ParameterTruth {
  std::string parameter;
  double value = 0.0;
};

struct CampaignResult {
  double censor_upper = 0.0;
  double tau = 0.0;
  TrueValues truth;
  std::vector<ParameterTruth> targets;
  std::vector<ReplicationReport> reports;
  int failed_replications = 0;  // data or fit errors, excluded for every method
  int tau_adjusted = 0;         // replications where an arm ended before tau
  double mean_censoring = 0.0;
  long ridge_activations = 0;
};

// Replication r uses a dataset generated from derive_seed(seed, r) and a
// sampler seed derived from that, so the report does not depend on workers.
CampaignResult run_campaign(const CampaignConfig& config);

}  // namespace rmst
