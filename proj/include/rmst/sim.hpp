#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmst/dataset.hpp"

namespace rmst {

enum class CovariateKind { normal, bernoulli, uniform };
enum class CovariateRole { prognostic, nuisance, effect_modifier };

// normal: (mean, variance); bernoulli: (p, unused); uniform: (low, high)
struct CovariateGenerator {
  std::string name;
  CovariateKind kind = CovariateKind::normal;
  double param1 = 0.0;
  double param2 = 1.0;
  double log_rate_coef = 0.0;  // enters lambda = exp(linear predictor)
  CovariateRole role = CovariateRole::nuisance;
};

struct TreatmentInteraction {
  std::string covariate;  // must name a bernoulli generator
  double log_rate_coef = 0.0;
};

// Weibull event times per arm, S(t | a, z) = exp(-(lambda t)^(1/sigma_a)) with
// log lambda = base + treatment * a + sum_k coef_k z_k + interaction * a * e.
struct ScenarioSpec {
  std::string id = "custom";
  double shape_control = 1.0;
  double shape_treatment = 1.0;
  double base_log_rate = -1.2;
  double treatment_log_rate = 0.0;
  std::vector<CovariateGenerator> covariates;
  std::optional<TreatmentInteraction> interaction;
  double admin_censor_time = 8.0;
  double target_censor_rate = 0.30;
  double tau = 5.0;
  // Upper bound c* of the uniform censoring distribution; calibrated to
  // target_censor_rate when absent. +inf means administrative censoring only.
  std::optional<double> censor_upper;

  void validate() const;
  double shape(int arm) const { return arm == 1 ? shape_treatment : shape_control; }
  double log_rate(int arm, std::span<const double> z) const;
  bool has_covariate_effects() const;
  int interaction_index() const;  // -1 without an interaction
};

// Built-in scenarios "1" (null), "1a" (HR 0.6), "2" (early effect),
// "3" (delayed effect), "4", "5" (prognostic covariates, parameterised
// defaults) and "6" (crossing curves via a treatment x biomarker interaction).
ScenarioSpec builtin_scenario(const std::string& id);

std::string scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const std::string& text);
// A builtin id, or a path to a JSON file.
ScenarioSpec load_scenario(const std::string& id_or_path);

// 1:1 block randomisation, covariates from their generators, Weibull event
// times by inverse transform, censoring min(Uniform(0, c*), admin time).
Dataset generate(const ScenarioSpec& spec, int n, std::uint64_t seed);

inline constexpr int kDefaultPilotSize = 100000;
inline constexpr std::uint64_t kDefaultPilotSeed = 0x5EEDC0FFEEULL;

// Bisection on c* with common random numbers over a pilot sample, so the
// simulated censoring rate is monotone in c*. Cached per (spec, n_pilot, seed).
double calibrate_censoring(const ScenarioSpec& spec, int n_pilot = kDefaultPilotSize,
                           std::uint64_t seed = kDefaultPilotSeed);

// Censoring fraction for a given c* on a fresh sample (validation helper).
double censoring_rate(const ScenarioSpec& spec, double censor_upper, int n, std::uint64_t seed);

struct StratumTruth {
  double delta_minus = 0.0;  // effect when the interaction covariate is 0
  double delta_plus = 0.0;   // effect when it is 1
  double beta1 = 0.0;        // control arm, covariate 1 versus 0
};

struct TrueValues {
  double delta = 0.0;  // marginal RMST difference, arm 1 minus arm 0
  double delta_mcse = 0.0;
  bool exact = true;
  std::optional<StratumTruth> strata;
};

TrueValues true_values(const ScenarioSpec& spec, double tau, int mc_size = 1000000, std::uint64_t seed = 20240101);

}  // namespace rmst
