#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rmst/gmm.hpp"

namespace rmst {

enum class SamplerKind {
  random_walk,  // adaptive Gaussian random-walk Metropolis
  mala,         // Metropolis-adjusted Langevin with finite-difference gradients
};

struct SamplerConfig {
  int chains = 3;
  int warmup = 1000;
  int samples = 1000;
  std::uint64_t seed = 1;
  double target_accept = 0.30;
  double init_scale = 0.1;
  SamplerKind kind = SamplerKind::random_walk;
  bool parallel_chains = true;
  // Kernel steps per stored draw; warmup is scaled by the same factor.
  // 0 picks 2q + 1, enough for random-walk draws to be close to independent.
  int thin = 0;

  void validate() const;
  int effective_thin(int dim) const { return thin > 0 ? thin : 2 * dim + 1; }
};

struct PosteriorDraws {
  std::vector<std::string> parameter_names;
  std::vector<Eigen::MatrixXd> chains;  // one samples x q matrix per chain
  Eigen::VectorXd acceptance_rate;      // per chain, post-warmup
  Eigen::VectorXd rhat;                 // per parameter
  Eigen::VectorXd ess;                  // per parameter, bulk
  bool divergent_chains = false;        // some rhat > 1.01
  long ridge_activations = 0;

  int num_chains() const { return static_cast<int>(chains.size()); }
  int num_samples() const { return chains.empty() ? 0 : static_cast<int>(chains.front().rows()); }
  int dim() const { return chains.empty() ? 0 : static_cast<int>(chains.front().cols()); }
  int index_of(const std::string& name) const;  // accepts "delta" for "arm"; throws UnknownParameter
  std::vector<std::vector<double>> per_chain(int param) const;
  std::vector<double> pooled(int param) const;
};

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

// Generic driver, also the hook used to calibrate the kernel on known
// targets. Chains start at center + init_scale * N(0, I); proposal
// covariance starts at init_cov and is re-estimated from warmup windows.
PosteriorDraws sample_density(const LogDensity& log_density, const Eigen::VectorXd& center,
                              const Eigen::MatrixXd& init_cov, std::vector<std::string> names,
                              const SamplerConfig& config);

// Samples the GMM pseudo-posterior, starting from the GEE estimate with its
// sandwich covariance as the initial proposal shape.
PosteriorDraws sample(const GmmState& state, const DesignMatrix& design, const Eigen::VectorXd& y,
                      const SamplerConfig& config);

struct ParameterDiagnostics {
  double rhat = 0.0;
  double ess = 0.0;
};

// Split-chain rank-normalised R-hat (max of bulk and folded) and bulk ESS,
// capped at the total number of draws.
ParameterDiagnostics diagnose_parameter(const std::vector<std::vector<double>>& chains);
void diagnose(PosteriorDraws& draws);

enum class TailDirection { greater_equal, greater, less_equal, less };
TailDirection parse_direction(const std::string& op);
std::string to_string(TailDirection direction);

struct TailRequest {
  std::string parameter;
  double threshold = 0.0;
  TailDirection direction = TailDirection::greater_equal;
};

struct TailProbability {
  std::string parameter;
  double threshold = 0.0;
  TailDirection direction = TailDirection::greater_equal;
  double probability = 0.0;
  double mc_se = 0.0;
  double indicator_ess = 0.0;
};

struct ParameterSummary {
  std::string name;
  double mean = 0.0, sd = 0.0;
  double q025 = 0.0, q50 = 0.0, q975 = 0.0;
  double rhat = 0.0, ess = 0.0;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;
  std::vector<TailProbability> tail_probabilities;
};

// sqrt(p (1 - p) / ess)
double tail_probability_mcse(double probability, double indicator_ess);

PosteriorSummary summarize(const PosteriorDraws& draws, const std::vector<TailRequest>& tails = {});

}  // namespace rmst
