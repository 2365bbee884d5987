#pragma once

#include <atomic>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rmst/dataset.hpp"
#include "rmst/pseudo.hpp"

namespace rmst {

// How a treatment x covariate interaction enters the design.
//   product     (1, A, E, A*E): coefficients beta0, delta, beta1, beta2
//   stratified  (1, E, A*1{E=0}, A*1{E=1}): beta0, beta1, delta-, delta+
// The two span the same column space; delta- = delta, delta+ = delta + beta2.
enum class InteractionEncoding { product, stratified };

struct RegressionSpec {
  bool include_treatment = true;
  std::vector<int> covariate_indices;  // into Dataset::covariate_names
  std::vector<int> interactions;       // covariates interacted with treatment
  InteractionEncoding encoding = InteractionEncoding::product;
  // identity link only
};

struct DesignMatrix {
  Eigen::MatrixXd x;  // first column is the intercept
  std::vector<std::string> column_names;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

DesignMatrix build_design(const Dataset& data, const RegressionSpec& spec);

// Throws RankDeficient when the smallest singular value falls below 1e-10
// times the largest.
void check_full_rank(const Eigen::MatrixXd& x);

struct GmmState {
  Eigen::VectorXd beta;
  Eigen::VectorXd prior_mean;
  Eigen::VectorXd prior_var;

  // Independent N(0, sd^2) priors on every coefficient.
  static GmmState normal_prior(Eigen::Index q, double prior_sd);
  void validate() const;
};

Eigen::VectorXd as_vector(const PseudoObsVector& y);

// U_n(beta) = (1/n) sum_i x_i (y_i - x_i' beta)
Eigen::VectorXd score(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y);

// Sigma_n(beta) = (1/n^2) sum_i u_i u_i' - (1/n) U_n U_n'
Eigen::MatrixXd moment_covariance(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y);

struct ObjectiveValue {
  double value = 0.0;
  double ridge = 0.0;     // diagonal load actually used
  int escalations = 0;    // 0 when Sigma_n (+ the requested ridge) factorised directly
};

// Q_n(beta) = U_n' Sigma_n^-1 U_n via Cholesky. If the factorisation fails
// the diagonal is loaded with eps * tr(Sigma_n) / q for eps in
// 1e-10, 1e-8, 1e-6, 1e-4; SingularCovariance after that.
ObjectiveValue evaluate_objective(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y,
                                  double ridge = 0.0);
double objective(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y,
                 double ridge = 0.0);

// log of exp(-Q_n / 2)
double pseudo_log_likelihood(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y);

// Normal log-prior normalising constants are dropped.
double log_prior(const Eigen::VectorXd& beta, const GmmState& state);
double log_posterior(const Eigen::VectorXd& beta, const GmmState& state, const DesignMatrix& design,
                     const Eigen::VectorXd& y);

// Central differences, step 1e-6 * (1 + |beta_j|).
Eigen::VectorXd log_posterior_gradient(const Eigen::VectorXd& beta, const GmmState& state, const DesignMatrix& design,
                                       const Eigen::VectorXd& y);

// Bundles an immutable problem for repeated evaluation by the sampler.
// Ridge activations are counted so callers can check they never happen on
// well-conditioned data.
class GmmTarget {
 public:
  GmmTarget(DesignMatrix design, Eigen::VectorXd y, GmmState state);

  // -inf when Sigma_n cannot be factorised even with the maximum ridge.
  double operator()(const Eigen::VectorXd& beta) const;

  const DesignMatrix& design() const { return design_; }
  const Eigen::VectorXd& y() const { return y_; }
  const GmmState& state() const { return state_; }
  long ridge_activations() const { return ridge_activations_.load(); }

 private:
  DesignMatrix design_;
  Eigen::VectorXd y_;
  GmmState state_;
  mutable std::atomic<long> ridge_activations_{0};
};

}  // namespace rmst
