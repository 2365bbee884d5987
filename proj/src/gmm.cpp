#include "rmst/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "rmst/error.hpp"

namespace rmst {

namespace {

void check_dims(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y) {
  if (beta.size() != design.cols() || y.size() != design.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "beta has " + std::to_string(beta.size()) + " entries, design is " + std::to_string(design.rows()) +
                    "x" + std::to_string(design.cols()) + ", y has " + std::to_string(y.size()));
  }
}

bool is_binary(const Dataset& data, int col) {
  return std::all_of(data.records.begin(), data.records.end(), [col](const SurvivalRecord& r) {
    return r.covariates[col] == 0.0 || r.covariates[col] == 1.0;
  });
}

}  // namespace

void check_full_rank(const Eigen::MatrixXd& x) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(sv.size() - 1) >= 1e-10 * sv(0))) {
    throw Error(ErrorKind::RankDeficient, "design matrix is not of full column rank");
  }
}

DesignMatrix build_design(const Dataset& data, const RegressionSpec& spec) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "build_design: no records");
  const int p = static_cast<int>(data.covariate_names.size());
  std::set<int> seen;
  for (int c : spec.covariate_indices) {
    if (c < 0 || c >= p) throw Error(ErrorKind::InvalidSpec, "covariate index out of range");
    if (!seen.insert(c).second) throw Error(ErrorKind::InvalidSpec, "duplicate covariate index");
  }
  std::set<int> seen_inter;
  for (int c : spec.interactions) {
    if (!seen.count(c)) {
      throw Error(ErrorKind::InvalidSpec, "interaction covariate must also enter as a main effect");
    }
    if (!seen_inter.insert(c).second) throw Error(ErrorKind::InvalidSpec, "duplicate interaction");
    if (!spec.include_treatment) throw Error(ErrorKind::InvalidSpec, "interactions require the treatment term");
  }
  const bool stratified = spec.encoding == InteractionEncoding::stratified && !spec.interactions.empty();
  if (stratified) {
    if (spec.interactions.size() != 1) {
      throw Error(ErrorKind::InvalidSpec, "stratified encoding supports exactly one interaction");
    }
    if (!is_binary(data, spec.interactions[0])) {
      throw Error(ErrorKind::InvalidSpec, "stratified encoding needs a 0/1 interaction covariate");
    }
  }

  const auto n = static_cast<Eigen::Index>(data.size());
  std::vector<std::string> names{"intercept"};
  std::vector<Eigen::VectorXd> cols{Eigen::VectorXd::Ones(n)};
  auto column = [&](auto&& f) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = f(data.records[i]);
    return v;
  };

  if (spec.include_treatment && !stratified) {
    names.push_back("arm");
    cols.push_back(column([](const SurvivalRecord& r) { return static_cast<double>(r.arm); }));
  }
  for (int c : spec.covariate_indices) {
    names.push_back(data.covariate_names[c]);
    cols.push_back(column([c](const SurvivalRecord& r) { return r.covariates[c]; }));
  }
  if (stratified) {
    const int e = spec.interactions[0];
    const auto& en = data.covariate_names[e];
    names.push_back("arm[" + en + "=0]");
    cols.push_back(column([e](const SurvivalRecord& r) { return r.covariates[e] == 0.0 ? double(r.arm) : 0.0; }));
    names.push_back("arm[" + en + "=1]");
    cols.push_back(column([e](const SurvivalRecord& r) { return r.covariates[e] == 1.0 ? double(r.arm) : 0.0; }));
  } else {
    for (int c : spec.interactions) {
      names.push_back("arm:" + data.covariate_names[c]);
      cols.push_back(column([c](const SurvivalRecord& r) { return r.arm * r.covariates[c]; }));
    }
  }

  DesignMatrix design;
  design.x.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) design.x.col(static_cast<Eigen::Index>(j)) = cols[j];
  design.column_names = std::move(names);
  check_full_rank(design.x);
  return design;
}

GmmState GmmState::normal_prior(Eigen::Index q, double prior_sd) {
  GmmState s;
  s.beta = Eigen::VectorXd::Zero(q);
  s.prior_mean = Eigen::VectorXd::Zero(q);
  s.prior_var = Eigen::VectorXd::Constant(q, prior_sd * prior_sd);
  s.validate();
  return s;
}

void GmmState::validate() const {
  if (prior_mean.size() != prior_var.size() || beta.size() != prior_mean.size()) {
    throw Error(ErrorKind::DimensionMismatch, "GmmState: prior and beta sizes differ");
  }
  for (Eigen::Index j = 0; j < prior_var.size(); ++j) {
    if (!(prior_var(j) > 0.0) || !std::isfinite(prior_var(j))) {
      throw Error(ErrorKind::InvalidSpec, "GmmState: prior variances must be positive");
    }
  }
}

Eigen::VectorXd as_vector(const PseudoObsVector& y) {
  return Eigen::Map<const Eigen::VectorXd>(y.values.data(), static_cast<Eigen::Index>(y.values.size()));
}

Eigen::VectorXd score(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y) {
  check_dims(beta, design, y);
  const double n = static_cast<double>(design.rows());
  return design.x.transpose() * (y - design.x * beta) / n;
}

Eigen::MatrixXd moment_covariance(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y) {
  check_dims(beta, design, y);
  const double n = static_cast<double>(design.rows());
  const Eigen::VectorXd r = y - design.x * beta;
  const Eigen::VectorXd u_bar = design.x.transpose() * r / n;
  const Eigen::MatrixXd weighted = design.x.array().colwise() * r.array();  // rows are u_i'
  Eigen::MatrixXd sigma = weighted.transpose() * weighted / (n * n) - u_bar * u_bar.transpose() / n;
  return (sigma + sigma.transpose()) / 2.0;
}

namespace {

ObjectiveValue quadratic_form(const Eigen::VectorXd& u, const Eigen::MatrixXd& sigma, double ridge) {
  const auto q = sigma.rows();
  const double base = sigma.trace() / static_cast<double>(q);
  static constexpr double kEps[] = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};
  ObjectiveValue out;
  for (int level = 0; level < 5; ++level) {
    const double load = ridge + kEps[level] * base;
    Eigen::MatrixXd m = sigma;
    m.diagonal().array() += load;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd w = llt.matrixL().solve(u);
    out.value = w.squaredNorm();
    out.ridge = load;
    out.escalations = level;
    if (!std::isfinite(out.value)) continue;
    return out;
  }
  throw Error(ErrorKind::SingularCovariance, "moment covariance is not positive definite at the maximum ridge");
}

}  // namespace

ObjectiveValue evaluate_objective(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y,
                                  double ridge) {
  if (!(ridge >= 0.0)) throw Error(ErrorKind::DomainError, "ridge must be non-negative");
  return quadratic_form(score(beta, design, y), moment_covariance(beta, design, y), ridge);
}

double objective(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y, double ridge) {
  return evaluate_objective(beta, design, y, ridge).value;
}

double pseudo_log_likelihood(const Eigen::VectorXd& beta, const DesignMatrix& design, const Eigen::VectorXd& y) {
  return -0.5 * objective(beta, design, y);
}

double log_prior(const Eigen::VectorXd& beta, const GmmState& state) {
  if (beta.size() != state.prior_mean.size()) throw Error(ErrorKind::DimensionMismatch, "log_prior: size mismatch");
  return -0.5 * ((beta - state.prior_mean).array().square() / state.prior_var.array()).sum();
}

double log_posterior(const Eigen::VectorXd& beta, const GmmState& state, const DesignMatrix& design,
                     const Eigen::VectorXd& y) {
  return pseudo_log_likelihood(beta, design, y) + log_prior(beta, state);
}

Eigen::VectorXd log_posterior_gradient(const Eigen::VectorXd& beta, const GmmState& state, const DesignMatrix& design,
                                       const Eigen::VectorXd& y) {
  Eigen::VectorXd grad(beta.size());
  Eigen::VectorXd b = beta;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::fabs(beta(j)));
    b(j) = beta(j) + h;
    const double up = log_posterior(b, state, design, y);
    b(j) = beta(j) - h;
    const double down = log_posterior(b, state, design, y);
    b(j) = beta(j);
    grad(j) = (up - down) / (2.0 * h);
  }
  return grad;
}

GmmTarget::GmmTarget(DesignMatrix design, Eigen::VectorXd y, GmmState state)
    : design_(std::move(design)), y_(std::move(y)), state_(std::move(state)) {
  state_.validate();
  if (state_.beta.size() != design_.cols() || y_.size() != design_.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "GmmTarget: design, outcome and prior sizes differ");
  }
}

double GmmTarget::operator()(const Eigen::VectorXd& beta) const {
  try {
    const auto q = evaluate_objective(beta, design_, y_);
    if (q.escalations > 0) ridge_activations_.fetch_add(1, std::memory_order_relaxed);
    return -0.5 * q.value + log_prior(beta, state_);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingularCovariance) throw;
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace rmst
