#include "rmst/gee.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "rmst/error.hpp"
#include "rmst/km.hpp"
#include "rmst/stats.hpp"

namespace rmst {

GeeFit gee_fit(const DesignMatrix& design, const Eigen::VectorXd& y, double confidence) {
  const auto n = design.rows();
  const auto q = design.cols();
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "gee_fit: outcome length differs from design rows");
  if (n <= q) throw Error(ErrorKind::RankDeficient, "gee_fit: need more observations than coefficients");
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorKind::DomainError, "confidence must be in (0,1)");
  check_full_rank(design.x);

  const Eigen::MatrixXd xtx = design.x.transpose() * design.x;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::RankDeficient, "gee_fit: X'X is singular");

  GeeFit fit;
  fit.names = design.column_names;
  fit.confidence = confidence;
  fit.beta_hat = ldlt.solve(design.x.transpose() * y);

  const Eigen::VectorXd r = y - design.x * fit.beta_hat;
  const Eigen::MatrixXd weighted = design.x.array().colwise() * r.array();
  const Eigen::MatrixXd meat = weighted.transpose() * weighted;
  const Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  Eigen::MatrixXd cov = bread * meat * bread;
  fit.sandwich_cov = (cov + cov.transpose()) / 2.0;

  const double z = normal_quantile(0.5 + confidence / 2.0);
  fit.se = fit.sandwich_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.ci_lower = fit.beta_hat - z * fit.se;
  fit.ci_upper = fit.beta_hat + z * fit.se;
  return fit;
}

namespace {

struct ArmRmst {
  double rmst = 0.0;
  double variance = 0.0;
};

ArmRmst arm_rmst(const Dataset& arm, double tau) {
  const KmCurve km = km_fit(arm);
  ArmRmst out;
  out.rmst = rmst_from_curve(km, tau);
  // area to the right of each jump, accumulated backwards
  const auto& t = km.jump_times;
  std::size_t last = 0;
  while (last < t.size() && t[last] < tau) ++last;
  double area_after = 0.0;
  for (std::size_t j = last; j-- > 0;) {
    const double next = j + 1 < last ? t[j + 1] : tau;
    area_after += km.survival[j] * (next - t[j]);
    const int n_j = km.at_risk[j], d_j = km.events[j];
    if (n_j > d_j) {
      out.variance += area_after * area_after * d_j / (static_cast<double>(n_j) * (n_j - d_j));
    }
  }
  return out;
}

}  // namespace

RmstDifference km_diff_rmst(const Dataset& data, double tau, double confidence) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "km_diff_rmst: no records");
  if (data.arm_count(0) == 0 || data.arm_count(1) == 0) {
    throw Error(ErrorKind::SingleArm, "km_diff_rmst: both arms must be present");
  }
  const auto a0 = arm_rmst(data.subset_arm(0), tau);
  const auto a1 = arm_rmst(data.subset_arm(1), tau);
  RmstDifference out;
  out.rmst_arm0 = a0.rmst;
  out.rmst_arm1 = a1.rmst;
  out.estimate = a1.rmst - a0.rmst;
  out.se = std::sqrt(a0.variance + a1.variance);
  const double z = normal_quantile(0.5 + confidence / 2.0);
  out.ci_lower = out.estimate - z * out.se;
  out.ci_upper = out.estimate + z * out.se;
  return out;
}

}  // namespace rmst
