#include "rmst/metrics.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "rmst/error.hpp"
#include "rmst/report.hpp"
#include "rmst/stats.hpp"

namespace rmst {

namespace {

ReplicationReport aggregate_impl(const std::vector<ReplicationResult>& results, double truth, std::size_t min_used) {
  std::vector<double> est, se;
  std::size_t covered = 0;
  for (const auto& r : results) {
    if (!r.converged) continue;
    est.push_back(r.estimate);
    se.push_back(r.se);
    if (r.ci_lower <= truth && truth <= r.ci_upper) ++covered;
  }
  if (est.size() < min_used) {
    throw Error(ErrorKind::TooFewConverged, "aggregate: " + std::to_string(est.size()) + " converged of " +
                                                std::to_string(results.size()) + " replications");
  }
  ReplicationReport rep;
  rep.truth = truth;
  rep.replications_used = static_cast<int>(est.size());
  rep.excluded = static_cast<int>(results.size() - est.size());
  rep.bias = mean(est) - truth;
  rep.ase = mean(se);
  rep.coverage = 100.0 * static_cast<double>(covered) / static_cast<double>(est.size());
  if (est.size() >= 2) {
    rep.ese = sample_sd(est);
    rep.rmse = std::sqrt(rep.ese * rep.ese + rep.bias * rep.bias);
  } else {
    rep.ese_defined = false;
    rep.ese = rep.rmse = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

}  // namespace

ReplicationReport aggregate(const std::vector<ReplicationResult>& results, double truth) {
  return aggregate_impl(results, truth, 2);
}

ReplicationReport aggregate_lenient(const std::vector<ReplicationResult>& results, double truth) {
  return aggregate_impl(results, truth, 1);
}

void write_report_header(std::ostream& out) {
  out << "schema_version,scenario,n,method,parameter,truth,bias,ase,ese,rmse,coverage,replications_used,excluded,"
         "ese_defined\n";
}

void write_report_row(std::ostream& out, const ReplicationReport& r) {
  out << kReportSchemaVersion << ',' << r.scenario << ',' << r.n << ',' << r.method << ',' << r.parameter << ','
      << format_number(r.truth) << ',' << format_number(r.bias) << ',' << format_number(r.ase) << ','
      << (r.ese_defined ? format_number(r.ese) : "NA") << ',' << (r.ese_defined ? format_number(r.rmse) : "NA")
      << ',' << format_number(r.coverage) << ',' << r.replications_used << ',' << r.excluded << ','
      << (r.ese_defined ? "true" : "false") << '\n';
}

}  // namespace rmst
