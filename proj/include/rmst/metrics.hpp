#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rmst {

struct ReplicationResult {
  double estimate = 0.0;
  double se = 0.0;  // frequentist SE or posterior sd
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool converged = true;
};

struct ReplicationReport {
  std::string method;
  std::string scenario;
  std::string parameter = "delta";
  int n = 0;
  double truth = 0.0;
  int replications_used = 0;
  int excluded = 0;  // non-converged results dropped before aggregation
  double bias = 0.0;
  double ase = 0.0;
  double ese = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;  // percent
  bool ese_defined = true;
};

// Drops non-converged results, then bias = mean - truth, ASE = mean(se),
// ESE = sample sd (n - 1), RMSE = sqrt(ESE^2 + bias^2) and coverage = percent
// of closed intervals containing truth. Throws TooFewConverged below two
// converged results.
ReplicationReport aggregate(const std::vector<ReplicationResult>& results, double truth);

// Like aggregate, but a single converged result yields a report with ESE and
// RMSE flagged undefined instead of an error.
ReplicationReport aggregate_lenient(const std::vector<ReplicationResult>& results, double truth);

inline constexpr int kReportSchemaVersion = 1;

void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const ReplicationReport& report);

}  // namespace rmst
