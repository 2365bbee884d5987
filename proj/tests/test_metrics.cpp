#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rmst/error.hpp"
#include "rmst/metrics.hpp"

using namespace rmst;
using Catch::Matchers::WithinAbs;

TEST_CASE("aggregate on hand examples", "[metrics]") {
  const ReplicationReport r = aggregate({{0.9, 0.1, 0.7, 1.1, true}, {1.1, 0.1, 0.9, 1.3, true}}, 1.0);
  CHECK_THAT(r.bias, WithinAbs(0.0, 1e-15));
  CHECK_THAT(r.ese, WithinAbs(std::sqrt(0.02), 1e-15));
  CHECK_THAT(r.rmse, WithinAbs(std::sqrt(0.02), 1e-15));
  CHECK(r.coverage == 100.0);
  CHECK(r.replications_used == 2);

  const ReplicationReport same = aggregate({{1.0, 0.2, 0.6, 1.4, true}, {1.0, 0.2, 0.6, 1.4, true}}, 1.0);
  CHECK(same.bias == 0.0);
  CHECK(same.ese == 0.0);
  CHECK_THAT(same.ase, WithinAbs(0.2, 1e-15));
  CHECK(same.rmse == 0.0);

  // truth on a bound counts as covered
  const ReplicationReport edge = aggregate({{1.0, 0.2, 1.0, 1.4, true}, {1.0, 0.2, 0.5, 0.9, true}}, 1.0);
  CHECK(edge.coverage == 50.0);
}

TEST_CASE("aggregate excludes non-converged results", "[metrics]") {
  std::vector<ReplicationResult> rs{{1.0, 0.1, 0.8, 1.2, true}, {5.0, 0.1, 4.8, 5.2, false}, {1.2, 0.1, 1.0, 1.4, true}};
  const ReplicationReport r = aggregate(rs, 1.0);
  CHECK(r.replications_used == 2);
  CHECK(r.excluded == 1);
  CHECK_THAT(r.bias, WithinAbs(0.1, 1e-15));

  try {
    aggregate({{1.0, 0.1, 0.8, 1.2, true}, {1.0, 0.1, 0.8, 1.2, false}}, 1.0);
    FAIL("expected TooFewConverged");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewConverged);
  }
  const ReplicationReport one = aggregate_lenient({{1.3, 0.1, 0.8, 1.2, true}}, 1.0);
  CHECK_FALSE(one.ese_defined);
  CHECK(std::isnan(one.ese));
  CHECK_THAT(one.bias, WithinAbs(0.3, 1e-15));
  std::ostringstream os;
  write_report_row(os, one);
  CHECK(os.str().find(",NA,NA,") != std::string::npos);
}

TEST_CASE("aggregate invariants on random results", "[metrics][property]") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nz(0.0, 1.0);
  std::bernoulli_distribution conv(0.9);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<ReplicationResult> rs;
    for (int k = 0; k < 30; ++k) {
      const double e = nz(rng), s = 0.5 + std::abs(nz(rng));
      rs.push_back({e, s, e - 1.96 * s, e + 1.96 * s, k < 3 || conv(rng)});
    }
    const double truth = 0.1 * nz(rng);
    const ReplicationReport r = aggregate(rs, truth);
    CHECK_THAT(r.rmse * r.rmse, WithinAbs(r.ese * r.ese + r.bias * r.bias, 1e-10));
    CHECK(r.coverage >= 0.0);
    CHECK(r.coverage <= 100.0);
    const int excluded = static_cast<int>(std::count_if(rs.begin(), rs.end(), [](auto& x) { return !x.converged; }));
    CHECK(r.replications_used == 30 - excluded);
    std::shuffle(rs.begin(), rs.end(), rng);
    const ReplicationReport p = aggregate(rs, truth);
    CHECK_THAT(p.bias, WithinAbs(r.bias, 1e-12));
    CHECK_THAT(p.ese, WithinAbs(r.ese, 1e-12));
    CHECK(p.coverage == r.coverage);
  }
}
