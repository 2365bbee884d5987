#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "rmst/dataset.hpp"
#include "rmst/error.hpp"
#include "rmst/km.hpp"
#include "rmst/pseudo.hpp"
#include "rmst/tau.hpp"
#include "support/oracles.hpp"

using namespace rmst;
using Catch::Matchers::WithinAbs;

namespace {

Dataset make(std::vector<double> t, std::vector<int> e, std::vector<int> arm = {}) {
  Dataset d;
  for (std::size_t i = 0; i < t.size(); ++i) {
    SurvivalRecord r;
    r.time = t[i];
    r.event = e[i] != 0;
    r.arm = arm.empty() ? static_cast<int>(i % 2) : arm[i];
    d.records.push_back(r);
  }
  return d;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected rmst::Error");
  return ErrorKind::InputError;
}

}  // namespace

TEST_CASE("km_fit on small hand-checked samples", "[km]") {
  SECTION("all events") {
    const KmCurve km = km_fit(make({1, 2, 3}, {1, 1, 1}));
    REQUIRE(km.jump_times == std::vector<double>{1, 2, 3});
    CHECK_THAT(km.survival[0], WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(km.survival[1], WithinAbs(1.0 / 3.0, 1e-15));
    CHECK(km.survival[2] == 0.0);
    CHECK(km.at_risk == std::vector<int>{3, 2, 1});
  }
  SECTION("first time censored") {
    const KmCurve km = km_fit(make({1, 2, 3}, {0, 1, 1}));
    REQUIRE(km.jump_times == std::vector<double>{2, 3});
    CHECK_THAT(km.survival[0], WithinAbs(0.5, 1e-15));
    CHECK(km.survival[1] == 0.0);
  }
  SECTION("single event") {
    const KmCurve km = km_fit(make({4}, {1}));
    REQUIRE(km.jump_times == std::vector<double>{4});
    CHECK(km.survival[0] == 0.0);
  }
  SECTION("censoring tied with an event stays at risk") {
    const KmCurve km = km_fit(make({2, 2, 3, 4}, {1, 0, 1, 0}));
    CHECK(km.at_risk[0] == 4);
    CHECK_THAT(km.survival[0], WithinAbs(0.75, 1e-15));
    CHECK_THAT(km.survival[1], WithinAbs(0.75 * 0.5, 1e-15));
  }
  SECTION("flat before the first jump and after the last time") {
    const KmCurve km = km_fit(make({1, 2, 5}, {1, 1, 0}));
    CHECK(km.survival_at(0.5) == 1.0);
    CHECK_THAT(km.survival_at(100.0), WithinAbs(1.0 / 3.0, 1e-15));
    CHECK(km.covers(5.0));
    CHECK_FALSE(km.covers(5.5));
  }
  SECTION("empty dataset") { CHECK(kind_of([] { km_fit(Dataset{}); }) == ErrorKind::EmptyDataset); }
}

TEST_CASE("Greenwood standard errors match the direct formula", "[km]") {
  const std::vector<double> t{1, 2, 2, 3, 4, 5, 6, 7};
  const std::vector<int> e{1, 1, 0, 1, 0, 1, 1, 0};
  const KmCurve km = km_fit(make(t, e));
  double s = 1.0, g = 0.0;
  std::size_t j = 0;
  for (double u : {1.0, 2.0, 3.0, 5.0, 6.0}) {
    int y = 0, d = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      y += t[i] >= u;
      d += t[i] == u && e[i];
    }
    s *= 1.0 - static_cast<double>(d) / y;
    if (y > d) g += static_cast<double>(d) / (static_cast<double>(y) * (y - d));
    CHECK_THAT(km.survival[j], WithinAbs(s, 1e-15));
    if (s > 0) CHECK_THAT(km.se[j], WithinAbs(s * std::sqrt(g), 1e-14));
    ++j;
  }
}

TEST_CASE("rmst_from_curve integrates the step function exactly", "[km]") {
  const KmCurve km = km_fit(make({1, 2, 3}, {1, 1, 1}));
  CHECK_THAT(rmst_from_curve(km, 2.5), WithinAbs(11.0 / 6.0, 1e-15));
  CHECK(rmst_from_curve(km, 0.7) == 0.7);
  CHECK(rmst_from_curve(km_fit(make({1}, {1})), 5.0) == 1.0);
  CHECK(kind_of([&] { rmst_from_curve(km, 0.0); }) == ErrorKind::DomainError);
}

TEST_CASE("KM properties on random samples", "[km][property]") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const Dataset d = oracle::random_dataset(rng, 5 + rep, 0.4, rep % 2 == 0);
    const KmCurve km = km_fit(d);
    for (std::size_t j = 0; j < km.survival.size(); ++j) {
      CHECK(km.survival[j] >= 0.0);
      CHECK(km.survival[j] <= 1.0);
      if (j > 0) {
        CHECK(km.survival[j] <= km.survival[j - 1]);
        CHECK(km.at_risk[j] < km.at_risk[j - 1]);
        CHECK(km.jump_times[j] > km.jump_times[j - 1]);
      }
    }
    std::vector<double> t;
    std::vector<int> e;
    oracle::unpack(d, t, e);
    double prev = 0.0;
    for (double tau : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 20.0}) {
      const double r = rmst_from_curve(km, tau);
      CHECK(r <= tau);
      CHECK(r >= prev);
      CHECK_THAT(r, WithinAbs(oracle::km_area(t, e, tau), 1e-12));
      prev = r;
    }
  }
}

TEST_CASE("pseudo-observations on hand examples", "[pseudo]") {
  const PseudoObsVector p = pseudo_obs(make({1, 2, 3}, {1, 1, 1}), 2.5);
  REQUIRE(p.values.size() == 3);
  CHECK_THAT(p.values[0], WithinAbs(1.0, 1e-12));
  CHECK_THAT(p.values[1], WithinAbs(2.0, 1e-12));
  CHECK_THAT(p.values[2], WithinAbs(2.5, 1e-12));

  const Dataset c = make({1, 2, 3}, {0, 1, 1});
  const auto expected = oracle::pseudo_values({1, 2, 3}, {0, 1, 1}, 3.0);
  for (auto alg : {PseudoAlgorithm::naive, PseudoAlgorithm::fast}) {
    const PseudoObsVector q = pseudo_obs(c, 3.0, alg);
    for (int i = 0; i < 3; ++i) CHECK_THAT(q.values[i], WithinAbs(expected[i], 1e-10));
  }
}

TEST_CASE("pseudo_obs rejects degenerate input", "[pseudo]") {
  CHECK(kind_of([] { pseudo_obs(Dataset{}, 1.0); }) == ErrorKind::EmptyDataset);
  CHECK(kind_of([] { pseudo_obs(make({1}, {1}), 1.0); }) == ErrorKind::EmptyDataset);
  CHECK(kind_of([] { pseudo_obs(make({1, 2}, {0, 0}), 1.0); }) == ErrorKind::InsufficientEvents);
  CHECK(kind_of([] { pseudo_obs(make({1, 2}, {1, 0}), -1.0); }) == ErrorKind::DomainError);
}

TEST_CASE("pseudo-observation identities on random samples", "[pseudo][property]") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 2 + rep * 3;
    const bool ties = rep % 3 == 0;
    const Dataset d = oracle::random_dataset(rng, n, rep % 4 == 0 ? 0.0 : 0.35, ties);
    std::vector<double> t;
    std::vector<int> e;
    oracle::unpack(d, t, e);
    const double tau = 0.5 + (rep % 7);

    const PseudoObsVector fast = pseudo_obs(d, tau, PseudoAlgorithm::fast);
    const PseudoObsVector naive = pseudo_obs(d, tau, PseudoAlgorithm::naive);
    const auto expected = oracle::pseudo_values(t, e, tau);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK_THAT(fast.values[i], WithinAbs(expected[i], 1e-9));
      CHECK_THAT(naive.values[i], WithinAbs(fast.values[i], 1e-10));
      sum += fast.values[i];
    }
    CHECK_THAT(sum / n, WithinAbs(rmst_from_curve(km_fit(d), tau), 1e-10));
    if (d.event_count() == d.size()) {
      for (int i = 0; i < n; ++i) CHECK_THAT(fast.values[i], WithinAbs(std::min(t[i], tau), 1e-10));
    }
  }
}

TEST_CASE("resolve_tau keeps tau inside both arms", "[tau]") {
  auto arms = [](double a, double b) { return make({1.0, a, 0.5, b}, {1, 0, 1, 0}, {0, 0, 1, 1}); };
  CHECK(resolve_tau(arms(6.2, 7.9), 5.0) == 5.0);
  CHECK(resolve_tau(arms(4.2, 6.0), 5.0) == 4.2);
  CHECK(resolve_tau(arms(4.9, 4.8), 5.0) == 4.8);
  CHECK(kind_of([] { resolve_tau(make({1, 2}, {1, 1}, {0, 0}), 5.0); }) == ErrorKind::SingleArm);
}

TEST_CASE("tau_candidates rules", "[tau]") {
  std::vector<double> t;
  std::vector<int> e;
  for (int k = 1; k <= 10; ++k) {
    t.push_back(k);
    e.push_back(1);
  }
  const Dataset d = make(t, e);
  const TauCandidates c = tau_candidates(d, {0.05, 0.2});
  REQUIRE(c.candidates.front().rule == "percentile90");
  CHECK_THAT(c.candidates.front().tau, WithinAbs(9.1, 1e-12));
  CHECK(c.candidates.back().rule == "min_arm_max");
  CHECK(c.candidates.back().tau == resolve_tau(d, std::numeric_limits<double>::infinity()));

  // Greenwood SE after the first event is sqrt(0.9 * 0.1 / 10) ~ 0.095.
  bool saw_005_note = false;
  for (const auto& n : c.notes) saw_005_note |= n.find("se_below_0.05") != std::string::npos;
  CHECK(saw_005_note);

  const KmCurve km = km_fit(d);
  for (const auto& cand : c.candidates) {
    if (cand.rule != "se_below_0.2") continue;
    // largest jump time whose SE is below the limit, all earlier jumps too
    for (std::size_t j = 0; j < km.jump_times.size() && km.jump_times[j] <= cand.tau; ++j) CHECK(km.se[j] < 0.2);
  }
}

TEST_CASE("tau_candidates on a larger follow-up sample spans the data", "[tau]") {
  std::mt19937_64 rng(5);
  const Dataset d = oracle::random_dataset(rng, 345, 0.24, false);
  const TauCandidates c = tau_candidates(d, {0.05, 0.075});
  CHECK(c.candidates.size() == 4);
  for (const auto& cand : c.candidates) {
    CHECK(cand.tau > 0.0);
    CHECK(cand.tau <= d.max_time_in_arm(0) + d.max_time_in_arm(1));
  }
}

TEST_CASE("dataset CSV round trip and missing-cell rejection", "[csv]") {
  std::istringstream in(
      "\xEF\xBB\xBFtime,event,arm,\"Z1\",Z2\n"
      "1.5,1,0,0.2,1\n"
      "2.5,0,1,NA,0\n"
      "3.0,1,1,,1\n"
      "0.7,1,1,-1.5,0\n");
  const CsvReadResult r = read_dataset_csv(in);
  CHECK(r.rejected_rows == 2);
  REQUIRE(r.data.size() == 2);
  CHECK(r.data.covariate_names == std::vector<std::string>{"Z1", "Z2"});
  CHECK(r.data.records[1].covariates[0] == -1.5);

  std::ostringstream out;
  write_dataset_csv(out, r.data);
  std::istringstream back(out.str());
  const CsvReadResult r2 = read_dataset_csv(back);
  REQUIRE(r2.data.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(r2.data.records[i].time == r.data.records[i].time);
    CHECK(r2.data.records[i].covariates == r.data.records[i].covariates);
  }

  std::istringstream bad("time,event\n1,1\n");
  CHECK(kind_of([&] { read_dataset_csv(bad); }) == ErrorKind::InputError);
  std::istringstream bad_event("time,event,arm\n1,2,0\n");
  CHECK(kind_of([&] { read_dataset_csv(bad_event); }) == ErrorKind::InputError);
  std::istringstream neg("time,event,arm\n-1,1,0\n");
  CHECK(kind_of([&] { read_dataset_csv(neg); }) == ErrorKind::InputError);
}

TEST_CASE("analysis validation requires two events", "[dataset]") {
  CHECK(kind_of([] { validate_for_analysis(make({1, 2}, {1, 0})); }) == ErrorKind::InsufficientEvents);
  CHECK(kind_of([] { validate_for_analysis(Dataset{}); }) == ErrorKind::EmptyDataset);
  Dataset d = make({1, 2}, {1, 1});
  d.covariate_names = {"Z"};
  CHECK(kind_of([&] { validate_for_analysis(d); }) == ErrorKind::InvalidSpec);
}
