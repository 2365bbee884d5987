#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "rmst/error.hpp"
#include "rmst/gee.hpp"
#include "rmst/pseudo.hpp"
#include "rmst/sampler.hpp"
#include "rmst/sim.hpp"
#include "rmst/stats.hpp"

using namespace rmst;
using Catch::Matchers::WithinAbs;

namespace {

LogDensity gaussian(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd prec = cov.inverse();
  return [mu, prec](const Eigen::VectorXd& x) { return -0.5 * (x - mu).dot(prec * (x - mu)); };
}

PosteriorDraws draws_from(std::vector<std::vector<double>> chains) {
  PosteriorDraws d;
  d.parameter_names = {"arm"};
  for (const auto& c : chains) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(c.size()), 1);
    for (std::size_t i = 0; i < c.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = c[i];
    d.chains.push_back(m);
  }
  return d;
}

std::vector<std::vector<double>> iid_chains(std::mt19937_64& rng, int chains, int n, double shift_first = 0.0) {
  std::normal_distribution<double> nz(0.0, 1.0);
  std::vector<std::vector<double>> out(chains, std::vector<double>(n));
  for (int c = 0; c < chains; ++c) {
    for (auto& v : out[c]) v = nz(rng) + (c == 0 ? shift_first : 0.0);
  }
  return out;
}

}  // namespace

TEST_CASE("sampler recovers a standard Gaussian", "[sampler][calibration]") {
  SamplerConfig cfg;
  cfg.seed = 42;
  const auto q = 2;
  const PosteriorDraws d = sample_density(gaussian(Eigen::VectorXd::Zero(q), Eigen::MatrixXd::Identity(q, q)),
                                          Eigen::VectorXd::Zero(q), Eigen::MatrixXd::Identity(q, q), {"a", "b"}, cfg);
  REQUIRE(d.num_chains() == 3);
  REQUIRE(d.num_samples() == 1000);
  const PosteriorSummary s = summarize(d);
  for (int j = 0; j < q; ++j) {
    const double mcse = s.parameters[j].sd / std::sqrt(d.ess(j));
    CHECK(std::abs(s.parameters[j].mean) < 3.0 * mcse);
    CHECK(std::abs(s.parameters[j].sd - 1.0) < 0.05);
    CHECK(d.rhat(j) < 1.01);
    CHECK(d.rhat(j) > 1.0 - 1e-3);
    CHECK(d.ess(j) <= 3000.0);
  }
  for (int c = 0; c < 3; ++c) {
    CHECK(d.acceptance_rate(c) > cfg.target_accept - 0.15);
    CHECK(d.acceptance_rate(c) < cfg.target_accept + 0.20);
  }
  CHECK_FALSE(d.divergent_chains);
}

TEST_CASE("sampler reproduces a correlated Gaussian covariance", "[sampler][calibration]") {
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 1.2, 1.2, 1.0;
  Eigen::VectorXd mu(2);
  mu << 1.0, -3.0;
  SamplerConfig cfg;
  cfg.seed = 7;
  // deliberately poor initial proposal shape; warmup has to learn it
  const PosteriorDraws d = sample_density(gaussian(mu, cov), mu, Eigen::MatrixXd::Identity(2, 2) * 0.01, {"a", "b"}, cfg);
  Eigen::MatrixXd all(3000, 2);
  for (int c = 0; c < 3; ++c) all.middleRows(c * 1000, 1000) = d.chains[c];
  const Eigen::RowVectorXd m = all.colwise().mean();
  const Eigen::MatrixXd centred = all.rowwise() - m;
  const Eigen::MatrixXd emp = centred.transpose() * centred / 2999.0;
  CHECK((emp - cov).norm() / cov.norm() < 0.10);
}

TEST_CASE("equal-tailed intervals have nominal coverage on Gaussian targets", "[sampler][calibration]") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nz(0.0, 1.0);
  int covered = 0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    // posterior N(x, 1) after observing x ~ N(0, 1) with a flat prior
    Eigen::VectorXd x(1);
    x << nz(rng);
    SamplerConfig cfg;
    cfg.seed = 1000 + r;
    const PosteriorDraws d = sample_density(gaussian(x, Eigen::MatrixXd::Identity(1, 1)), x,
                                            Eigen::MatrixXd::Identity(1, 1), {"a"}, cfg);
    const auto pooled = d.pooled(0);
    if (quantile_type7(pooled, 0.025) <= 0.0 && 0.0 <= quantile_type7(pooled, 0.975)) ++covered;
  }
  const double pct = 100.0 * covered / reps;
  CHECK(pct >= 92.0);
  CHECK(pct <= 98.0);
}

TEST_CASE("sampler is deterministic and independent of chain threading", "[sampler][determinism]") {
  const auto f = gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  SamplerConfig cfg;
  cfg.seed = 5;
  cfg.warmup = 300;
  cfg.samples = 200;
  const PosteriorDraws a = sample_density(f, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), {"a", "b"}, cfg);
  const PosteriorDraws b = sample_density(f, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), {"a", "b"}, cfg);
  cfg.parallel_chains = false;
  const PosteriorDraws c = sample_density(f, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), {"a", "b"}, cfg);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.chains[k] == b.chains[k]);
    CHECK(a.chains[k] == c.chains[k]);
  }
  CHECK_FALSE(a.chains[0] == a.chains[1]);
}

TEST_CASE("MALA mode also targets the Gaussian", "[sampler][mala]") {
  SamplerConfig cfg;
  cfg.seed = 3;
  cfg.kind = SamplerKind::mala;
  cfg.target_accept = 0.57;
  const PosteriorDraws d = sample_density(gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                                          Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), {"a", "b"}, cfg);
  const PosteriorSummary s = summarize(d);
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(s.parameters[j].mean) < 4.0 * s.parameters[j].sd / std::sqrt(d.ess(j)));
    CHECK(std::abs(s.parameters[j].sd - 1.0) < 0.07);
  }
}

TEST_CASE("sampler configuration and initialisation errors", "[sampler]") {
  SamplerConfig cfg;
  cfg.chains = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SamplerConfig{};
  cfg.warmup = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  const LogDensity nowhere = [](const Eigen::VectorXd&) { return -std::numeric_limits<double>::infinity(); };
  try {
    sample_density(nowhere, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), {"a"}, SamplerConfig{});
    FAIL("expected NonFiniteTarget");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteTarget);
  }
}

TEST_CASE("R-hat and ESS diagnostics", "[sampler][diagnostics]") {
  std::mt19937_64 rng(12);
  int within = 0;
  for (int r = 0; r < 50; ++r) {
    const auto chains = iid_chains(rng, 3, 1000);
    const ParameterDiagnostics dg = diagnose_parameter(chains);
    within += dg.rhat >= 0.99 && dg.rhat <= 1.01;
    CHECK(dg.ess <= 3000.0);
    CHECK(dg.ess > 1500.0);
  }
  CHECK(within >= 45);

  const ParameterDiagnostics shifted = diagnose_parameter(iid_chains(rng, 3, 1000, 10.0));
  CHECK(shifted.rhat > 1.2);

  // AR(1) with phi = 0.9: ESS per draw ~ (1 - phi) / (1 + phi)
  std::normal_distribution<double> nz(0.0, 1.0);
  std::vector<std::vector<double>> ar(4, std::vector<double>(5000));
  for (auto& c : ar) {
    double x = nz(rng) / std::sqrt(1 - 0.81);
    for (auto& v : c) {
      x = 0.9 * x + nz(rng);
      v = x;
    }
  }
  const double ess = diagnose_parameter(ar).ess;
  CHECK(ess > 0.7 * 20000.0 * 0.1 / 1.9);
  CHECK(ess < 1.3 * 20000.0 * 0.1 / 1.9);

  CHECK_THROWS_AS(diagnose_parameter({{1, 2, 3}, {1, 2, 3}}), Error);
  CHECK_THROWS_AS(diagnose_parameter({{1, 2, 3, 4, 5}}), Error);
}

TEST_CASE("summaries and tail probabilities", "[sampler][summary]") {
  const PosteriorDraws d = draws_from({{0.1, 0.2}, {0.3, 0.4}});
  const PosteriorSummary s = summarize(d, {{"delta", 0.25, TailDirection::greater_equal}});
  REQUIRE(s.tail_probabilities.size() == 1);
  CHECK(s.tail_probabilities[0].probability == 0.5);
  CHECK(s.parameters[0].q025 <= s.parameters[0].q50);
  CHECK(s.parameters[0].q50 <= s.parameters[0].q975);

  const PosteriorSummary all = summarize(d, {{"arm", 0.0, parse_direction(">")}});
  CHECK(all.tail_probabilities[0].probability == 1.0);
  CHECK(all.tail_probabilities[0].mc_se == 0.0);

  CHECK_THROWS_AS(summarize(d, {{"nope", 0.0, TailDirection::less}}), Error);
  CHECK(parse_direction("le") == TailDirection::less_equal);
  CHECK(parse_direction("<") == TailDirection::less);
  CHECK_THROWS_AS(parse_direction("=="), Error);

  CHECK_THAT(tail_probability_mcse(0.973, 2918.0), WithinAbs(0.003, 0.0002));
  CHECK_THAT(tail_probability_mcse(0.5, 100.0), WithinAbs(0.05, 1e-15));
}

TEST_CASE("pseudo-posterior on null scenario data agrees with GEE", "[sampler][gmm]") {
  const ScenarioSpec spec = builtin_scenario("1");
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Dataset data = generate(spec, 200, seed);
    const DesignMatrix x = build_design(data, {});
    const Eigen::VectorXd y = as_vector(pseudo_obs(data, 5.0));
    const GeeFit gee = gee_fit(x, y);
    SamplerConfig cfg;
    cfg.seed = seed;
    const PosteriorDraws d = sample(GmmState::normal_prior(2, std::sqrt(10.0)), x, y, cfg);
    const PosteriorSummary s = summarize(d);
    CHECK(std::abs(s.parameters[1].mean - gee.beta_hat(1)) < 3.0 * s.parameters[1].sd);
    // the pseudo-posterior sd tracks the sandwich SE
    CHECK(std::abs(s.parameters[1].sd / gee.se(1) - 1.0) < 0.15);
    CHECK(d.ridge_activations == 0);
    for (int c = 0; c < 3; ++c) {
      CHECK(d.acceptance_rate(c) > cfg.target_accept - 0.15);
      CHECK(d.acceptance_rate(c) < cfg.target_accept + 0.20);
    }
  }
}
