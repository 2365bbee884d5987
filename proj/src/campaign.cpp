#include "rmst/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "rmst/error.hpp"
#include "rmst/gee.hpp"
#include "rmst/pseudo.hpp"
#include "rmst/seed.hpp"
#include "rmst/stats.hpp"
#include "rmst/tau.hpp"

namespace rmst {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_treatment(const std::string& s) { return s == "A" || s == "arm"; }

int require_covariate(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::InputError, "model term '" + name + "' is not a covariate column");
  return static_cast<int>(it - names.begin());
}

}  // namespace

RegressionSpec parse_model(const std::vector<std::string>& covariate_names, const std::string& model,
                           InteractionEncoding encoding) {
  RegressionSpec spec;
  spec.encoding = encoding;
  auto add_main = [&](int k) {
    if (std::find(spec.covariate_indices.begin(), spec.covariate_indices.end(), k) == spec.covariate_indices.end()) {
      spec.covariate_indices.push_back(k);
    }
  };
  std::stringstream ss(model);
  std::string term;
  while (std::getline(ss, term, ',')) {
    term = trim(term);
    if (term.empty() || is_treatment(term)) continue;
    const auto star = term.find('*');
    if (star == std::string::npos) {
      add_main(require_covariate(covariate_names, term));
      continue;
    }
    std::string lhs = trim(term.substr(0, star)), rhs = trim(term.substr(star + 1));
    if (is_treatment(rhs)) std::swap(lhs, rhs);
    if (!is_treatment(lhs)) throw Error(ErrorKind::InputError, "only treatment interactions are supported: '" + term + "'");
    const int k = require_covariate(covariate_names, rhs);
    add_main(k);
    if (std::find(spec.interactions.begin(), spec.interactions.end(), k) == spec.interactions.end()) {
      spec.interactions.push_back(k);
    }
  }
  return spec;
}

namespace {

struct ReplicationOutcome {
  bool failed = false;
  bool tau_adjusted = false;
  double censoring = 0.0;
  long ridge = 0;
  ReplicationResult km;
  std::vector<ReplicationResult> gee, gmm;
};

std::vector<ParameterTruth> target_parameters(const ScenarioSpec& spec, const TrueValues& truth,
                                              const DesignMatrix& design) {
  std::vector<ParameterTruth> out;
  const auto has = [&](const std::string& c) {
    return std::find(design.column_names.begin(), design.column_names.end(), c) != design.column_names.end();
  };
  if (has("arm")) {
    // With a product interaction the arm coefficient is the effect at E = 0.
    const bool product_interaction = spec.interaction && truth.strata && has("arm:" + spec.interaction->covariate);
    out.push_back({"arm", product_interaction ? truth.strata->delta_minus : truth.delta});
  }
  if (spec.interaction && truth.strata) {
    const std::string& e = spec.interaction->covariate;
    if (has(e)) out.push_back({e, truth.strata->beta1});
    if (has("arm[" + e + "=0]")) out.push_back({"arm[" + e + "=0]", truth.strata->delta_minus});
    if (has("arm[" + e + "=1]")) out.push_back({"arm[" + e + "=1]", truth.strata->delta_plus});
    if (has("arm:" + e)) out.push_back({"arm:" + e, truth.strata->delta_plus - truth.strata->delta_minus});
  }
  return out;
}

int column_of(const DesignMatrix& design, const std::string& name) {
  const auto it = std::find(design.column_names.begin(), design.column_names.end(), name);
  return static_cast<int>(it - design.column_names.begin());
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& config) {
  config.scenario.validate();
  config.sampler.validate();
  if (config.replications < 1) throw Error(ErrorKind::InputError, "replications must be at least 1");
  if (config.workers < 1) throw Error(ErrorKind::InputError, "workers must be at least 1");
  if (config.n < 4) throw Error(ErrorKind::InputError, "n must be at least 4");

  CampaignResult result;
  ScenarioSpec spec = config.scenario;
  if (!spec.censor_upper) spec.censor_upper = calibrate_censoring(spec);
  result.censor_upper = *spec.censor_upper;
  result.tau = config.tau.value_or(spec.tau);
  result.truth = true_values(spec, result.tau);

  std::vector<std::string> names;
  for (const auto& g : spec.covariates) names.push_back(g.name);
  const RegressionSpec model = parse_model(names, config.model, config.encoding);

  // Column layout from a throwaway dataset; design columns depend only on the spec.
  const DesignMatrix layout = build_design(generate(spec, config.n, config.seed), model);
  result.targets = target_parameters(spec, result.truth, layout);
  std::vector<int> target_columns;
  for (const auto& t : result.targets) target_columns.push_back(column_of(layout, t.parameter));

  const int reps = config.replications;
  std::vector<ReplicationOutcome> outcomes(reps);

  auto run_one = [&](int r) {
    ReplicationOutcome& out = outcomes[r];
    const std::uint64_t data_seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    try {
      const Dataset data = generate(spec, config.n, data_seed);
      std::size_t censored = data.size() - data.event_count();
      out.censoring = static_cast<double>(censored) / static_cast<double>(data.size());
      validate_for_analysis(data);
      const double tau = resolve_tau(data, result.tau);
      out.tau_adjusted = tau < result.tau;

      const RmstDifference km = km_diff_rmst(data, tau);
      out.km = {km.estimate, km.se, km.ci_lower, km.ci_upper, true};

      const DesignMatrix design = build_design(data, model);
      const Eigen::VectorXd y = as_vector(pseudo_obs(data, tau));
      const GeeFit gee = gee_fit(design, y);
      for (int c : target_columns) out.gee.push_back({gee.beta_hat(c), gee.se(c), gee.ci_lower(c), gee.ci_upper(c), true});

      if (config.run_gmm) {
        SamplerConfig sc = config.sampler;
        sc.seed = derive_seed(data_seed, 0x6A11);
        sc.parallel_chains = false;
        const GmmState state = GmmState::normal_prior(design.cols(), config.prior_sd);
        const PosteriorDraws draws = sample(state, design, y, sc);
        out.ridge = draws.ridge_activations;
        for (int c : target_columns) {
          const auto pooled = draws.pooled(c);
          out.gmm.push_back({mean(pooled), sample_sd(pooled), quantile_type7(pooled, 0.025),
                             quantile_type7(pooled, 0.975), !draws.divergent_chains});
        }
      }
    } catch (const Error&) {
      out.failed = true;
      out.km.converged = false;
      out.gee.assign(target_columns.size(), ReplicationResult{0, 0, 0, 0, false});
      out.gmm.assign(target_columns.size(), ReplicationResult{0, 0, 0, 0, false});
    }
  };

  const int workers = std::min(config.workers, reps);
  if (workers == 1) {
    for (int r = 0; r < reps; ++r) run_one(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next++; r < reps; r = next++) run_one(r);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<ReplicationResult> km;
  std::vector<std::vector<ReplicationResult>> gee(target_columns.size()), gmm(target_columns.size());
  double censoring = 0.0;
  for (const auto& o : outcomes) {
    if (o.failed) ++result.failed_replications;
    if (o.tau_adjusted) ++result.tau_adjusted;
    censoring += o.censoring;
    result.ridge_activations += o.ridge;
    km.push_back(o.km);
    for (std::size_t t = 0; t < target_columns.size(); ++t) {
      gee[t].push_back(o.gee[t]);
      if (config.run_gmm) gmm[t].push_back(o.gmm[t]);
    }
  }
  result.mean_censoring = censoring / reps;

  auto label = [&](ReplicationReport rep, const std::string& method, const std::string& parameter) {
    rep.method = method;
    rep.parameter = parameter;
    rep.scenario = spec.id;
    rep.n = config.n;
    return rep;
  };
  // KM-diff targets the marginal effect regardless of the model.
  result.reports.push_back(label(aggregate_lenient(km, result.truth.delta), "KM", "delta"));
  for (std::size_t t = 0; t < target_columns.size(); ++t) {
    const auto& tgt = result.targets[t];
    const std::string param = tgt.parameter == "arm" ? "delta" : tgt.parameter;
    result.reports.push_back(label(aggregate_lenient(gee[t], tgt.value), "GEE", param));
    if (config.run_gmm) result.reports.push_back(label(aggregate_lenient(gmm[t], tgt.value), "BayesGMM", param));
  }
  return result;
}

}  // namespace rmst
