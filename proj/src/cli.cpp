#include "rmst/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "rmst/campaign.hpp"
#include "rmst/dataset.hpp"
#include "rmst/gee.hpp"
#include "rmst/km.hpp"
#include "rmst/pseudo.hpp"
#include "rmst/report.hpp"
#include "rmst/seed.hpp"
#include "rmst/sim.hpp"
#include "rmst/stats.hpp"
#include "rmst/tau.hpp"

namespace rmst {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RankDeficient:
    case ErrorKind::SingularCovariance:
    case ErrorKind::NonFiniteTarget:
    case ErrorKind::TooFewDraws:
    case ErrorKind::Unachievable:
      return kExitNumerical;
    case ErrorKind::TooFewConverged:
      return kExitConvergence;
    default:
      return kExitInput;
  }
}

TailRequest parse_tail_request(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(part);
  if (parts.size() != 3) throw Error(ErrorKind::InputError, "--tail-prob expects PARAM,OP,VALUE, got '" + text + "'");
  TailRequest req;
  req.parameter = parts[0];
  req.direction = parse_direction(parts[1]);
  try {
    std::size_t used = 0;
    req.threshold = std::stod(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorKind::InputError, "--tail-prob threshold '" + parts[2] + "' is not a number");
  }
  return req;
}

namespace {

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error(ErrorKind::InputError, "cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

Dataset load_input(const RunConfig& config, std::ostream& log, std::size_t* rejected = nullptr) {
  if (config.input_path.empty()) throw Error(ErrorKind::InputError, "--input is required");
  CsvReadResult read = read_dataset_csv(config.input_path);
  if (read.rejected_rows > 0) log << "warning: dropped " << read.rejected_rows << " rows with missing covariates\n";
  if (rejected) *rejected = read.rejected_rows;
  validate_for_analysis(read.data);
  return std::move(read.data);
}

std::string describe_column(const std::string& name) {
  if (name == "intercept") return "baseline RMST, all covariates at reference";
  if (name == "arm") return "RMST difference, experimental minus control";
  if (name.rfind("arm[", 0) == 0) return "RMST difference within stratum " + name.substr(4, name.size() - 5);
  if (name.rfind("arm:", 0) == 0) return "change in RMST difference per unit of " + name.substr(4);
  return "RMST difference per unit of " + name;
}

const char* encoding_name(InteractionEncoding e) { return e == InteractionEncoding::product ? "product" : "stratified"; }

json sampler_json(const RunConfig& c) {
  return {{"kind", c.sampler.kind == SamplerKind::mala ? "mala" : "random_walk"},
          {"chains", c.sampler.chains},
          {"warmup", c.sampler.warmup},
          {"samples", c.sampler.samples},
          {"seed", c.sampler.seed},
          {"prior_sd", c.prior_sd}};
}

void cmd_fit(const RunConfig& config, std::ostream& log) {
  std::size_t rejected = 0;
  const Dataset data = load_input(config, log, &rejected);
  const double requested = config.tau.value_or(std::numeric_limits<double>::infinity());
  const double tau = resolve_tau(data, requested);

  const RegressionSpec spec = parse_model(data.covariate_names, config.model, config.encoding);
  const DesignMatrix design = build_design(data, spec);
  const PseudoObsVector pseudo = pseudo_obs(data, tau);
  const Eigen::VectorXd y = as_vector(pseudo);
  const GeeFit gee = gee_fit(design, y);

  SamplerConfig sc = config.sampler;
  const GmmState state = GmmState::normal_prior(design.cols(), config.prior_sd);
  const PosteriorDraws draws = sample(state, design, y, sc);
  const PosteriorSummary summary = summarize(draws, config.tail_requests);

  json warnings = json::array();
  if (rejected > 0) warnings.push_back("dropped " + std::to_string(rejected) + " rows with missing covariates");
  if (config.tau && tau < *config.tau) {
    warnings.push_back("tau reduced to the smallest per-arm maximum observed time");
  }
  if (draws.divergent_chains) warnings.push_back("DivergentChains: some R-hat exceeds 1.01");
  if (draws.ridge_activations > 0) warnings.push_back("moment covariance needed a ridge");

  json columns = json::array();
  for (const auto& name : design.column_names) columns.push_back({{"name", name}, {"meaning", describe_column(name)}});

  json report = {{"schema_version", kSchemaVersion},
                 {"command", "fit"},
                 {"n", data.size()},
                 {"events", data.event_count()},
                 {"rows_rejected", rejected},
                 {"tau_requested", json_number(requested)},
                 {"tau", tau},
                 {"model", {{"encoding", encoding_name(config.encoding)}, {"columns", columns}}},
                 {"sampler", sampler_json(config)},
                 {"km_difference", to_json(km_diff_rmst(data, tau))},
                 {"gee", to_json(gee)},
                 {"gmm", to_json(summary, draws)},
                 {"divergent_chains", draws.divergent_chains},
                 {"warnings", warnings}};
  Output out(config.output_path);
  out.stream() << report.dump(2) << '\n';
  for (const auto& w : warnings) log << "warning: " << w.get<std::string>() << '\n';

  if (!config.draws_path.empty()) {
    Output d(config.draws_path);
    write_draws_csv(d.stream(), draws);
  }
}

void cmd_pseudo(const RunConfig& config, std::ostream& log) {
  const Dataset data = load_input(config, log);
  const double tau = resolve_tau(data, config.tau.value_or(std::numeric_limits<double>::infinity()));
  const PseudoObsVector pseudo = pseudo_obs(data, tau, config.pseudo_algorithm);
  Output out(config.output_path);
  auto& os = out.stream();
  os << "schema_version,time,event,arm";
  for (const auto& c : data.covariate_names) os << ',' << c;
  os << ",tau,pseudo\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    std::snprintf(buf, sizeof buf, "%.17g", r.time);
    os << kSchemaVersion << ',' << buf << ',' << (r.event ? 1 : 0) << ',' << r.arm;
    for (double v : r.covariates) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", tau);
    os << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.17g", pseudo.values[i]);
    os << ',' << buf << '\n';
  }
}

ScenarioSpec require_scenario(const RunConfig& config) {
  if (config.scenario.empty()) throw Error(ErrorKind::InputError, "--scenario is required");
  return load_scenario(config.scenario);
}

void cmd_simulate(const RunConfig& config, std::ostream& log) {
  ScenarioSpec spec = require_scenario(config);
  if (!spec.censor_upper) spec.censor_upper = calibrate_censoring(spec);
  const Dataset data = generate(spec, config.n, config.seed);
  log << "scenario " << spec.id << ": uniform censoring bound " << format_number(*spec.censor_upper) << ", "
      << data.size() - data.event_count() << " of " << data.size() << " censored\n";
  Output out(config.output_path);
  write_dataset_csv(out.stream(), data);
}

void cmd_campaign(const RunConfig& config, std::ostream& log) {
  CampaignConfig cc;
  cc.scenario = require_scenario(config);
  cc.n = config.n;
  cc.replications = config.replications;
  cc.seed = config.seed;
  cc.tau = config.tau;
  cc.model = config.model;
  cc.encoding = config.encoding;
  cc.sampler = config.sampler;
  cc.prior_sd = config.prior_sd;
  cc.workers = config.workers;
  cc.run_gmm = config.run_gmm;
  const CampaignResult res = run_campaign(cc);

  log << "scenario " << cc.scenario.id << ": uniform censoring bound " << format_number(res.censor_upper)
      << ", mean censoring " << format_number(res.mean_censoring) << ", tau " << format_number(res.tau)
      << " (reduced in " << res.tau_adjusted << " replications), failed replications " << res.failed_replications
      << ", ridge activations " << res.ridge_activations << '\n';
  if (!res.truth.exact) log << "true delta by Monte Carlo, MC-SE " << format_number(res.truth.delta_mcse) << '\n';
  for (const auto& r : res.reports) {
    if (r.excluded > 0) log << r.method << " " << r.parameter << ": excluded " << r.excluded << " replications\n";
    if (!r.ese_defined) log << r.method << " " << r.parameter << ": ESE undefined with one replication\n";
  }

  Output out(config.output_path);
  write_report_header(out.stream());
  for (const auto& r : res.reports) write_report_row(out.stream(), r);
}

void cmd_tau_scan(const RunConfig& config, std::ostream& log) {
  const Dataset data = load_input(config, log);
  const TauCandidates cands = tau_candidates(data, config.se_limits);
  for (const auto& note : cands.notes) log << "note: " << note << '\n';

  const RegressionSpec spec = parse_model(data.covariate_names, "", config.encoding);
  const DesignMatrix design = build_design(data, spec);
  Output out(config.output_path);
  auto& os = out.stream();
  os << "schema_version,rule,tau,method,estimate,se,lower,upper\n";
  auto row = [&](const TauCandidate& c, const char* method, double est, double se, double lo, double hi) {
    os << kSchemaVersion << ',' << c.rule << ',' << format_number(c.tau) << ',' << method << ','
       << format_number(est) << ',' << format_number(se) << ',' << format_number(lo) << ',' << format_number(hi)
       << '\n';
  };
  for (std::size_t k = 0; k < cands.candidates.size(); ++k) {
    const auto& c = cands.candidates[k];
    const RmstDifference km = km_diff_rmst(data, c.tau);
    row(c, "KM", km.estimate, km.se, km.ci_lower, km.ci_upper);
    const Eigen::VectorXd y = as_vector(pseudo_obs(data, c.tau));
    const GeeFit gee = gee_fit(design, y);
    row(c, "GEE", gee.beta_hat(1), gee.se(1), gee.ci_lower(1), gee.ci_upper(1));
    if (config.run_gmm) {
      SamplerConfig sc = config.sampler;
      sc.seed = derive_seed(config.sampler.seed, k);
      const PosteriorDraws draws = sample(GmmState::normal_prior(design.cols(), config.prior_sd), design, y, sc);
      const PosteriorSummary s = summarize(draws);
      row(c, "BayesGMM", s.parameters[1].mean, s.parameters[1].sd, s.parameters[1].q025, s.parameters[1].q975);
      if (draws.divergent_chains) log << "warning: DivergentChains at rule " << c.rule << '\n';
    }
  }
}

}  // namespace

void run(const RunConfig& config, std::ostream& log) {
  switch (config.command) {
    case Command::fit: return cmd_fit(config, log);
    case Command::pseudo: return cmd_pseudo(config, log);
    case Command::simulate: return cmd_simulate(config, log);
    case Command::campaign: return cmd_campaign(config, log);
    case Command::tau_scan: return cmd_tau_scan(config, log);
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Bayesian GMM estimation of restricted mean survival time differences"};
  app.require_subcommand(1);

  RunConfig config;
  std::optional<double> tau;
  std::vector<std::string> tails;
  std::string encode = "product", kind = "rwm", algorithm = "fast";
  std::optional<int> workers;
  bool skip_gmm = false;

  auto sampler_opts = [&](CLI::App* sub) {
    sub->add_option("--chains", config.sampler.chains, "MCMC chains")->capture_default_str();
    sub->add_option("--warmup", config.sampler.warmup, "warmup iterations per chain")->capture_default_str();
    sub->add_option("--samples", config.sampler.samples, "post-warmup draws per chain")->capture_default_str();
    sub->add_option("--sampler", kind, "rwm or mala")->check(CLI::IsMember({"rwm", "mala"}))->capture_default_str();
    sub->add_option("--prior-sd", config.prior_sd, "prior sd of every coefficient")->capture_default_str();
  };
  auto common = [&](CLI::App* sub) {
    sub->add_option("--output", config.output_path, "output file (default stdout)");
    sub->add_option("--seed", config.seed, "master seed")->capture_default_str();
  };

  auto* fit = app.add_subcommand("fit", "fit GEE and Bayesian GMM to a dataset");
  fit->add_option("--input", config.input_path, "dataset CSV")->required();
  fit->add_option("--tau", tau, "restriction time");
  fit->add_option("--model", config.model, "covariates, e.g. Z1,Z2 or A*E");
  fit->add_option("--encode", encode, "interaction encoding")->check(CLI::IsMember({"product", "stratified"}));
  fit->add_option("--tail-prob", tails, "PARAM,OP,VALUE (repeatable)");
  fit->add_option("--draws", config.draws_path, "write posterior draws CSV");
  sampler_opts(fit);
  common(fit);

  auto* pseudo = app.add_subcommand("pseudo", "write jackknife pseudo-observations");
  pseudo->add_option("--input", config.input_path, "dataset CSV")->required();
  pseudo->add_option("--tau", tau, "restriction time");
  pseudo->add_option("--algorithm", algorithm, "fast or naive")->check(CLI::IsMember({"fast", "naive"}));
  common(pseudo);

  auto* simulate = app.add_subcommand("simulate", "generate one dataset from a scenario");
  simulate->add_option("--scenario", config.scenario, "builtin id or JSON path")->required();
  simulate->add_option("--n", config.n, "sample size")->capture_default_str();
  common(simulate);

  auto* campaign = app.add_subcommand("campaign", "replication study over a scenario");
  campaign->add_option("--scenario", config.scenario, "builtin id or JSON path")->required();
  campaign->add_option("--n", config.n, "sample size")->capture_default_str();
  campaign->add_option("--replications", config.replications, "replications")->capture_default_str();
  campaign->add_option("--workers", workers, "worker threads (default $RMST_BGMM_WORKERS or 1)");
  campaign->add_option("--tau", tau, "restriction time (default: scenario tau)");
  campaign->add_option("--model", config.model, "covariates, e.g. Z1,Z2 or A*E");
  campaign->add_option("--encode", encode, "interaction encoding")->check(CLI::IsMember({"product", "stratified"}));
  campaign->add_flag("--skip-gmm", skip_gmm, "run only the frequentist benchmarks");
  sampler_opts(campaign);
  common(campaign);

  auto* scan = app.add_subcommand("tau-scan", "unadjusted estimates over data-driven restriction times");
  scan->add_option("--input", config.input_path, "dataset CSV")->required();
  scan->add_option("--se-limits", config.se_limits, "Greenwood SE limits")->delimiter(',');
  scan->add_flag("--skip-gmm", skip_gmm, "run only the frequentist benchmarks");
  sampler_opts(scan);
  common(scan);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (fit->parsed()) config.command = Command::fit;
    if (pseudo->parsed()) config.command = Command::pseudo;
    if (simulate->parsed()) config.command = Command::simulate;
    if (campaign->parsed()) config.command = Command::campaign;
    if (scan->parsed()) config.command = Command::tau_scan;

    config.tau = tau;
    config.encoding = encode == "stratified" ? InteractionEncoding::stratified : InteractionEncoding::product;
    config.sampler.kind = kind == "mala" ? SamplerKind::mala : SamplerKind::random_walk;
    config.sampler.seed = config.seed;
    config.pseudo_algorithm = algorithm == "naive" ? PseudoAlgorithm::naive : PseudoAlgorithm::fast;
    config.run_gmm = !skip_gmm;
    for (const auto& t : tails) config.tail_requests.push_back(parse_tail_request(t));
    if (workers) {
      config.workers = *workers;
    } else if (const char* env = std::getenv("RMST_BGMM_WORKERS")) {
      try {
        config.workers = std::stoi(env);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InputError, std::string("RMST_BGMM_WORKERS is not an integer: ") + env);
      }
    }
    if (config.workers < 1) throw Error(ErrorKind::InputError, "workers must be at least 1");
    if (config.tau && !(*config.tau > 0.0)) throw Error(ErrorKind::InputError, "--tau must be positive");
    if (!(config.prior_sd > 0.0)) throw Error(ErrorKind::InputError, "--prior-sd must be positive");
    config.sampler.validate();

    run(config, std::cerr);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace rmst
