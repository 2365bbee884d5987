#include "rmst/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rmst/error.hpp"
#include "rmst/specfun.hpp"
#include "rmst/stats.hpp"

namespace rmst {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidSpec, what);
}

double draw_covariate(const CovariateGenerator& g, std::mt19937_64& rng) {
  switch (g.kind) {
    case CovariateKind::normal: return std::normal_distribution<double>(g.param1, std::sqrt(g.param2))(rng);
    case CovariateKind::bernoulli: return std::bernoulli_distribution(g.param1)(rng) ? 1.0 : 0.0;
    case CovariateKind::uniform: return std::uniform_real_distribution<double>(g.param1, g.param2)(rng);
  }
  return 0.0;
}

double covariate_mean(const CovariateGenerator& g) {
  switch (g.kind) {
    case CovariateKind::normal: return g.param1;
    case CovariateKind::bernoulli: return g.param1;
    case CovariateKind::uniform: return 0.5 * (g.param1 + g.param2);
  }
  return 0.0;
}

// U in (0, 1]
double open_uniform(std::mt19937_64& rng) {
  return 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double weibull_time(double sigma, double lambda, std::mt19937_64& rng) {
  return std::pow(-std::log(open_uniform(rng)), sigma) / lambda;
}

std::string kind_name(CovariateKind k) {
  switch (k) {
    case CovariateKind::normal: return "normal";
    case CovariateKind::bernoulli: return "bernoulli";
    case CovariateKind::uniform: return "uniform";
  }
  return "";
}

std::string role_name(CovariateRole r) {
  switch (r) {
    case CovariateRole::prognostic: return "prognostic";
    case CovariateRole::nuisance: return "nuisance";
    case CovariateRole::effect_modifier: return "effect_modifier";
  }
  return "";
}

CovariateKind parse_kind(const std::string& s) {
  if (s == "normal") return CovariateKind::normal;
  if (s == "bernoulli") return CovariateKind::bernoulli;
  if (s == "uniform") return CovariateKind::uniform;
  throw Error(ErrorKind::InvalidSpec, "unknown covariate distribution '" + s + "'");
}

CovariateRole parse_role(const std::string& s) {
  if (s == "prognostic") return CovariateRole::prognostic;
  if (s == "nuisance") return CovariateRole::nuisance;
  if (s == "effect_modifier") return CovariateRole::effect_modifier;
  throw Error(ErrorKind::InvalidSpec, "unknown covariate role '" + s + "'");
}

}  // namespace

void ScenarioSpec::validate() const {
  require(shape_control > 0.0 && std::isfinite(shape_control), "shape_control must be positive");
  require(shape_treatment > 0.0 && std::isfinite(shape_treatment), "shape_treatment must be positive");
  require(std::isfinite(base_log_rate) && std::isfinite(treatment_log_rate), "log rates must be finite");
  require(admin_censor_time > 0.0 && std::isfinite(admin_censor_time), "admin_censor_time must be positive");
  require(target_censor_rate >= 0.0 && target_censor_rate < 1.0, "target_censor_rate must lie in [0, 1)");
  require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
  if (censor_upper) require(*censor_upper > 0.0, "censor_upper must be positive");
  std::vector<std::string> names;
  for (const auto& g : covariates) {
    require(!g.name.empty(), "covariate names must be non-empty");
    require(std::find(names.begin(), names.end(), g.name) == names.end(), "duplicate covariate '" + g.name + "'");
    names.push_back(g.name);
    require(std::isfinite(g.log_rate_coef), "covariate coefficients must be finite");
    switch (g.kind) {
      case CovariateKind::normal:
        require(std::isfinite(g.param1) && g.param2 > 0.0 && std::isfinite(g.param2),
                "normal covariate '" + g.name + "' needs a finite mean and positive variance");
        break;
      case CovariateKind::bernoulli:
        require(g.param1 >= 0.0 && g.param1 <= 1.0, "bernoulli covariate '" + g.name + "' needs p in [0,1]");
        break;
      case CovariateKind::uniform:
        require(std::isfinite(g.param1) && std::isfinite(g.param2) && g.param1 < g.param2,
                "uniform covariate '" + g.name + "' needs low < high");
        break;
    }
  }
  if (interaction) {
    const int e = interaction_index();
    require(e >= 0, "interaction covariate '" + interaction->covariate + "' is not defined");
    require(covariates[e].kind == CovariateKind::bernoulli, "interaction covariate must be bernoulli");
    require(std::isfinite(interaction->log_rate_coef), "interaction coefficient must be finite");
  }
}

int ScenarioSpec::interaction_index() const {
  if (!interaction) return -1;
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    if (covariates[k].name == interaction->covariate) return static_cast<int>(k);
  }
  return -1;
}

double ScenarioSpec::log_rate(int arm, std::span<const double> z) const {
  double eta = base_log_rate + treatment_log_rate * arm;
  for (std::size_t k = 0; k < covariates.size(); ++k) eta += covariates[k].log_rate_coef * z[k];
  if (interaction) eta += interaction->log_rate_coef * arm * z[interaction_index()];
  return eta;
}

bool ScenarioSpec::has_covariate_effects() const {
  if (interaction && interaction->log_rate_coef != 0.0) return true;
  return std::any_of(covariates.begin(), covariates.end(),
                     [](const CovariateGenerator& g) { return g.log_rate_coef != 0.0; });
}

ScenarioSpec builtin_scenario(const std::string& id) {
  ScenarioSpec s;
  s.id = id;
  auto early = [&] {
    s.shape_control = 1.33;
    s.shape_treatment = 0.67;
    s.base_log_rate = std::log(0.20);
    s.treatment_log_rate = std::log(0.18 / 0.20);
  };
  auto delayed = [&] {
    s.shape_control = 0.60;
    s.shape_treatment = 0.80;
    s.base_log_rate = std::log(0.28);
    s.treatment_log_rate = std::log(0.18 / 0.28);
  };
  // Prognostic effects are centred on the covariate mean so the arms keep
  // the survival scale of the covariate-free scenario they extend.
  auto add = [&](std::string name, CovariateKind kind, double p1, double p2, double coef, CovariateRole role) {
    CovariateGenerator g{std::move(name), kind, p1, p2, coef, role};
    s.base_log_rate -= coef * covariate_mean(g);
    s.covariates.push_back(std::move(g));
  };

  if (id == "1" || id == "1a") {
    s.shape_control = s.shape_treatment = 0.8;
    s.base_log_rate = -1.2;
    s.treatment_log_rate = id == "1" ? 0.0 : std::log(0.6);
  } else if (id == "2") {
    early();
  } else if (id == "3") {
    delayed();
  } else if (id == "4") {
    // one prognostic covariate with a standardised log-rate effect of 0.5
    early();
    add("Z1", CovariateKind::uniform, 0.0, 2.0, 0.5 * std::sqrt(3.0), CovariateRole::prognostic);
    add("X1", CovariateKind::normal, 0.0, 1.0, 0.0, CovariateRole::nuisance);
    add("X2", CovariateKind::bernoulli, 0.5, 0.0, 0.0, CovariateRole::nuisance);
    add("X3", CovariateKind::uniform, 0.0, 2.0, 0.0, CovariateRole::nuisance);
  } else if (id == "5") {
    delayed();
    add("Z1", CovariateKind::normal, 0.0, 1.0, 0.5, CovariateRole::prognostic);
    add("Z2", CovariateKind::bernoulli, 0.5, 0.0, 1.0, CovariateRole::prognostic);
    add("X1", CovariateKind::normal, 0.0, 1.0, 0.0, CovariateRole::nuisance);
    add("X2", CovariateKind::bernoulli, 0.5, 0.0, 0.0, CovariateRole::nuisance);
  } else if (id == "6") {
    s.shape_control = s.shape_treatment = 0.8;
    s.base_log_rate = -1.2;
    s.treatment_log_rate = std::log(1.7);
    s.covariates.push_back({"E", CovariateKind::bernoulli, 0.5, 0.0, std::log(0.5), CovariateRole::effect_modifier});
    s.interaction = TreatmentInteraction{"E", std::log(0.3)};
  } else {
    throw Error(ErrorKind::InvalidSpec, "unknown builtin scenario '" + id + "'");
  }
  s.validate();
  return s;
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  json j;
  j["schema_version"] = 1;
  j["id"] = spec.id;
  j["shape_control"] = spec.shape_control;
  j["shape_treatment"] = spec.shape_treatment;
  j["base_log_rate"] = spec.base_log_rate;
  j["treatment_log_rate"] = spec.treatment_log_rate;
  j["covariates"] = json::array();
  for (const auto& g : spec.covariates) {
    j["covariates"].push_back({{"name", g.name},
                               {"distribution", kind_name(g.kind)},
                               {"param1", g.param1},
                               {"param2", g.param2},
                               {"log_rate_coef", g.log_rate_coef},
                               {"role", role_name(g.role)}});
  }
  if (spec.interaction) {
    j["interaction"] = {{"covariate", spec.interaction->covariate},
                        {"log_rate_coef", spec.interaction->log_rate_coef}};
  } else {
    j["interaction"] = nullptr;
  }
  j["admin_censor_time"] = spec.admin_censor_time;
  j["target_censor_rate"] = spec.target_censor_rate;
  j["tau"] = spec.tau;
  if (spec.censor_upper) {
    j["censor_upper"] = std::isinf(*spec.censor_upper) ? json("inf") : json(*spec.censor_upper);
  } else {
    j["censor_upper"] = nullptr;
  }
  return j.dump(2);
}

ScenarioSpec scenario_from_json(const std::string& text) {
  ScenarioSpec s;
  try {
    const json j = json::parse(text);
    s.id = j.value("id", std::string("custom"));
    s.shape_control = j.at("shape_control").get<double>();
    s.shape_treatment = j.at("shape_treatment").get<double>();
    s.base_log_rate = j.at("base_log_rate").get<double>();
    s.treatment_log_rate = j.value("treatment_log_rate", 0.0);
    for (const auto& c : j.value("covariates", json::array())) {
      CovariateGenerator g;
      g.name = c.at("name").get<std::string>();
      g.kind = parse_kind(c.at("distribution").get<std::string>());
      g.param1 = c.at("param1").get<double>();
      g.param2 = c.value("param2", 0.0);
      g.log_rate_coef = c.value("log_rate_coef", 0.0);
      g.role = parse_role(c.value("role", std::string("nuisance")));
      s.covariates.push_back(std::move(g));
    }
    if (j.contains("interaction") && !j["interaction"].is_null()) {
      s.interaction = TreatmentInteraction{j["interaction"].at("covariate").get<std::string>(),
                                           j["interaction"].at("log_rate_coef").get<double>()};
    }
    s.admin_censor_time = j.value("admin_censor_time", 8.0);
    s.target_censor_rate = j.value("target_censor_rate", 0.30);
    s.tau = j.value("tau", 5.0);
    if (j.contains("censor_upper") && !j["censor_upper"].is_null()) {
      const auto& c = j["censor_upper"];
      s.censor_upper = c.is_string() && c.get<std::string>() == "inf" ? kInf : c.get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("scenario JSON: ") + e.what());
  }
  s.validate();
  return s;
}

ScenarioSpec load_scenario(const std::string& id_or_path) {
  static const char* builtins[] = {"1", "1a", "2", "3", "4", "5", "6"};
  for (const char* b : builtins) {
    if (id_or_path == b) return builtin_scenario(id_or_path);
  }
  std::ifstream in(id_or_path);
  if (!in) throw Error(ErrorKind::InputError, "scenario '" + id_or_path + "' is neither a builtin id nor a readable file");
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

namespace {

struct LatentSubject {
  double event_time;
  double censor_draw;  // V ~ U(0,1), censoring time c* V
};

// Event times and censoring uniforms only; shared by generate and the
// calibration pilot.
std::vector<LatentSubject> draw_latent(const ScenarioSpec& spec, int n, std::mt19937_64& rng,
                                       std::vector<SurvivalRecord>* records) {
  std::vector<int> arms(n, 0);
  std::fill(arms.begin(), arms.begin() + n / 2, 1);
  std::shuffle(arms.begin(), arms.end(), rng);

  std::vector<LatentSubject> out(n);
  std::vector<double> z(spec.covariates.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = draw_covariate(spec.covariates[k], rng);
    const double lambda = std::exp(spec.log_rate(arms[i], z));
    out[i].event_time = weibull_time(spec.shape(arms[i]), lambda, rng);
    out[i].censor_draw = unif(rng);
    if (records) {
      SurvivalRecord r;
      r.arm = arms[i];
      r.covariates = z;
      records->push_back(std::move(r));
    }
  }
  return out;
}

double censor_time(const LatentSubject& s, double censor_upper, double admin) {
  if (std::isinf(censor_upper)) return admin;
  return std::min(censor_upper * s.censor_draw, admin);
}

double rate_for(const std::vector<LatentSubject>& pilot, double censor_upper, double admin) {
  std::size_t censored = 0;
  for (const auto& s : pilot) {
    if (s.event_time > censor_time(s, censor_upper, admin)) ++censored;
  }
  return static_cast<double>(censored) / static_cast<double>(pilot.size());
}

}  // namespace

Dataset generate(const ScenarioSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 2) throw Error(ErrorKind::InvalidSpec, "generate: n must be at least 2");
  const double upper = spec.censor_upper ? *spec.censor_upper : calibrate_censoring(spec);

  Dataset data;
  for (const auto& g : spec.covariates) data.covariate_names.push_back(g.name);
  std::mt19937_64 rng(seed);
  data.records.reserve(n);
  const auto latent = draw_latent(spec, n, rng, &data.records);
  for (int i = 0; i < n; ++i) {
    const double c = censor_time(latent[i], upper, spec.admin_censor_time);
    data.records[i].time = std::min(latent[i].event_time, c);
    data.records[i].event = latent[i].event_time <= c;
  }
  return data;
}

double censoring_rate(const ScenarioSpec& spec, double censor_upper, int n, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  return rate_for(draw_latent(spec, n, rng, nullptr), censor_upper, spec.admin_censor_time);
}

double calibrate_censoring(const ScenarioSpec& spec, int n_pilot, std::uint64_t seed) {
  spec.validate();
  if (n_pilot < 1000) throw Error(ErrorKind::InvalidSpec, "calibrate_censoring: pilot sample too small");

  ScenarioSpec keyed = spec;
  keyed.censor_upper.reset();
  const std::string key = scenario_to_json(keyed) + "|" + std::to_string(n_pilot) + "|" + std::to_string(seed);
  static std::mutex mutex;
  static std::map<std::string, double> cache;
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  std::mt19937_64 rng(seed);
  const auto pilot = draw_latent(spec, n_pilot, rng, nullptr);
  const double admin = spec.admin_censor_time;
  const double target = spec.target_censor_rate;
  const double floor_rate = rate_for(pilot, kInf, admin);

  double result = kInf;
  if (floor_rate > target + 0.01) {
    throw Error(ErrorKind::Unachievable, "administrative censoring alone gives " + std::to_string(floor_rate) +
                                             " > target " + std::to_string(target));
  }
  // Admin censoring alone already lands within tolerance: no uniform censoring.
  if (floor_rate < target - 0.01) {
    double lo = 1e-9 * admin, hi = admin;
    double rate_lo = rate_for(pilot, lo, admin), rate_hi = rate_for(pilot, hi, admin);
    while (rate_hi > target) {
      lo = hi;
      rate_lo = rate_hi;
      hi *= 2.0;
      rate_hi = rate_for(pilot, hi, admin);
      if (hi > 1e12 * admin) throw Error(ErrorKind::Unachievable, "censoring calibration did not bracket the target");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double r = rate_for(pilot, mid, admin);
      if (r > rate_lo || r < rate_hi) {
        throw Error(ErrorKind::Unachievable, "censoring rate is not monotone in the uniform bound");
      }
      if (r > target) {
        lo = mid;
        rate_lo = r;
      } else {
        hi = mid;
        rate_hi = r;
      }
    }
    result = hi;
  }
  std::lock_guard<std::mutex> lock(mutex);
  cache[key] = result;
  return result;
}

namespace {

double arm_rmst(const ScenarioSpec& spec, int arm, std::span<const double> z, double tau) {
  return weibull_rmst({spec.shape(arm), std::exp(spec.log_rate(arm, z))}, tau);
}

}  // namespace

TrueValues true_values(const ScenarioSpec& spec, double tau, int mc_size, std::uint64_t seed) {
  spec.validate();
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidSpec, "true_values: tau must be positive");
  TrueValues out;
  const std::size_t p = spec.covariates.size();
  const int e = spec.interaction_index();

  // covariates that change lambda, other than the interaction covariate
  bool other_effects = false;
  for (std::size_t k = 0; k < p; ++k) {
    if (static_cast<int>(k) != e && spec.covariates[k].log_rate_coef != 0.0) other_effects = true;
  }

  if (!spec.has_covariate_effects()) {
    const std::vector<double> z(p, 0.0);
    out.delta = arm_rmst(spec, 1, z, tau) - arm_rmst(spec, 0, z, tau);
    return out;
  }

  if (e >= 0 && !other_effects) {
    std::vector<double> z(p, 0.0);
    auto cell = [&](int arm, double ev) {
      z[e] = ev;
      return arm_rmst(spec, arm, z, tau);
    };
    StratumTruth st;
    st.delta_minus = cell(1, 0.0) - cell(0, 0.0);
    st.delta_plus = cell(1, 1.0) - cell(0, 1.0);
    st.beta1 = cell(0, 1.0) - cell(0, 0.0);
    const double pe = spec.covariates[e].param1;
    out.delta = (1.0 - pe) * st.delta_minus + pe * st.delta_plus;
    out.strata = st;
    return out;
  }

  if (mc_size < 2) throw Error(ErrorKind::InvalidSpec, "true_values: mc_size must be at least 2");
  out.exact = false;
  std::mt19937_64 rng(seed);
  std::vector<double> z(p);
  std::vector<double> diffs(static_cast<std::size_t>(mc_size));
  double sum_minus = 0.0, sum_plus = 0.0, sum_beta1 = 0.0;
  for (int m = 0; m < mc_size; ++m) {
    for (std::size_t k = 0; k < p; ++k) z[k] = draw_covariate(spec.covariates[k], rng);
    diffs[m] = arm_rmst(spec, 1, z, tau) - arm_rmst(spec, 0, z, tau);
    if (e >= 0) {
      std::vector<double> zz = z;
      zz[e] = 0.0;
      const double c00 = arm_rmst(spec, 0, zz, tau), c10 = arm_rmst(spec, 1, zz, tau);
      zz[e] = 1.0;
      const double c01 = arm_rmst(spec, 0, zz, tau), c11 = arm_rmst(spec, 1, zz, tau);
      sum_minus += c10 - c00;
      sum_plus += c11 - c01;
      sum_beta1 += c01 - c00;
    }
  }
  out.delta = mean(diffs);
  out.delta_mcse = sample_sd(diffs) / std::sqrt(static_cast<double>(mc_size));
  if (e >= 0) out.strata = StratumTruth{sum_minus / mc_size, sum_plus / mc_size, sum_beta1 / mc_size};
  return out;
}

}  // namespace rmst
