#include "rmst/report.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace rmst {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

json json_number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

json to_json(const GeeFit& fit) {
  json params = json::array();
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    params.push_back({{"name", fit.names[j]},
                      {"estimate", json_number(fit.beta_hat(k))},
                      {"se", json_number(fit.se(k))},
                      {"ci_lower", json_number(fit.ci_lower(k))},
                      {"ci_upper", json_number(fit.ci_upper(k))}});
  }
  return {{"confidence", fit.confidence}, {"parameters", params}};
}

json to_json(const RmstDifference& d) {
  return {{"estimate", json_number(d.estimate)}, {"se", json_number(d.se)},
          {"ci_lower", json_number(d.ci_lower)}, {"ci_upper", json_number(d.ci_upper)},
          {"rmst_arm0", json_number(d.rmst_arm0)}, {"rmst_arm1", json_number(d.rmst_arm1)}};
}

json to_json(const PosteriorSummary& summary, const PosteriorDraws& draws) {
  json params = json::array();
  for (const auto& p : summary.parameters) {
    params.push_back({{"name", p.name},
                      {"mean", json_number(p.mean)},
                      {"sd", json_number(p.sd)},
                      {"q2.5", json_number(p.q025)},
                      {"median", json_number(p.q50)},
                      {"q97.5", json_number(p.q975)},
                      {"rhat", json_number(p.rhat)},
                      {"ess", json_number(p.ess)}});
  }
  json tails = json::array();
  for (const auto& t : summary.tail_probabilities) {
    tails.push_back({{"parameter", t.parameter},
                     {"direction", to_string(t.direction)},
                     {"threshold", t.threshold},
                     {"probability", json_number(t.probability)},
                     {"mc_se", json_number(t.mc_se)},
                     {"indicator_ess", json_number(t.indicator_ess)}});
  }
  json accept = json::array();
  for (Eigen::Index c = 0; c < draws.acceptance_rate.size(); ++c) accept.push_back(draws.acceptance_rate(c));
  return {{"chains", draws.num_chains()},
          {"samples_per_chain", draws.num_samples()},
          {"acceptance_rate", accept},
          {"divergent_chains", draws.divergent_chains},
          {"ridge_activations", draws.ridge_activations},
          {"parameters", params},
          {"tail_probabilities", tails}};
}

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws) {
  out << "chain,iter";
  for (const auto& n : draws.parameter_names) out << ',' << n;
  out << '\n';
  char buf[32];
  for (int c = 0; c < draws.num_chains(); ++c) {
    const auto& m = draws.chains[c];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << c + 1 << ',' << i + 1;
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace rmst
