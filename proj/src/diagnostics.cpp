#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rmst/error.hpp"
#include "rmst/sampler.hpp"
#include "rmst/stats.hpp"

namespace rmst {

namespace {

using Chains = std::vector<std::vector<double>>;

Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<long>(half));
    out.emplace_back(c.end() - static_cast<long>(half), c.end());
  }
  return out;
}

// Pooled average ranks mapped through the normal quantile at
// (r - 3/8) / (S + 1/4).
Chains rank_normalise(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t m = 0; m < chains.size(); ++m) {
    for (std::size_t i = 0; i < chains[m].size(); ++i) pooled.push_back({chains[m][i], m * chains[0].size() + i});
  }
  std::sort(pooled.begin(), pooled.end());
  const double total = static_cast<double>(pooled.size());
  std::vector<double> z(pooled.size());
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // average of i+1..j
    const double value = normal_quantile((rank - 0.375) / (total + 0.25));
    for (std::size_t k = i; k < j; ++k) z[pooled[k].second] = value;
    i = j;
  }
  Chains out(chains.size());
  for (std::size_t m = 0; m < chains.size(); ++m) {
    out[m].assign(z.begin() + static_cast<long>(m * chains[0].size()),
                  z.begin() + static_cast<long>((m + 1) * chains[0].size()));
  }
  return out;
}

double rhat_basic(const Chains& chains) {
  const double m = static_cast<double>(chains.size());
  const double n = static_cast<double>(chains[0].size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean(c));
    vars.push_back(sample_sd(c) * sample_sd(c));
  }
  const double w = mean(vars);
  const double b_over_n = m > 1 ? sample_sd(means) * sample_sd(means) : 0.0;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  if (!(w > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(var_plus / w);
}

// Geyer's initial monotone sequence estimator over multiple chains.
double ess_basic(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains[0].size();
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean(chains[c]);
    double ss = 0.0;
    for (double v : chains[c]) ss += (v - means[c]) * (v - means[c]);
    vars[c] = ss / static_cast<double>(n - 1);
  }
  const double mean_var = mean(vars);
  const double var_plus = mean_var * (static_cast<double>(n) - 1.0) / static_cast<double>(n) +
                          (m > 1 ? sample_sd(means) * sample_sd(means) : 0.0);
  if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

  // mean over chains of the biased autocovariance at lag t
  auto mean_acov = [&](std::size_t t) {
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (chains[c][i] - means[c]) * (chains[c][i + t] - means[c]);
      total += s / static_cast<double>(n);
    }
    return total / static_cast<double>(m);
  };
  auto rho = [&](std::size_t t) { return 1.0 - (mean_var - mean_acov(t)) / var_plus; };

  std::vector<double> rho_hat(n + 2, 0.0);
  rho_hat[0] = 1.0;
  double even = 1.0, odd = rho(1);
  rho_hat[1] = odd;
  std::size_t t = 1;
  while (t + 5 < n && even + odd > 0.0) {
    even = rho(t + 1);
    odd = rho(t + 2);
    if (even + odd >= 0.0) {
      rho_hat[t + 1] = even;
      rho_hat[t + 2] = odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (even > 0.0) rho_hat[max_t + 1] = even;
  // enforce monotone decrease of the paired sums
  for (std::size_t k = 1; k + 2 <= max_t; k += 2) {
    if (rho_hat[k + 1] + rho_hat[k + 2] > rho_hat[k - 1] + rho_hat[k]) {
      rho_hat[k + 1] = (rho_hat[k - 1] + rho_hat[k]) / 2.0;
      rho_hat[k + 2] = rho_hat[k + 1];
    }
  }
  double tau = -1.0 + rho_hat[max_t + 1];
  for (std::size_t k = 0; k < max_t; ++k) tau += 2.0 * rho_hat[k];
  const double total = static_cast<double>(m * n);
  if (!(tau > 0.0)) return total;
  return std::min(total / tau, total);
}

}  // namespace

ParameterDiagnostics diagnose_parameter(const Chains& chains) {
  if (chains.size() < 2) throw Error(ErrorKind::TooFewDraws, "diagnostics need at least two chains");
  for (const auto& c : chains) {
    if (c.size() < 4) throw Error(ErrorKind::TooFewDraws, "diagnostics need at least four draws per chain");
    if (c.size() != chains[0].size()) throw Error(ErrorKind::DimensionMismatch, "chains differ in length");
  }
  const Chains split = split_chains(chains);
  const Chains z = rank_normalise(split);

  std::vector<double> all;
  for (const auto& c : split) all.insert(all.end(), c.begin(), c.end());
  const double med = quantile_type7(all, 0.5);
  Chains folded = split;
  for (auto& c : folded) {
    for (auto& v : c) v = std::fabs(v - med);
  }

  ParameterDiagnostics out;
  const double bulk = rhat_basic(z);
  const double tail = rhat_basic(rank_normalise(folded));
  out.rhat = std::isnan(tail) ? bulk : std::max(bulk, tail);
  out.ess = ess_basic(z);
  return out;
}

void diagnose(PosteriorDraws& draws) {
  const int q = draws.dim();
  draws.rhat.resize(q);
  draws.ess.resize(q);
  draws.divergent_chains = false;
  for (int j = 0; j < q; ++j) {
    const auto d = diagnose_parameter(draws.per_chain(j));
    draws.rhat(j) = d.rhat;
    draws.ess(j) = d.ess;
    if (!(d.rhat <= 1.01)) draws.divergent_chains = true;
  }
}

TailDirection parse_direction(const std::string& op) {
  if (op == ">=" || op == "ge" || op == "geq") return TailDirection::greater_equal;
  if (op == ">" || op == "gt") return TailDirection::greater;
  if (op == "<=" || op == "le" || op == "leq") return TailDirection::less_equal;
  if (op == "<" || op == "lt") return TailDirection::less;
  throw Error(ErrorKind::InputError, "unknown comparison '" + op + "' (use >=, >, <=, <)");
}

std::string to_string(TailDirection direction) {
  switch (direction) {
    case TailDirection::greater_equal: return ">=";
    case TailDirection::greater: return ">";
    case TailDirection::less_equal: return "<=";
    case TailDirection::less: return "<";
  }
  return "?";
}

double tail_probability_mcse(double probability, double indicator_ess) {
  if (probability <= 0.0 || probability >= 1.0) return 0.0;
  if (!(indicator_ess > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(probability * (1.0 - probability) / indicator_ess);
}

PosteriorSummary summarize(const PosteriorDraws& draws, const std::vector<TailRequest>& tails) {
  if (draws.num_chains() == 0 || draws.num_samples() == 0) {
    throw Error(ErrorKind::TooFewDraws, "summarize: no draws");
  }
  PosteriorSummary out;
  for (int j = 0; j < draws.dim(); ++j) {
    const auto pooled = draws.pooled(j);
    ParameterSummary s;
    s.name = draws.parameter_names[j];
    s.mean = mean(pooled);
    s.sd = sample_sd(pooled);
    s.q025 = quantile_type7(pooled, 0.025);
    s.q50 = quantile_type7(pooled, 0.5);
    s.q975 = quantile_type7(pooled, 0.975);
    s.rhat = draws.rhat.size() > j ? draws.rhat(j) : std::numeric_limits<double>::quiet_NaN();
    s.ess = draws.ess.size() > j ? draws.ess(j) : std::numeric_limits<double>::quiet_NaN();
    out.parameters.push_back(s);
  }
  for (const auto& req : tails) {
    const int j = draws.index_of(req.parameter);
    auto hit = [&](double v) {
      switch (req.direction) {
        case TailDirection::greater_equal: return v >= req.threshold;
        case TailDirection::greater: return v > req.threshold;
        case TailDirection::less_equal: return v <= req.threshold;
        case TailDirection::less: return v < req.threshold;
      }
      return false;
    };
    auto indicators = draws.per_chain(j);
    double count = 0.0, total = 0.0;
    for (auto& chain : indicators) {
      for (auto& v : chain) {
        v = hit(v) ? 1.0 : 0.0;
        count += v;
        total += 1.0;
      }
    }
    TailProbability tp;
    tp.parameter = req.parameter;
    tp.threshold = req.threshold;
    tp.direction = req.direction;
    tp.probability = count / total;
    if (tp.probability > 0.0 && tp.probability < 1.0) {
      tp.indicator_ess = draws.num_samples() >= 4 && draws.num_chains() >= 2 ? diagnose_parameter(indicators).ess : total;
    } else {
      tp.indicator_ess = total;
    }
    tp.mc_se = tail_probability_mcse(tp.probability, tp.indicator_ess);
    out.tail_probabilities.push_back(tp);
  }
  return out;
}

}  // namespace rmst
