#include "rmst/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmst/error.hpp"
#include "rmst/km.hpp"

namespace rmst {

namespace {

std::vector<std::size_t> sorted_order(const Dataset& data) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data.records[a].time < data.records[b].time; });
  return order;
}

// KM integral on [0, tau] of the sample in `order` with position `skip`
// removed.
double loo_integral(const Dataset& data, const std::vector<std::size_t>& order, std::size_t skip, double tau) {
  const std::size_t n = order.size();
  double area = 0.0, prev_t = 0.0, s = 1.0;
  std::size_t remaining = n - 1;
  std::size_t p = 0;
  while (p < n) {
    if (p == skip) {
      ++p;
      continue;
    }
    const double t = data.records[order[p]].time;
    if (t >= tau) break;
    std::size_t d = 0, leaving = 0;
    for (; p < n && data.records[order[p]].time == t; ++p) {
      if (p == skip) continue;
      ++leaving;
      if (data.records[order[p]].event) ++d;
    }
    if (d > 0) {
      area += s * (t - prev_t);
      prev_t = t;
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(remaining);
    }
    remaining -= leaving;
  }
  area += s * (tau - prev_t);
  return area;
}

std::vector<double> loo_naive(const Dataset& data, double tau) {
  const auto order = sorted_order(data);
  std::vector<double> loo(data.size());
  for (std::size_t p = 0; p < order.size(); ++p) loo[order[p]] = loo_integral(data, order, p, tau);
  return loo;
}

// Removing subject i shrinks every risk set before its time by one and, if i
// is tied with an event time, the risk set and event count at that time.
// Jumps after t_i keep their full-sample factors, so the integral from t_i to
// tau is a suffix quantity shared by all subjects.
std::vector<double> loo_fast(const Dataset& data, const KmCurve& km, double tau) {
  const auto& e = km.jump_times;
  const std::size_t D = e.size();

  // survival of the reduced-risk-set product after each jump, and its
  // integral up to each jump
  std::vector<double> s_minus(D), int_minus(D);
  double s = 1.0, area = 0.0, prev = 0.0;
  for (std::size_t l = 0; l < D; ++l) {
    const double t = std::min(e[l], tau);
    area += s * (t - prev);
    prev = t;
    int_minus[l] = area;
    const int reduced = km.at_risk[l] - 1;
    s = reduced > 0 ? s * (1.0 - static_cast<double>(km.events[l]) / reduced) : 0.0;
    s_minus[l] = s;
  }

  // tail[l] = integral over [e_l, tau] of the full-sample product of jumps
  // strictly after e_l
  std::vector<double> tail(D, 0.0);
  for (std::size_t l = D; l-- > 0;) {
    if (e[l] >= tau) continue;
    if (l + 1 < D && e[l + 1] < tau) {
      const double h = 1.0 - static_cast<double>(km.events[l + 1]) / km.at_risk[l + 1];
      tail[l] = (e[l + 1] - e[l]) + h * tail[l + 1];
    } else {
      tail[l] = tau - e[l];
    }
  }

  std::vector<double> loo(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data.records[i];
    const double ti = rec.time;
    const auto k = static_cast<std::size_t>(std::lower_bound(e.begin(), e.end(), ti) - e.begin());
    const double s_before = k == 0 ? 1.0 : s_minus[k - 1];
    const double int_before = k == 0 ? 0.0 : int_minus[k - 1];
    const double t_prev = k == 0 ? 0.0 : std::min(e[k - 1], tau);
    double value = int_before + s_before * (std::min(ti, tau) - t_prev);
    if (ti < tau) {
      double factor = 1.0, rest = 0.0;
      if (k < D && e[k] == ti) {
        const int reduced = km.at_risk[k] - 1;
        const int d = km.events[k] - (rec.event ? 1 : 0);
        factor = reduced > 0 ? 1.0 - static_cast<double>(d) / reduced : 1.0;
        rest = tail[k];
      } else if (k < D && e[k] < tau) {
        const double h = 1.0 - static_cast<double>(km.events[k]) / km.at_risk[k];
        rest = (e[k] - ti) + h * tail[k];
      } else {
        rest = tau - ti;
      }
      value += s_before * factor * rest;
    }
    loo[i] = value;
  }
  return loo;
}

}  // namespace

PseudoObsVector pseudo_obs(const Dataset& data, double tau, PseudoAlgorithm algorithm) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "pseudo_obs: no records");
  if (data.size() < 2) throw Error(ErrorKind::EmptyDataset, "pseudo_obs: at least two records are required");
  if (data.event_count() < 1) throw Error(ErrorKind::InsufficientEvents, "pseudo_obs: no observed events");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::DomainError, "pseudo_obs: tau must be positive");

  const KmCurve km = km_fit(data);
  PseudoObsVector out;
  out.tau = tau;
  out.full_rmst = rmst_from_curve(km, tau);

  const auto loo = algorithm == PseudoAlgorithm::naive ? loo_naive(data, tau) : loo_fast(data, km, tau);
  const double n = static_cast<double>(data.size());
  out.values.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.values[i] = n * out.full_rmst - (n - 1.0) * loo[i];
  return out;
}

}  // namespace rmst
