#pragma once

// Independent reference computations for the tests. None of these call into
// the library's production paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rmst/dataset.hpp"

namespace oracle {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps = 1e-12,
                               int depth = 50) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson_step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), eps, depth);
}

// Product-limit estimate by direct definition: at each distinct event time
// multiply by (1 - d/Y). Censorings tied with events stay in the risk set.
struct Step {
  double time;
  double surv;
};

inline std::vector<Step> km_steps(const std::vector<double>& t, const std::vector<int>& e) {
  std::vector<double> times;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (e[i]) times.push_back(t[i]);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<Step> out;
  double s = 1.0;
  for (double u : times) {
    int at_risk = 0, d = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] >= u) ++at_risk;
      if (t[i] == u && e[i]) ++d;
    }
    s *= 1.0 - static_cast<double>(d) / at_risk;
    out.push_back({u, s});
  }
  return out;
}

inline double km_area(const std::vector<Step>& steps, double tau) {
  double area = 0.0, prev = 0.0, s = 1.0;
  for (const auto& st : steps) {
    if (st.time >= tau) break;
    area += s * (st.time - prev);
    prev = st.time;
    s = st.surv;
  }
  return area + s * (tau - prev);
}

inline double km_area(const std::vector<double>& t, const std::vector<int>& e, double tau) {
  return km_area(km_steps(t, e), tau);
}

// Leave-one-out pseudo-values straight from the definition.
inline std::vector<double> pseudo_values(const std::vector<double>& t, const std::vector<int>& e, double tau) {
  const std::size_t n = t.size();
  const double full = km_area(t, e, tau);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> tt;
    std::vector<int> ee;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      tt.push_back(t[j]);
      ee.push_back(e[j]);
    }
    out[i] = n * full - (n - 1.0) * km_area(tt, ee, tau);
  }
  return out;
}

inline void unpack(const rmst::Dataset& d, std::vector<double>& t, std::vector<int>& e) {
  t.clear();
  e.clear();
  for (const auto& r : d.records) {
    t.push_back(r.time);
    e.push_back(r.event ? 1 : 0);
  }
}

// Random two-arm dataset with exponential-ish event times, uniform censoring
// and optionally rounded times to force ties.
inline rmst::Dataset random_dataset(std::mt19937_64& rng, int n, double censor_frac, bool ties, int covariates = 0) {
  rmst::Dataset d;
  for (int k = 0; k < covariates; ++k) d.covariate_names.push_back("Z" + std::to_string(k + 1));
  std::exponential_distribution<double> ex(0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nz(0.0, 1.0);
  int events = 0;
  for (int i = 0; i < n; ++i) {
    rmst::SurvivalRecord r;
    r.arm = i % 2;
    double t = ex(rng) * (r.arm ? 1.3 : 1.0);
    if (ties) t = std::round(t * 4.0) / 4.0 + 0.25;
    r.time = t;
    r.event = u(rng) >= censor_frac;
    events += r.event;
    for (int k = 0; k < covariates; ++k) r.covariates.push_back(nz(rng));
    d.records.push_back(std::move(r));
  }
  if (events < 2) {
    d.records[0].event = true;
    d.records[1].event = true;
  }
  return d;
}

// Derivative-free minimiser, used to locate posterior modes independently
// of the sampler.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                                   double step = 0.5, int iters = 20000, double tol = 1e-13) {
  const int d = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> p(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (int j = 0; j < d; ++j) p[j + 1](j) += step;
  for (int j = 0; j <= d; ++j) fv[j] = f(p[j]);
  for (int it = 0; it < iters; ++it) {
    std::vector<int> idx(d + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<Eigen::VectorXd> np;
    std::vector<double> nf;
    for (int k : idx) {
      np.push_back(p[k]);
      nf.push_back(fv[k]);
    }
    p = np;
    fv = nf;
    if (std::abs(fv[d] - fv[0]) < tol * (1.0 + std::abs(fv[0])) && (p[d] - p[0]).norm() < 1e-10) break;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < d; ++j) c += p[j];
    c /= d;
    const Eigen::VectorXd xr = c + (c - p[d]);
    const double fr = f(xr);
    if (fr < fv[0]) {
      const Eigen::VectorXd xe = c + 2.0 * (c - p[d]);
      const double fe = f(xe);
      if (fe < fr) {
        p[d] = xe;
        fv[d] = fe;
      } else {
        p[d] = xr;
        fv[d] = fr;
      }
    } else if (fr < fv[d - 1]) {
      p[d] = xr;
      fv[d] = fr;
    } else {
      const Eigen::VectorXd xc = c + 0.5 * (p[d] - c);
      const double fc = f(xc);
      if (fc < fv[d]) {
        p[d] = xc;
        fv[d] = fc;
      } else {
        for (int j = 1; j <= d; ++j) {
          p[j] = p[0] + 0.5 * (p[j] - p[0]);
          fv[j] = f(p[j]);
        }
      }
    }
  }
  int best = 0;
  for (int j = 1; j <= d; ++j) {
    if (fv[j] < fv[best]) best = j;
  }
  return p[best];
}

}  // namespace oracle
