#include "rmst/specfun.hpp"

#include <cmath>
#include <limits>

#include "rmst/error.hpp"

namespace rmst {

namespace {

constexpr double kTermTol = 1e-14;
constexpr int kMaxIter = 500;

// gamma(a, x) via sum_k x^k / (a (a+1) ... (a+k)), scaled by x^a e^-x
double lower_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int k = 0; k < kMaxIter; ++k) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kTermTol) break;
  }
  return sum * std::exp(-x + a * std::log(x));
}

// Gamma(a, x) via the modified Lentz continued fraction
double upper_continued_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kTermTol;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kTermTol) break;
  }
  return std::exp(-x + a * std::log(x)) * h;
}

}  // namespace

void WeibullParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::DomainError, "Weibull sigma and lambda must be positive and finite");
  }
}

double WeibullParams::survival(double t) const { return std::exp(-std::pow(lambda * t, 1.0 / sigma)); }

double lower_incomplete_gamma(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorKind::DomainError, "lower_incomplete_gamma: a must be > 0");
  if (!(x >= 0.0) || std::isnan(x)) throw Error(ErrorKind::DomainError, "lower_incomplete_gamma: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return std::tgamma(a);
  if (x < a + 1.0) return lower_series(a, x);
  return std::tgamma(a) - upper_continued_fraction(a, x);
}

double weibull_rmst(const WeibullParams& params, double tau) {
  params.validate();
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::DomainError, "weibull_rmst: tau must be positive");
  const double x = std::pow(params.lambda * tau, 1.0 / params.sigma);
  return params.sigma / params.lambda * lower_incomplete_gamma(params.sigma, x);
}

}  // namespace rmst
