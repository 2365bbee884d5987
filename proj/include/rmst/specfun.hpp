#pragma once

namespace rmst {

// Weibull survival S(t) = exp(-(lambda * t)^(1 / sigma)).
struct WeibullParams {
  double sigma = 1.0;   // shape
  double lambda = 1.0;  // rate, 1/years

  void validate() const;
  double survival(double t) const;
};

// gamma(a, x) = int_0^x t^(a-1) e^(-t) dt. Power series below x = a + 1,
// Lentz continued fraction for the upper function above it.
double lower_incomplete_gamma(double a, double x);

// int_0^tau S(t) dt = (sigma / lambda) * gamma(sigma, (lambda * tau)^(1 / sigma))
double weibull_rmst(const WeibullParams& params, double tau);

}  // namespace rmst
