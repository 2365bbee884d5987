#pragma once

#include <span>
#include <vector>

namespace rmst {

// Linear interpolation between order statistics (R type 7).
double quantile_type7(std::vector<double> values, double prob);

double mean(std::span<const double> values);
// Sample standard deviation, n - 1 denominator.
double sample_sd(std::span<const double> values);

double normal_quantile(double prob);
double normal_cdf(double x);

}  // namespace rmst
