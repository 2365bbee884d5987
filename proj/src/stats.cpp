#include "rmst/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "rmst/error.hpp"

namespace rmst {

double quantile_type7(std::vector<double> values, double prob) {
  if (values.empty()) throw Error(ErrorKind::EmptyDataset, "quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error(ErrorKind::DomainError, "quantile probability outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double mean(std::span<const double> values) {
  if (values.empty()) return std::nan("");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return std::nan("");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw Error(ErrorKind::DomainError, "normal quantile needs prob in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace rmst
