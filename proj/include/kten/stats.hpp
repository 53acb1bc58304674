#pragma once

#include <functional>
#include <vector>

namespace kten {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_ci95 = 0.0;  // half-width of the 95% interval (Student t)
  double r2 = 0.0;
  std::size_t n = 0;
};

// Ordinary least squares y = intercept + slope * x. Needs n >= 2.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Least-squares fit on (log x, log y).
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

// One-sample Kolmogorov-Smirnov statistic sup |F_n - F|. Sorts a copy.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Asymptotic critical value of D_n at significance level alpha,
// inverted from the Kolmogorov series.
double ks_critical(std::size_t n, double alpha);

}  // namespace kten
