#include "kten/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>

#include "kten/error.hpp"

namespace kten {

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, Errc::InsufficientData,
          "linear fit needs at least two points");
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, Errc::InsufficientData, "linear fit needs distinct x values");
  LinearFit f;
  f.n = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double sse = std::max(0.0, syy - f.slope * sxy);
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (x.size() > 2) {
    f.slope_stderr = std::sqrt(sse / (n - 2.0) / sxx);
    boost::math::students_t t(n - 2.0);
    f.slope_ci95 = boost::math::quantile(t, 0.975) * f.slope_stderr;
  }
  return f;
}

LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, Errc::InsufficientData, "log-log fit needs positive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return linear_fit(lx, ly);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  require(!samples.empty(), Errc::InsufficientData, "KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  return d;
}

double ks_critical(std::size_t n, double alpha) {
  // P(sqrt(n) D > x) ~ 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)
  auto tail = [](double x) {
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) s += ((k % 2) ? 2.0 : -2.0) * std::exp(-2.0 * k * k * x * x);
    return s;
  };
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve([&](double x) { return tail(x) - alpha; }, 0.3, 5.0,
                                             boost::math::tools::eps_tolerance<double>(50), iters);
  const double x = 0.5 * (r.first + r.second);
  // Stephens' finite-n adjustment
  const double rn = std::sqrt(double(n));
  return x / (rn + 0.12 + 0.11 / rn);
}

}  // namespace kten
