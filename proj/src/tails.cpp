#include "kten/tails.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>

#include "kten/error.hpp"
#include "kten/geometry.hpp"
#include "kten/parallel.hpp"
#include "kten/rng.hpp"
#include "kten/stats.hpp"

namespace kten {

double TailHistogram::shell_volume(std::size_t k) const {
  return ball_volume(d) * (std::pow(edges[k + 1], d) - std::pow(edges[k], d));
}

TailHistogram make_tail_histogram(const std::vector<Vec>& v, double mass, int bins, double r_max) {
  require(!v.empty(), Errc::InsufficientData, "no samples");
  require(bins >= 1, Errc::InvalidParameter, "need at least one bin");
  require(mass > 0.0, Errc::InvalidParameter, "mass must be positive");
  TailHistogram h;
  h.d = v[0].dim();
  h.mass = mass;
  h.samples = v.size();
  double top = 0.0, m2 = 0.0;
  for (const Vec& x : v) {
    top = std::max(top, norm(x));
    m2 += norm2(x);
  }
  h.sigma = std::sqrt(m2 / (double(v.size()) * h.d));
  if (r_max <= 0.0) r_max = top > 0.0 ? std::nextafter(top, INFINITY) : 1.0;
  h.edges.resize(bins + 1);
  for (int k = 0; k <= bins; ++k) h.edges[k] = r_max * k / bins;
  h.counts.assign(bins, 0);
  for (const Vec& x : v) {
    const double r = norm(x);
    if (r >= r_max) continue;
    const auto k = std::min<std::size_t>(std::size_t(r / r_max * bins), bins - 1);
    ++h.counts[k];
  }
  h.densities.resize(bins);
  for (std::size_t k = 0; k < h.bins(); ++k)
    h.densities[k] = mass * double(h.counts[k]) / (double(h.samples) * h.shell_volume(k));
  return h;
}

std::pair<double, double> default_fit_window(const TailHistogram& h) {
  return {2.0 * h.sigma, 4.0 * h.sigma};
}

std::pair<double, double> resolved_window(const TailHistogram& h, double lo, double hi,
                                          std::uint64_t min_count) {
  double top = lo;
  for (std::size_t k = 0; k < h.bins(); ++k) {
    const double c = h.center(k);
    if (c < lo) continue;
    if (c > hi || h.counts[k] < min_count) break;
    top = c;
  }
  return {lo, top};
}

namespace {

// Density of the smallest inner ball holding enough samples to be well resolved;
// for profiles peaked at the origin this is the peak density to within the sampling noise.
double peak_density(const TailHistogram& h) {
  const std::uint64_t need = std::max<std::uint64_t>(1000, h.samples / 1000);
  std::uint64_t cum = 0;
  double best = 0.0;
  for (std::size_t k = 0; k < h.bins(); ++k) {
    cum += h.counts[k];
    if (cum >= need) {
      const double ball = ball_volume(h.d) * std::pow(h.edges[k + 1], h.d);
      best = h.mass * double(cum) / (double(h.samples) * ball);
      break;
    }
  }
  for (std::size_t k = 0; k < h.bins(); ++k)
    if (h.counts[k] >= need) best = std::max(best, h.densities[k]);
  return best;
}

}  // namespace

TailFit fit_tail_exponent(const TailHistogram& h, double lo, double hi) {
  require(lo > 0.0 && hi > lo, Errc::InvalidParameter, "fit window must satisfy 0 < lo < hi");
  const double a = peak_density(h);
  require(a > 0.0, Errc::InsufficientData, "histogram has no resolved peak");
  std::vector<double> x, y;
  for (std::size_t k = 0; k < h.bins(); ++k) {
    const double c = h.center(k);
    if (c < lo || c > hi) continue;
    require(h.counts[k] >= 10, Errc::InsufficientData,
            "bin at |v| = " + std::to_string(c) + " has fewer than 10 counts");
    const double q = -std::log(h.densities[k] / a);
    require(q > 0.0, Errc::InsufficientData,
            "bin at |v| = " + std::to_string(c) + " is not below the peak density");
    x.push_back(std::log(c));
    y.push_back(std::log(q));
  }
  require(x.size() >= 8, Errc::InsufficientData,
          "fit window holds " + std::to_string(x.size()) + " bins, need 8");
  const LinearFit f = linear_fit(x, y);
  TailFit t;
  t.p_hat = f.slope;
  t.b_hat = std::exp(f.intercept);
  t.a_hat = a;
  t.r2 = f.r2;
  t.bins_used = x.size();
  return t;
}

DominationReport check_envelope(const TailHistogram& h, const Envelope& env, double confidence) {
  require(confidence > 0.0 && confidence < 1.0, Errc::InvalidParameter,
          "confidence must lie in (0, 1)");
  DominationReport rep;
  bool any = false;
  for (std::size_t k = 0; k < h.bins(); ++k) {
    BinCheck b;
    b.r = h.center(k);
    b.density = h.densities[k];
    b.envelope = env.at(b.r);
    const double scale = h.mass / (double(h.samples) * h.shell_volume(k));
    if (h.counts[k] == 0) {
      b.upper = scale * boost::math::gamma_p_inv(1.0, confidence);
      b.status = BinStatus::Unresolved;
      rep.unresolved.push_back(k);
    } else {
      b.upper = scale * boost::math::gamma_p_inv(double(h.counts[k]) + 1.0, confidence);
      b.status = b.upper >= b.envelope ? BinStatus::Dominated : BinStatus::Violated;
      if (b.status == BinStatus::Violated) rep.violations.push_back(k);
      if (!any) rep.resolved_lo = b.r;
      rep.resolved_hi = b.r;
      any = true;
    }
    rep.bins.push_back(b);
  }
  return rep;
}

UniformityReport uniformity_scan(const std::vector<TimedHistogram>& series, const Envelope& env,
                                 double t0) {
  UniformityReport out;
  for (const TimedHistogram& th : series) {
    if (!(th.t > t0)) continue;
    out.times.push_back(th.t);
    out.reports.push_back(check_envelope(th.hist, env));
    if (!out.reports.back().dominated()) {
      out.uniform = false;
      if (!out.earliest_failure || th.t < *out.earliest_failure) out.earliest_failure = th.t;
    }
  }
  require(!out.times.empty(), Errc::EmptySeries, "no histogram with t > t0");
  return out;
}

std::vector<Vec> sample_stretched(int d, double b, double p, std::size_t n, std::uint64_t seed) {
  require(d == 2 || d == 3, Errc::InvalidParameter, "dimension must be 2 or 3");
  require(b > 0.0 && p > 0.0, Errc::InvalidParameter, "b and p must be positive");
  // b |v|^p is Gamma(d/p) distributed
  constexpr std::size_t kChunk = 1 << 16;
  std::vector<Vec> out(n, Vec(d));
  parallel_chunks((n + kChunk - 1) / kChunk, [&](std::size_t c) {
    CounterRng g(seed, streams::kSynthetic, c, 0);
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double u = boost::math::gamma_p_inv(d / p, g.uniform());
      const double r = std::pow(u / b, 1.0 / p);
      Vec x(d);
      for (int k = 0; k < d; ++k) x[k] = g.normal();
      out[i] = (r / norm(x)) * x;
    }
  });
  return out;
}

}  // namespace kten
