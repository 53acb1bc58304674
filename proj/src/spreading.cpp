#include "kten/spreading.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kten/error.hpp"
#include "kten/parallel.hpp"
#include "kten/rng.hpp"

namespace kten {

double Envelope::at(double r) const { return a * std::exp(-b * std::pow(r, p)); }

double envelope_eval(const Envelope& env, const Vec& v) { return env.at(norm(v)); }

void SpreadingConfig::validate() const {
  require(d == 2 || d == 3, Errc::InvalidParameter, "dimension must be 2 or 3");
  require(s > 0.0 && s < 1.0, Errc::InvalidParameter, "s must lie in (0, 1)");
  require(gamma < 0.0 && gamma + 2 * s >= 0.0 && gamma + 2 * s <= 2.0, Errc::InvalidParameter,
          "spreading needs moderately soft potentials: gamma < 0, gamma + 2s in [0, 2]");
  if (model == SpreadModel::Inelastic)
    require(beta > 0.5 && beta < 1.0, Errc::InvalidParameter, "beta must lie in (1/2, 1)");
  else
    require(m_i > 0.0 && m_j > 0.0, Errc::InvalidParameter, "masses must be positive");
  require(T0 > 0.0 && T0 < 1.0, Errc::InvalidParameter, "T0 must lie in (0, 1)");
  require(l0 > 0.0 && l0 < 1.0, Errc::InvalidParameter, "l0 must lie in (0, 1)");
  require(K > 0.0 && std::isfinite(K), Errc::InvalidParameter, "K must be positive");
  require(n_max >= 2, Errc::InvalidParameter, "n_max must be at least 2");
}

double SpreadingConfig::rho() const {
  return model == SpreadModel::Inelastic ? std::sqrt(1.0 + beta * beta) : std::sqrt(2.0);
}

double SpreadingConfig::q() const { return d + 2.0 * (gamma + 2.0 * s + 1.0); }

double SpreadingConfig::p() const {
  return model == SpreadModel::Inelastic ? spreading_exponent(beta) : 2.0;
}

double SpreadingConfig::eps_limit() const { return 1.0 - 1.0 / rho(); }

double spreading_exponent(double beta) {
  require(beta > 0.5 && beta <= 1.0, Errc::InvalidParameter, "beta must lie in (1/2, 1]");
  return 2.0 * std::log(2.0) / std::log1p(beta * beta);
}

double radius_product_limit() {
  // the omitted factors j > 60 change the product by less than 2^{-60}
  double prod = 1.0;
  for (int j = 1; j <= 60; ++j) prod *= 1.0 - std::ldexp(1.0, -j);
  return prod;
}

double SpreadingState::l() const { return std::exp(log_l); }

SpreadingState initial_state(const SpreadingConfig& cfg) {
  cfg.validate();
  SpreadingState st;
  st.log_l = std::log(cfg.l0);
  return st;
}

SpreadingState spreading_step(const SpreadingState& st, const SpreadingConfig& cfg, double t) {
  require(t > 0.0, Errc::InvalidParameter, "step time must be positive");
  const double q = cfg.q();
  const double log_eps = std::log(st.eps), log_R = std::log(st.R);
  const double guard = q * log_eps + (cfg.d + cfg.gamma) * log_R + st.log_l;
  if (!(guard < std::log(0.5))) {
    std::ostringstream os;
    os << "step " << st.n << ": eps^q R^{d+gamma} l = " << std::exp(guard) << " is not below 1/2";
    fail(Errc::GuardViolated, os.str());
  }
  if (!(st.R * st.eps < 1.0)) {
    std::ostringstream os;
    os << "step " << st.n << ": R eps = " << st.R * st.eps << " is not below 1";
    fail(Errc::GuardViolated, os.str());
  }
  const double log_time = std::min(std::log(t), -cfg.gamma * log_R + 2 * cfg.s * log_eps);
  SpreadingState nx;
  nx.n = st.n + 1;
  nx.log_l = std::log(cfg.K) + log_time + q * log_eps + (cfg.d + cfg.gamma) * log_R + 2 * st.log_l;
  nx.R = cfg.rho() * (1.0 - st.eps) * st.R;
  nx.T = (1.0 - std::ldexp(1.0, -nx.n)) * cfg.T0;
  nx.eps = std::ldexp(1.0, -(nx.n + 1));
  return nx;
}

SpreadingResult run_iteration(const SpreadingConfig& cfg) {
  SpreadingResult res;
  res.trace.push_back(initial_state(cfg));
  for (int n = 0; n < cfg.n_max; ++n) {
    const SpreadingState& cur = res.trace.back();
    const double t = cfg.T0 * std::ldexp(1.0, -(n + 1));
    res.trace.push_back(spreading_step(cur, cfg, t));
  }

  Envelope env;
  env.p = cfg.p();
  env.a = cfg.l0;
  // -log(l_n / a) = b R_n^p, least squares over the last three points
  double sxy = 0.0, sxx = 0.0, b_min = 0.0;
  const std::size_t N = res.trace.size();
  for (std::size_t i = 1; i < N; ++i) {
    const double x = std::pow(res.trace[i].R, env.p);
    const double y = std::log(env.a) - res.trace[i].log_l;
    b_min = std::max(b_min, y / x);
    if (i + 3 >= N) {
      sxy += x * y;
      sxx += x * x;
    }
  }
  res.b_fit = sxy / sxx;
  // smallest b keeping every trace level above the envelope, with a rounding margin
  env.b = std::max(res.b_fit, b_min * (1.0 + 1e-12));
  res.envelope = env;
  res.C_proof = -std::pow(1.0 / radius_product_limit(), env.p) * std::log(cfg.l0);
  return res;
}

RegionEstimate region_estimate_at(const Vec& v, double R, double beta, std::uint64_t samples,
                                  std::uint64_t seed) {
  const int d = v.dim();
  require(d == 2 || d == 3, Errc::InvalidParameter, "dimension must be 2 or 3");
  require(R > 0.0, Errc::InvalidParameter, "R must be positive");
  require(beta > 0.5 && beta < 1.0, Errc::InvalidParameter, "beta must lie in (1/2, 1)");
  require(samples >= 2, Errc::InvalidParameter, "need at least two samples");

  constexpr std::uint64_t kChunk = 1 << 16;
  const std::uint64_t nchunks = (samples + kChunk - 1) / kChunk;
  struct Acc {
    double s = 0.0, s2 = 0.0;
    std::uint64_t hits = 0;
  };
  std::vector<Acc> part(nchunks);
  const double disk_unit = ball_volume(d - 1);
  const double ib = 1.0 / beta;
  parallel_chunks(nchunks, [&](std::size_t c) {
    CounterRng g(seed, streams::kRegion, c, 0);
    Acc acc;
    const std::uint64_t end = std::min<std::uint64_t>(samples, (c + 1) * kChunk);
    for (std::uint64_t i = c * kChunk; i < end; ++i) {
      Vec u(d);
      for (int k = 0; k < d; ++k) u[k] = g.normal();
      u = (R * std::pow(g.uniform(), 1.0 / d) / norm(u)) * u;
      const Vec w = u - v;
      const double wn = norm(w);
      if (wn == 0.0) continue;
      const Vec P = ib * v - (ib - 1.0) * u;
      const double dist = std::abs(dot(P, w)) / wn;
      if (dist >= R) continue;
      const double area = disk_unit * std::pow(R * R - dist * dist, 0.5 * (d - 1));
      acc.s += area;
      acc.s2 += area * area;
      ++acc.hits;
    }
    part[c] = acc;
  });
  Acc tot;
  for (const Acc& a : part) {
    tot.s += a.s;
    tot.s2 += a.s2;
    tot.hits += a.hits;
  }
  const double n = double(samples);
  const double mean = tot.s / n;
  const double var = std::max(0.0, (tot.s2 / n - mean * mean) * n / (n - 1));
  const double vol = ball_volume(d) * std::pow(R, d);
  RegionEstimate r;
  r.estimate = mean * vol;
  r.stderr_ = std::sqrt(var / n) * vol;
  r.degenerate = tot.hits == 0;
  return r;
}

RegionEstimate region_estimate_mc(double R, double eps, double beta, int d,
                                  std::uint64_t samples, std::uint64_t seed) {
  require(beta > 0.5 && beta < 1.0, Errc::InvalidParameter, "beta must lie in (1/2, 1)");
  const double rho = std::sqrt(1.0 + beta * beta);
  if (!(eps > 0.0 && eps < 1.0 - 1.0 / rho)) {
    std::ostringstream os;
    os << "eps = " << eps << " outside (0, " << 1.0 - 1.0 / rho << ")";
    fail(Errc::EpsOutOfRange, os.str());
  }
  return region_estimate_at(Vec::axis(d, 0, rho * (1.0 - eps) * R), R, beta, samples, seed);
}

}  // namespace kten
