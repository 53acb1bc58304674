#pragma once

#include <cstdint>
#include <vector>

#include "kten/geometry.hpp"
#include "kten/vec.hpp"

namespace kten {

// a exp(-b |v|^p)
struct Envelope {
  double a = 1.0;
  double b = 1.0;
  double p = 2.0;
  double at(double r) const;
};

double envelope_eval(const Envelope& env, const Vec& v);

enum class SpreadModel { Inelastic, Mixture };

struct SpreadingConfig {
  int d = 3;
  double gamma = -1.0;
  double s = 0.5;
  SpreadModel model = SpreadModel::Inelastic;
  double beta = 0.8;
  double m_i = 1.0, m_j = 2.0;  // mixture only; the radius growth does not depend on them
  double T0 = 0.5;
  double l0 = 0.1;
  double K = 1e-3;
  int n_max = 30;

  void validate() const;
  double rho() const;          // sqrt(1 + beta^2) or sqrt(2)
  double q() const;            // d + 2 (gamma + 2s + 1)
  double p() const;            // log 2 / log rho
  double eps_limit() const;    // 1 - 1/rho
};

// log 2 / log sqrt(1 + beta^2)
double spreading_exponent(double beta);

// prod_{j >= 1} (1 - 2^{-j})
double radius_product_limit();

struct SpreadingState {
  int n = 0;
  double T = 0.0;
  double R = 1.0;
  double eps = 0.5;
  double log_l = 0.0;  // levels underflow quickly, so the log is the primary value
  double l() const;
};

SpreadingState initial_state(const SpreadingConfig& cfg);

// One update with elapsed time t. Throws GuardViolated when
// eps^q R^{d+gamma} l >= 1/2 or R eps >= 1.
SpreadingState spreading_step(const SpreadingState& st, const SpreadingConfig& cfg, double t);

struct SpreadingResult {
  std::vector<SpreadingState> trace;
  Envelope envelope;
  double b_fit;       // from the last three trace points
  double C_proof;     // -(1 / C2)^p log l0
};

// Runs n_max steps with t = T_{n+1} - T_n and fits an envelope dominated by the trace.
SpreadingResult run_iteration(const SpreadingConfig& cfg);

struct RegionEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  bool degenerate = false;  // no sampled plane met the ball
};

// Monte Carlo over u in B_R of the (d-1)-volume of E_{Pu'} cut by B_R, with
// u' = v, times |B_R|. Deterministic for a given seed and any thread count.
RegionEstimate region_estimate_at(const Vec& v, double R, double beta, std::uint64_t samples,
                                  std::uint64_t seed = 1);

// Same with |v| = rho (1 - eps) R on the first axis. eps must lie in (0, 1 - 1/rho).
RegionEstimate region_estimate_mc(double R, double eps, double beta, int d,
                                  std::uint64_t samples, std::uint64_t seed = 1);

}  // namespace kten
