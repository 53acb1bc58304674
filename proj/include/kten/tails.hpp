#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kten/spreading.hpp"
#include "kten/vec.hpp"

namespace kten {

// Isotropized speed histogram. densities[k] estimates f at speeds in bin k:
// mass * counts[k] / (samples * shell volume).
struct TailHistogram {
  int d = 3;
  std::vector<double> edges;  // size bins + 1, strictly increasing, edges[0] = 0
  std::vector<std::uint64_t> counts;
  std::vector<double> densities;
  double mass = 1.0;
  std::uint64_t samples = 0;
  double sigma = 0.0;  // per-component speed scale sqrt(<|v|^2> / d)

  std::size_t bins() const { return counts.size(); }
  double center(std::size_t k) const { return 0.5 * (edges[k] + edges[k + 1]); }
  double shell_volume(std::size_t k) const;
};

// Histogram of |v| over [0, r_max] with equal-width bins; r_max <= 0 covers every sample.
TailHistogram make_tail_histogram(const std::vector<Vec>& v, double mass, int bins = 200,
                                  double r_max = 0.0);

struct TailFit {
  double p_hat = 0.0;
  double b_hat = 0.0;
  double a_hat = 0.0;
  double r2 = 0.0;
  std::size_t bins_used = 0;
};

// [2 sigma, 4 sigma] of the histogram's speed scale.
std::pair<double, double> default_fit_window(const TailHistogram& h);

// Shrinks the window's upper end to the last bin before any bin with count < min_count.
std::pair<double, double> resolved_window(const TailHistogram& h, double lo, double hi,
                                          std::uint64_t min_count = 10);

// Least squares of log(-log(f / a_hat)) against log|v| over bins centred in [lo, hi].
// Every such bin needs count >= 10 and there must be at least 8 of them.
TailFit fit_tail_exponent(const TailHistogram& h, double lo, double hi);

enum class BinStatus { Dominated, Violated, Unresolved };

struct BinCheck {
  double r = 0.0;
  double density = 0.0;
  double upper = 0.0;     // Poisson upper confidence bound on the density
  double envelope = 0.0;
  BinStatus status = BinStatus::Unresolved;
};

struct DominationReport {
  std::vector<BinCheck> bins;
  std::vector<std::size_t> violations;
  std::vector<std::size_t> unresolved;
  double resolved_lo = 0.0, resolved_hi = 0.0;  // centres of the first and last nonempty bins
  bool dominated() const { return violations.empty(); }
};

// A bin violates the envelope only when even the upper confidence bound on its
// density is below it. Empty bins are unresolved.
DominationReport check_envelope(const TailHistogram& h, const Envelope& env,
                                double confidence = 0.99);

struct TimedHistogram {
  double t = 0.0;
  TailHistogram hist;
};

struct UniformityReport {
  std::vector<double> times;
  std::vector<DominationReport> reports;
  bool uniform = true;
  std::optional<double> earliest_failure;
};

// check_envelope at every time t > t0.
UniformityReport uniformity_scan(const std::vector<TimedHistogram>& series, const Envelope& env,
                                 double t0);

// Exact samples from the isotropic density proportional to exp(-b |v|^p).
std::vector<Vec> sample_stretched(int d, double b, double p, std::size_t n, std::uint64_t seed);

}  // namespace kten
