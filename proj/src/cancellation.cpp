#include "kten/cancellation.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "kten/error.hpp"

namespace kten {

namespace {

constexpr double kPi = std::numbers::pi;

double split_residual(double a, double w, double lambda) {
  return a + std::asin(std::min(1.0, lambda * std::sin(a))) - w;
}

// Exponent k of F ~ C x^k fitted from two points near the endpoint.
double local_exponent(double x1, double F1, double x2, double F2) {
  if (F1 <= 0.0 || F2 <= 0.0) return 0.0;
  return std::log(F2 / F1) / std::log(x2 / x1);
}

}  // namespace

AngleFrame solve_angle(double w, double lambda) {
  require(w > 0.0 && w <= kPi, Errc::InvalidParameter, "w must lie in (0, pi]");
  require(lambda > 0.0 && lambda <= 1.0, Errc::InvalidParameter, "lambda must lie in (0, 1]");
  if (w == kPi) return {w, kPi, 0.0, lambda};

  double lo = std::max(0.0, w - kPi / 2), hi = w;
  int it = 0;
  while (hi - lo > 1e-6 * w) {
    const double mid = 0.5 * (lo + hi);
    (split_residual(mid, w, lambda) < 0.0 ? lo : hi) = mid;
    if (++it > 200) break;
  }
  double a = 0.5 * (lo + hi);
  // safeguarded Newton; falls back to bisection where the slope vanishes
  for (int k = 0; k < 100; ++k) {
    const double g = split_residual(a, w, lambda);
    if (std::abs(g) <= 1e-15 * w) break;
    (g < 0.0 ? lo : hi) = a;
    const double sa = lambda * std::sin(a);
    const double dg = 1.0 + lambda * std::cos(a) / std::sqrt(std::max(0.0, 1.0 - sa * sa));
    double next = a - g / dg;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (next == a) break;
    a = next;
  }
  const double res = split_residual(a, w, lambda);
  if (!(std::abs(res) < 1e-13)) {
    std::ostringstream os;
    os << "angle split did not converge for w = " << w << ", lambda = " << lambda
       << ", bracket [" << lo << ", " << hi << "]";
    fail(Errc::ConvergenceFailure, os.str());
  }
  return {w, a, w - a, lambda};
}

const char* family_name(SFamily f) {
  switch (f) {
    case SFamily::Inelastic: return "inelastic";
    case SFamily::MixtureLightOnHeavy: return "mixture_light_on_heavy";
    case SFamily::MixtureHeavyOnLight: return "mixture_heavy_on_light";
    case SFamily::Elastic: return "elastic";
  }
  return "?";
}

SFunctionSpec SFunctionSpec::inelastic(const KernelSpec& k, const RestitutionParams& p) {
  SFunctionSpec s;
  s.family = SFamily::Inelastic;
  s.kernel = k;
  s.lambda = p.beta / (2.0 - p.beta);
  s.c_a = p.beta / 2.0;
  return s;
}

SFunctionSpec SFunctionSpec::mixture(const KernelSpec& k, const MassPair& m) {
  require(m.m_i != m.m_j, Errc::EqualMasses, "mixture S needs distinct masses; use elastic");
  SFunctionSpec s;
  s.kernel = k;
  if (m.m_i < m.m_j) {
    s.family = SFamily::MixtureLightOnHeavy;
    s.lambda = m.m_i / m.m_j;
    s.c_a = m.m_i / m.total();
  } else {
    s.family = SFamily::MixtureHeavyOnLight;
    s.lambda = m.m_j / m.m_i;
    s.c_a = m.m_j / m.total();
  }
  return s;
}

SFunctionSpec SFunctionSpec::elastic(const KernelSpec& k) {
  SFunctionSpec s;
  s.family = SFamily::Elastic;
  s.kernel = k;
  return s;
}

void SFunctionSpec::validate() const {
  require(kernel.d == 2 || kernel.d == 3, Errc::InvalidParameter, "dimension must be 2 or 3");
  require(kernel.gamma > -kernel.d, Errc::InvalidParameter, "gamma must exceed -d");
  require(!kernel.cutoff, Errc::InvalidParameter, "S is defined for noncutoff kernels");
  require(kernel.s > 0.0 && kernel.s < 1.0, Errc::InvalidParameter, "s must lie in (0, 1)");
  if (family != SFamily::Elastic) {
    require(lambda > 0.0 && lambda < 1.0, Errc::InvalidParameter, "lambda must lie in (0, 1)");
    require(c_a > 0.0 && c_a < 0.5, Errc::InvalidParameter, "c_a must lie in (0, 1/2)");
  }
}

double SFunctionSpec::bracket(double w) const {
  const double p = -(kernel.d + kernel.gamma);
  double xm1;  // x - 1, kept accurate near w = 0
  if (family == SFamily::Elastic) {
    const double q = std::sin(w / 4);
    xm1 = -2.0 * q * q;
  } else {
    const AngleFrame fr = solve_angle(w, lambda);
    const double sa = std::sin(fr.a / 2), sA = std::sin(fr.A / 2);
    xm1 = -2.0 * (c_a * sa * sa + (1.0 - c_a) * sA * sA);
  }
  return std::expm1(p * std::log1p(xm1));
}

SFunction::SFunction(SFunctionSpec spec, const SQuadratureOptions& opt) : spec_(std::move(spec)) {
  spec_.validate();
  const KernelSpec& k = spec_.kernel;
  const double area = sphere_area(k.d - 2);
  auto F = [&](double w) {
    const double sw = k.d == 3 ? std::sin(w) : 1.0;
    return area * k.b_angle(w) * sw * spec_.bracket(w);
  };

  auto integrate = [&](int order, double& left_k, double& right_k) {
    Rule1D r = graded_gl(order, 0.0, kPi / 2, opt.h0, opt.ratio, opt.hmax);
    const std::size_t nl = r.size();
    r.append(graded_gl_right(order, kPi / 2, kPi, opt.h0, opt.ratio, opt.hmax));
    std::vector<double> v(r.size());
    double total = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      v[i] = F(r.x[i]);
      total += r.w[i] * v[i];
    }
    const std::size_t o = std::size_t(order), n = r.size();
    // slivers next to both endpoints from the local power law
    const double k0 = local_exponent(r.x[0], v[0], r.x[o - 1], v[o - 1]);
    const double dr1 = kPi - r.x[n - 1], dr2 = kPi - r.x[n - o];
    const double kpi = local_exponent(dr1, v[n - 1], dr2, v[n - o]);
    // singularity strength across consecutive panels where the profile is resolved
    left_k = k0;
    right_k = kpi;
    for (std::size_t i = 0; i + o < nl; ++i)
      if (r.x[i] >= 1e-7 && r.x[i] <= 1e-2)
        left_k = std::min(left_k, local_exponent(r.x[i], v[i], r.x[i + o], v[i + o]));
    for (std::size_t i = n - 1; i >= nl + o; --i) {
      const double e1 = kPi - r.x[i], e2 = kPi - r.x[i - o];
      if (e1 >= 1e-7 && e1 <= 1e-2) right_k = std::min(right_k, local_exponent(e1, v[i], e2, v[i - o]));
    }
    if (k0 > -1.0 && v[0] > 0.0)
      total += v[0] / std::pow(r.x[0], k0) * std::pow(opt.h0, k0 + 1) / (k0 + 1);
    if (kpi > -1.0 && v[n - 1] > 0.0)
      total += v[n - 1] / std::pow(dr1, kpi) * std::pow(opt.h0, kpi + 1) / (kpi + 1);
    return total;
  };

  double kl1, kr1, kl2, kr2;
  const double coarse = integrate(16, kl1, kr1);
  const double fine = integrate(24, kl2, kr2);
  if (kl2 <= -1.0 + 1e-3 || kr2 <= -1.0 + 1e-3 || !std::isfinite(fine)) {
    std::ostringstream os;
    os << "S integrand is not integrable: endpoint exponents " << kl2 << " (w -> 0), " << kr2
       << " (w -> pi)";
    fail(Errc::DivergentIntegral, os.str());
  }
  if (std::abs(fine - coarse) > opt.refine_tol * std::abs(fine)) {
    std::ostringstream os;
    os << "S quadrature refinements disagree: " << coarse << " vs " << fine;
    fail(Errc::QuadratureTruncation, os.str());
  }
  require(fine > 0.0, Errc::NonFiniteResult, "S integral is not positive");
  s1_ = fine;
}

double SFunction::operator()(double rel_speed) const {
  require(rel_speed > 0.0, Errc::InvalidParameter, "relative speed must be positive");
  return std::pow(rel_speed, spec_.kernel.gamma) * s1_;
}

double Q_ns_apply(const DensityField& f, double g_at_v, const Vec& v, const SFunction& S,
                  const ConvolutionOptions& opt) {
  if (g_at_v == 0.0) return 0.0;
  return g_at_v * S.S1() * potential_convolution(f, v, S.spec().kernel.gamma, opt);
}

}  // namespace kten
