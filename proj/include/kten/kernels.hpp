#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "kten/density.hpp"
#include "kten/geometry.hpp"
#include "kten/quadrature.hpp"
#include "kten/stats.hpp"

namespace kten {

enum class Model { Inelastic, Mixture, Elastic };

const char* model_name(Model m);

struct KernelSpec {
  int d = 3;
  double gamma = -1.0;
  double s = 0.5;
  Model model = Model::Inelastic;
  bool cutoff = false;
  // b~(cos theta) for noncutoff kernels, h(theta) on [0, pi/2] for cutoff ones
  std::function<double(double)> btilde = [](double) { return 1.0; };
  std::function<double(double)> h = [](double) { return 1.0; };
  double theta_min = 0.0;
  bool moderately_soft = false;

  // Checks parameter ranges and integrability of the angular profile.
  void validate() const;

  // 2^{d-2} for the inelastic model, 2^{d-1} for mixture and elastic.
  double normalization() const;

  // Assembled angular kernel b(cos theta) (noncutoff) or h(theta) (cutoff).
  double b(double cos_theta) const;
  // Same profile evaluated from the angle, accurate as theta -> 0.
  double b_angle(double theta) const;

  // |S^{d-2}| int_{theta_min}^{pi} b sin^{d-2}; for cutoff kernels the
  // half-sphere integral |S^{d-2}| int_0^{pi/2} h sin^{d-2}.
  double angular_integral() const;
};

// |v - v*|^gamma b(cos theta). With enforce_theta_min, angles below
// spec.theta_min raise SingularAngle.
double eval_B(double rel_speed, double cos_theta, const KernelSpec& spec,
              bool enforce_theta_min = false);

// Which Carleman form to integrate. All three share the layout
//   base = c x + (1 - c) y, prefactor = c^{-2s},
// where x is the evaluation point and y the integration variable.
enum class CarlemanKind { Inelastic, LightOnHeavy, HeavyOnLight };

struct CarlemanSetup {
  CarlemanKind kind;
  double c;           // 1/beta or (m_i + m_j)/(2 m_j)
  double mass_ratio;  // m_i / m_j (mixture only)

  static CarlemanSetup inelastic(const RestitutionParams& p);
  static CarlemanSetup mixture(const MassPair& m);  // EqualMasses when m_i == m_j
  // Base point of the hyperplane for evaluation point x and variable y.
  Vec base(const Vec& x, const Vec& y) const { return c * x + (1.0 - c) * y; }
  // cos(theta) of the collision encoded by (x, y, plane node).
  double cos_theta(const Vec& x, const Vec& y, const Vec& node) const;
};

enum class KernelVariant { Exact, Symmetrized };

struct PlaneOptions {
  double trunc_sigmas = 12.0;  // truncation radius in units of f.scale()
  double panel_sigmas = 1.0;   // radial panel width in units of f.scale()
  int radial_order = 8;
  int angular_nodes = 48;      // circle nodes for d = 3
};

// Quadrature on the hyperplane through base_point with the given normal.
// Polar coordinates are centred at `origin`, which is the base point unless
// the density bulk projects far from it.
struct HyperplaneQuadrature {
  Vec base_point;
  Vec normal;
  Vec origin;
  Rule1D radial;
  SphereRule angular;
  double R_trunc;

  static HyperplaneQuadrature build(const Vec& base_point, const Vec& normal,
                                    const DensityField& f, const PlaneOptions& opt = {});
  // Sum of weights times rho^{d-2}: the (d-1)-volume of the truncated disk.
  double disk_volume() const;
  template <class F>
  double integrate(F&& fn) const {
    const int d = base_point.dim();
    double total = 0.0;
    for (std::size_t i = 0; i < radial.size(); ++i) {
      const double rho = radial.x[i];
      const double jac = (d == 3) ? rho : 1.0;
      double ring = 0.0;
      for (std::size_t k = 0; k < angular.size(); ++k)
        ring += angular.w[k] * fn(origin + rho * angular.nodes[k]);
      total += radial.w[i] * jac * ring;
    }
    return total;
  }
};

// Carleman kernel value at integration variable u and evaluation point u_prime.
double carleman_kernel(const Vec& u, const Vec& u_prime, const DensityField& f,
                       const KernelSpec& spec, const CarlemanSetup& setup,
                       KernelVariant variant = KernelVariant::Exact,
                       const PlaneOptions& opt = {});

// K_f(u, u') and its symmetrized bound for the inelastic model.
double K_f_inelastic(const Vec& u, const Vec& u_prime, const DensityField& f,
                     const KernelSpec& spec, const RestitutionParams& p,
                     KernelVariant variant = KernelVariant::Exact, const PlaneOptions& opt = {});

// Mixture kernels. u_prime is the evaluation point and u the integration
// variable: for m_i < m_j this is K_{f_j}(v = u_prime, v' = u), for m_i > m_j
// it is K'_{f_j}(u, u').
double K_f_mixture(const Vec& u, const Vec& u_prime, const DensityField& f,
                   const KernelSpec& spec, const MassPair& m,
                   KernelVariant variant = KernelVariant::Exact, const PlaneOptions& opt = {});

struct ScalingOptions {
  int sphere_theta = 4;
  int sphere_phi = 8;
  double l_min = 1e-9;   // below: power-law tail estimate
  double l_max = 1e5;    // above: power-law tail estimate
  double ratio = 2.0;    // geometric panel ratio
  int order = 8;
  PlaneOptions plane;
};

struct ScalingReport {
  std::vector<double> r;
  std::vector<double> inner;  // int_{B_r(u')} |u - u'|^2 Kbar du
  std::vector<double> outer;  // int_{|u - u'| > r} K du
  LinearFit small_inner;      // r <= 1, expected 2 - 2s
  LinearFit small_outer;      // r <= 1, expected -2s
  LinearFit large_inner;      // r > 1, bound gamma + 3
  LinearFit large_outer;      // r > 1, expected gamma
};

ScalingReport verify_Kf_scaling(const DensityField& f, const KernelSpec& spec,
                                const CarlemanSetup& setup, const Vec& u_prime,
                                const std::vector<double>& r_grid,
                                const ScalingOptions& opt = {});

// C^2 test function with the sup norms needed by the Q^s bound.
struct TestFunction {
  std::function<double(const Vec&)> value;
  double sup = 0.0;
  double grad_sup = 0.0;
  double hess_sup = 0.0;
};

TestFunction gaussian_bump(const Vec& center, double width);
TestFunction constant_function(double c);
// Radial bump equal to 1 on |u| <= rho (1 - eps) R and 0 beyond rho (1 - eps/2) R,
// rho = sqrt(1 + beta^2), with a C^2 quintic transition.
TestFunction spreading_bump(double R, double eps, double beta);
TestFunction linear_combination(double a, const TestFunction& p1, double b,
                                const TestFunction& p2);

struct QsOptions {
  std::optional<double> r_split;  // default 0.1 (1 + |v|)
  double l_min_rel = 1e-5;        // inner sliver below r_split * l_min_rel
  double l_max = 60.0;            // outer truncation (plus tail estimate)
  int sphere_theta = 4;
  int sphere_phi = 8;
  int order = 8;
  PlaneOptions plane{12.0, 1.0, 6, 32};
};

struct QsResult {
  double value;
  double bound;  // ||psi||^{1-s} max(||D2 psi||, ||D psi||)^s (1 + |v|)^{gamma + 2s}
  double ratio;  // |value| / bound
};

QsResult Q_s_apply(const DensityField& f, const TestFunction& psi, const Vec& v,
                   const KernelSpec& spec, const CarlemanSetup& setup,
                   const QsOptions& opt = {});

struct ConvolutionOptions {
  double trunc_sigmas = 12.0;
  int order = 16;
  int sphere_theta = 24;
  int sphere_phi = 48;
};

// int |v - v*|^gamma f(v*) dv*
double potential_convolution(const DensityField& f, const Vec& v, double gamma,
                             const ConvolutionOptions& opt = {});

// Loss rate L(f)(v) = (|S^{d-2}| int_0^{pi/2} h sin^{d-2}) int |v - v*|^gamma f(v*) dv*.
double cutoff_loss_rate(const DensityField& f, const Vec& v, const KernelSpec& spec,
                        const ConvolutionOptions& opt = {});

struct LossHistory {
  std::vector<double> t;  // strictly increasing
  std::vector<double> L;  // total loss rate at v, summed over species
};

// exp(-int_{t1}^{t2} L dt), trapezoidal rule with linear interpolation at t1, t2.
double duhamel_factor(const LossHistory& h, double t1, double t2);

// exp(-C (t2 - t1) (1 + R^gamma))
double duhamel_lower_bound(double C, double t1, double t2, double R, double gamma);

}  // namespace kten
