#pragma once

#include "kten/density.hpp"
#include "kten/kernels.hpp"

namespace kten {

// Split w = a + A with sin A = lambda sin a, 0 < A < pi/2.
struct AngleFrame {
  double w;
  double a;
  double A;
  double lambda;
};

// Unique a in (0, w) with a + asin(lambda sin a) = w. lambda in (0, 1].
AngleFrame solve_angle(double w, double lambda);

enum class SFamily { Inelastic, MixtureLightOnHeavy, MixtureHeavyOnLight, Elastic };

const char* family_name(SFamily f);

struct SFunctionSpec {
  SFamily family = SFamily::Inelastic;
  KernelSpec kernel;      // d, gamma and the angular profile b
  double lambda = 1.0;    // beta/(2-beta), m_i/m_j or m_j/m_i
  double c_a = 0.5;       // weight of cos a in the bracket; c_A = 1 - c_a

  static SFunctionSpec inelastic(const KernelSpec& k, const RestitutionParams& p);
  // Picks the light-on-heavy or heavy-on-light family from the mass order.
  static SFunctionSpec mixture(const KernelSpec& k, const MassPair& m);
  static SFunctionSpec elastic(const KernelSpec& k);

  void validate() const;
  // (c_a cos a + c_A cos A)^{-d-gamma} - 1, or cos^{-d-gamma}(w/2) - 1 when elastic.
  double bracket(double w) const;
};

struct SQuadratureOptions {
  double h0 = 1e-12;       // graded mesh starts this close to 0 and pi
  double ratio = 2.0;
  double hmax = 0.1;
  double refine_tol = 1e-8;
};

// S(r) = r^gamma S1 with S1 = |S^{d-2}| int_0^pi b(cos w) sin^{d-2} w [bracket] dw.
class SFunction {
 public:
  explicit SFunction(SFunctionSpec spec, const SQuadratureOptions& opt = {});
  double S1() const { return s1_; }
  double operator()(double rel_speed) const;
  const SFunctionSpec& spec() const { return spec_; }

 private:
  SFunctionSpec spec_;
  double s1_;
};

// g_at_v * int f(v*) S(|v - v*|) dv*
double Q_ns_apply(const DensityField& f, double g_at_v, const Vec& v, const SFunction& S,
                  const ConvolutionOptions& opt = {});

}  // namespace kten
