#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kten/kernels.hpp"
#include "kten/rng.hpp"

using namespace kten;

namespace {

constexpr double kPi = std::numbers::pi;

KernelSpec soft_spec(Model m = Model::Inelastic) {
  KernelSpec s;
  s.d = 3;
  s.gamma = -1.0;
  s.s = 0.5;
  s.model = m;
  s.moderately_soft = true;
  return s;
}

// Brute-force midpoint sum over a square patch of the plane through `base`
// orthogonal to `normal`. Independent of the polar quadrature under test.
template <class F>
double plane_bruteforce(const Vec& base, const Vec& normal, double half, int n, F&& fn) {
  const PlaneBasis pb = orthogonal_basis(normal);
  const double h = 2.0 * half / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = -half + (i + 0.5) * h, b = -half + (j + 0.5) * h;
      s += fn(base + a * pb.e[0] + b * pb.e[1]);
    }
  return s * h * h;
}

// Wraps a density but hides its isotropy so the generic code path runs.
struct Anisotropic final : DensityField {
  const DensityField& f;
  explicit Anisotropic(const DensityField& g) : f(g) {}
  double operator()(const Vec& v) const override { return f(v); }
  int dim() const override { return f.dim(); }
  double mass() const override { return f.mass(); }
  double energy() const override { return f.energy(); }
  Vec center() const override { return f.center(); }
  double scale() const override { return f.scale(); }
  bool analytic() const override { return true; }
};

}  // namespace

TEST_CASE("angular kernel normalization") {
  KernelSpec s;
  s.d = 3;
  s.gamma = 0.0;
  s.s = 0.5;
  // theta = pi/2: (2^{-1/2})^{gamma - d + 2} / 2^{d-2}
  CHECK(eval_B(1.0, 0.0, s) == doctest::Approx(std::sqrt(2.0) / 2.0));
  s.model = Model::Mixture;
  CHECK(eval_B(1.0, 0.0, s) == doctest::Approx(std::sqrt(2.0) / 4.0));

  KernelSpec t = soft_spec();
  const double c = std::cos(0.7);
  CHECK(eval_B(2.0, c, t) == doctest::Approx(0.5 * eval_B(1.0, c, t)));
  CHECK_THROWS_AS(eval_B(0.0, c, t), Error);

  // b theta^{d-1+2s} -> 2^{d-1+2s} / 2^{d-2} = 4 for d = 3, s = 1/2
  for (double th : {1e-3, 1e-5}) CHECK(t.b(std::cos(th)) * th * th * th == doctest::Approx(4.0).epsilon(1e-5));

  t.theta_min = 0.1;
  CHECK_THROWS_AS(eval_B(1.0, std::cos(0.05), t, true), Error);
  CHECK_NOTHROW(eval_B(1.0, std::cos(0.2), t, true));
}

TEST_CASE("kernel spec validation") {
  KernelSpec s = soft_spec();
  CHECK_NOTHROW(s.validate());
  s.gamma = -2.0;  // gamma + 2s = -1
  CHECK_THROWS_AS(s.validate(), Error);
  s = soft_spec();
  s.s = 1.2;
  CHECK_THROWS_AS(s.validate(), Error);
  KernelSpec c;
  c.cutoff = true;
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c.gamma = 1.0;
  CHECK_NOTHROW(c.validate());
  // |S^1| int_0^{pi/2} sin = 2 pi
  CHECK(c.angular_integral() == doctest::Approx(2 * kPi).epsilon(1e-12));
  s = soft_spec();
  CHECK_THROWS_AS(s.angular_integral(), Error);
  s.theta_min = 0.01;
  // compare with a dense midpoint rule on [theta_min, pi]
  double ref = 0.0;
  const int n = 2000000;
  const double h = (kPi - 0.01) / n;
  for (int i = 0; i < n; ++i) {
    const double th = 0.01 + (i + 0.5) * h;
    ref += s.b(std::cos(th)) * std::sin(th) * h;
  }
  CHECK(s.angular_integral() == doctest::Approx(2 * kPi * ref).epsilon(1e-6));
}

TEST_CASE("hyperplane quadrature integrates the disk") {
  GaussianDensity f(3);
  const auto q = HyperplaneQuadrature::build(Vec{0.3, 0.1, -0.2}, normalized(Vec{1, 2, 3}), f);
  CHECK(q.disk_volume() == doctest::Approx(kPi * q.R_trunc * q.R_trunc).epsilon(1e-8));
  GaussianDensity f2(2);
  const auto q2 = HyperplaneQuadrature::build(Vec{0.3, 0.1}, normalized(Vec{1, 2}), f2);
  CHECK(q2.disk_volume() == doctest::Approx(2 * q2.R_trunc).epsilon(1e-12));
}

TEST_CASE("inelastic Carleman kernel against brute force") {
  const KernelSpec s = soft_spec();
  const auto p = RestitutionParams::from_beta(0.8);
  GaussianDensity f(3);
  ZeroDensity z(3);
  const Vec up{0.2, -0.1, 0.3};
  const Vec u{0.9, 0.4, -0.2};
  CHECK(K_f_inelastic(u, up, z, s, p) == 0.0);
  CHECK_THROWS_AS(K_f_inelastic(up, up, f, s, p), Error);

  const double r = distance(u, up);
  const Vec P = (1 / p.beta) * up - (1 / p.beta - 1) * u;
  const Vec n = (u - up) / r;
  for (auto var : {KernelVariant::Exact, KernelVariant::Symmetrized}) {
    const Vec& anchor = var == KernelVariant::Exact ? P : up;
    const double brute = plane_bruteforce(P, n, 9.0, 1200, [&](const Vec& x) {
      return distance(x, anchor) * f(x);  // gamma + 2s + 1 = 1, b~ = 1
    });
    const double ref = std::pow(p.beta, 2 * s.s) / std::pow(r, s.d + 2 * s.s) * brute;
    CHECK(K_f_inelastic(u, up, f, s, p, var) == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("Carleman kernel small-r exponent") {
  const KernelSpec s = soft_spec();
  const auto p = RestitutionParams::from_beta(0.8);
  GaussianDensity f(3);
  const Vec up(3);
  const Vec dir = normalized(Vec{1, 1, 0});
  const double k2 = K_f_inelastic(1e-2 * dir, up, f, s, p);
  const double k3 = K_f_inelastic(1e-3 * dir, up, f, s, p);
  const double slope = std::log(k2 / k3) / std::log(10.0);
  CHECK(slope == doctest::Approx(-(s.d + 2 * s.s)).epsilon(0.01));
}

TEST_CASE("symmetrized kernel symmetry and domination") {
  const KernelSpec s = soft_spec();
  const auto p = RestitutionParams::from_beta(0.8);
  GaussianDensity f(3);
  const Vec up(3);
  CounterRng g(7, streams::kGeometry, 1, 0);
  for (int i = 0; i < 20; ++i) {
    const Vec w{g.normal(), g.normal(), g.normal()};
    const double a = K_f_inelastic(up + w, up, f, s, p, KernelVariant::Symmetrized);
    const double b = K_f_inelastic(up - w, up, f, s, p, KernelVariant::Symmetrized);
    CHECK(std::abs(a - b) <= 1e-8 * a);
  }
  const PlaneOptions light{12.0, 1.0, 6, 24};
  const MassPair lh(1.0, 2.0), hl(2.0, 1.0);
  int bad = 0;
  for (int i = 0; i < 300; ++i) {
    const Vec u{g.normal(), g.normal(), g.normal()};
    const Vec v{g.normal(), g.normal(), g.normal()};
    bad += K_f_inelastic(u, v, f, s, p, KernelVariant::Exact, light) >
           K_f_inelastic(u, v, f, s, p, KernelVariant::Symmetrized, light);
    bad += K_f_mixture(u, v, f, s, lh, KernelVariant::Exact, light) >
           K_f_mixture(u, v, f, s, lh, KernelVariant::Symmetrized, light);
    bad += K_f_mixture(u, v, f, s, hl, KernelVariant::Exact, light) >
           K_f_mixture(u, v, f, s, hl, KernelVariant::Symmetrized, light);
  }
  CHECK(bad == 0);
}

TEST_CASE("mixture kernel tends to the equal-mass kernel") {
  const KernelSpec s = soft_spec(Model::Mixture);
  GaussianDensity f(3);
  const Vec x{0.1, 0.2, -0.3}, y{0.6, -0.2, 0.1};
  // equal masses: plane through x orthogonal to y - x, weight |x - v*'|
  const double r = distance(x, y);
  const double brute =
      plane_bruteforce(x, (y - x) / r, 9.0, 1200, [&](const Vec& z) { return distance(z, x) * f(z); });
  const double ref = brute / std::pow(r, 4.0);
  CHECK(K_f_mixture(y, x, f, s, MassPair(1.0, 1.001)) == doctest::Approx(ref).epsilon(1e-3));
  CHECK(K_f_mixture(y, x, f, s, MassPair(1.001, 1.0)) == doctest::Approx(ref).epsilon(1e-3));
  CHECK_THROWS_AS(K_f_mixture(y, x, f, s, MassPair(1.0, 1.0)), Error);
}

TEST_CASE("scaling report needs enough radii") {
  const KernelSpec s = soft_spec();
  GaussianDensity f(3);
  const auto setup = CarlemanSetup::inelastic(RestitutionParams::from_beta(0.8));
  CHECK_THROWS_AS(verify_Kf_scaling(f, s, setup, Vec(3), {0.1, 0.2, 2.0, 3.0}), Error);
}

TEST_CASE("Q^s of test functions") {
  const KernelSpec s = soft_spec();
  const auto setup = CarlemanSetup::inelastic(RestitutionParams::from_beta(0.8));
  GaussianDensity f(3);
  QsOptions o;
  o.l_max = 30.0;
  o.plane = {10.0, 1.5, 6, 16};
  const Vec v{0.3, 0.0, 0.2};
  const auto c = Q_s_apply(f, constant_function(2.5), v, s, setup, o);
  CHECK(c.value == 0.0);

  const auto p1 = gaussian_bump(Vec{0.5, 0, 0}, 0.8);
  const auto p2 = gaussian_bump(Vec{-0.2, 0.4, 0}, 1.3);
  const auto q1 = Q_s_apply(f, p1, v, s, setup, o);
  const auto q2 = Q_s_apply(f, p2, v, s, setup, o);
  const auto q12 = Q_s_apply(f, linear_combination(2.0, p1, -0.7, p2), v, s, setup, o);
  CHECK(q12.value == doctest::Approx(2.0 * q1.value - 0.7 * q2.value).epsilon(1e-9));
  CHECK(std::isfinite(q1.ratio));
  CHECK(q1.ratio > 0.0);
}

TEST_CASE("potential convolution against closed forms") {
  GaussianDensity f(3, 1.7, 0.8);
  // Coulomb potential of a Gaussian: M erf(|v| / sqrt(2 T)) / |v|
  for (double r : {0.0, 0.3, 1.5, 4.0, 20.0}) {
    const Vec v = r * normalized(Vec{1, -2, 0.5});
    const double ref = r == 0.0 ? 1.7 * std::sqrt(2.0 / (kPi * 0.8))
                                : 1.7 * std::erf(r / std::sqrt(1.6)) / r;
    CHECK(potential_convolution(f, v, -1.0) == doctest::Approx(ref).epsilon(1e-9));
    Anisotropic a(f);
    CHECK(potential_convolution(a, v, -1.0) == doctest::Approx(ref).epsilon(1e-5));
  }
  // gamma = 0 gives the mass; the generic path in d = 2 as well
  GaussianDensity f2(2, 0.6, 1.2, Vec{0.4, -0.1});
  CHECK(potential_convolution(f2, Vec{1.0, 2.0}, 0.0) == doctest::Approx(0.6).epsilon(1e-9));
  // d = 2, gamma = 1 against a Cartesian midpoint sum
  double ref = 0.0;
  const int n = 1600;
  const double L = 12.0, h = 2 * L / n;
  const Vec v{0.7, 0.2};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vec x{-L + 0.4 + (i + 0.5) * h, -L - 0.1 + (j + 0.5) * h};
      ref += distance(v, x) * f2(x) * h * h;
    }
  CHECK(potential_convolution(f2, v, 1.0) == doctest::Approx(ref).epsilon(1e-5));
}

TEST_CASE("cutoff loss rate") {
  KernelSpec c;
  c.cutoff = true;
  c.gamma = 0.0;
  GaussianDensity f(3, 2.0);
  CHECK(cutoff_loss_rate(f, Vec{3, 0, 0}, c) == doctest::Approx(2 * kPi * 2.0).epsilon(1e-10));
  c.gamma = 1.0;
  GaussianDensity narrow(3, 1.0, 1e-4);
  const double L = cutoff_loss_rate(narrow, Vec{0, 0, 10}, c);
  CHECK(L / (2 * kPi * 10.0) == doctest::Approx(1.0).epsilon(1e-4));
  double worst = 0.0;
  for (double r = 0.0; r <= 50.0; r += 2.5)
    worst = std::max(worst, cutoff_loss_rate(f, Vec{r, 0, 0}, c) / (1 + r));
  CHECK(worst < 2 * kPi * 2.0 * 2.0);
}

TEST_CASE("Duhamel factor") {
  LossHistory h{{0.0, 1.0, 2.0, 3.0}, {2.0, 2.0, 2.0, 2.0}};
  CHECK(duhamel_factor(h, 1.5, 1.5) == 1.0);
  CHECK(duhamel_factor(h, 0.5, 2.5) == doctest::Approx(std::exp(-4.0)));
  CHECK_THROWS_AS(duhamel_factor(h, 0.5, 3.5), Error);
  LossHistory lin{{0.0, 1.0}, {0.0, 2.0}};
  CHECK(duhamel_factor(lin, 0.0, 1.0) == doctest::Approx(std::exp(-1.0)));
  // |v| < R and C bounds the history: the exact factor dominates the bound
  const double C = 1.0, R = 2.0, gamma = 1.0;
  CHECK(duhamel_factor(h, 0.0, 3.0) >= duhamel_lower_bound(C, 0.0, 3.0, R, gamma));
}
