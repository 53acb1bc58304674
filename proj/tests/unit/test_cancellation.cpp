#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kten/cancellation.hpp"
#include "kten/rng.hpp"

using namespace kten;

namespace {

constexpr double kPi = std::numbers::pi;

KernelSpec spec3() {
  KernelSpec k;
  k.d = 3;
  k.gamma = -1.0;
  k.s = 0.5;
  return k;
}

KernelSpec spec2() {
  KernelSpec k;
  k.d = 2;
  k.gamma = -0.5;
  k.s = 0.5;
  return k;
}

// Plain bisection, used as an oracle for the angle split.
double bisect_split(double w, double lambda) {
  double lo = 0.0, hi = w;
  for (int i = 0; i < 300; ++i) {
    const double m = 0.5 * (lo + hi);
    (m + std::asin(lambda * std::sin(m)) < w ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

// S1 by tanh-sinh quadrature of the same integrand.
double S1_tanh_sinh(const SFunctionSpec& s) {
  const KernelSpec& k = s.kernel;
  boost::math::quadrature::tanh_sinh<double> ts;
  auto F = [&](double w) {
    if (w <= 1e-100 || w >= kPi) return 0.0;
    const double sw = k.d == 3 ? std::sin(w) : 1.0;
    return sphere_area(k.d - 2) * k.b_angle(w) * sw * s.bracket(w);
  };
  return ts.integrate(F, 0.0, kPi / 2) + ts.integrate(F, kPi / 2, kPi);
}

}  // namespace

TEST_CASE("angle split") {
  const auto fr = solve_angle(kPi / 2, 0.5);
  CHECK(std::abs(fr.a + std::asin(0.5 * std::sin(fr.a)) - kPi / 2) < 1e-13);
  CHECK(fr.a == doctest::Approx(bisect_split(kPi / 2, 0.5)).epsilon(1e-13));
  CHECK(std::abs(std::sin(fr.A) - 0.5 * std::sin(fr.a)) < 1e-12);
  CHECK(fr.a + fr.A == fr.w);

  const auto end = solve_angle(kPi, 0.7);
  CHECK(end.a == kPi);
  CHECK(end.A == 0.0);
  CHECK_THROWS_AS(solve_angle(0.0, 0.5), Error);
  CHECK_THROWS_AS(solve_angle(1.0, 1.5), Error);

  // near-elastic: equal split away from w = pi
  for (double w = 0.05; w < 2.5; w += 0.05) {
    const auto e = solve_angle(w, 1.0 - 1e-9);
    CHECK(e.a == doctest::Approx(w / 2).epsilon(1e-7));
    CHECK(e.A == doctest::Approx(w / 2).epsilon(1e-7));
  }

  for (double lambda : {0.2, 0.6, 0.95, 1.0 - 1e-6}) {
    double prev = 0.0;
    for (int i = 1; i < 1000; ++i) {
      const double w = kPi * i / 1000.0;
      const auto s = solve_angle(w, lambda);
      CHECK(s.a > prev);
      CHECK(s.A > 0.0);
      CHECK(s.A < kPi / 2);
      prev = s.a;
    }
  }
}

TEST_CASE("bracket positivity and small-angle behaviour") {
  const KernelSpec k = spec3();
  const SFunctionSpec specs[] = {
      SFunctionSpec::inelastic(k, RestitutionParams::from_beta(0.8)),
      SFunctionSpec::mixture(k, MassPair(1.0, 3.0)),
      SFunctionSpec::mixture(k, MassPair(3.0, 1.0)),
      SFunctionSpec::elastic(k),
  };
  for (const auto& s : specs) {
    CHECK(s.c_a == doctest::Approx(s.lambda / (1 + s.lambda)));
    for (int i = 1; i < 2000; ++i) CHECK(s.bracket(kPi * i / 2000.0) > 0.0);
    double worst = 0.0;
    for (double w = 1e-8; w <= 0.1; w *= 1.3) {
      const double q = std::sin(w / 2);
      worst = std::max(worst, s.bracket(w) / (q * q));
    }
    CHECK(worst < 2.0 * (k.d + k.gamma) * 2.0);
  }
  CHECK(specs[0].c_a == doctest::Approx(0.4));
  CHECK(specs[1].c_a == doctest::Approx(0.25));
  CHECK(specs[2].c_a == doctest::Approx(0.25));
  CHECK(specs[2].family == SFamily::MixtureHeavyOnLight);
  CHECK_THROWS_AS(SFunctionSpec::mixture(k, MassPair(1.0, 1.0)), Error);
}

TEST_CASE("S1 against tanh-sinh quadrature") {
  for (const KernelSpec& k : {spec3(), spec2()}) {
    const SFunctionSpec specs[] = {
        SFunctionSpec::inelastic(k, RestitutionParams::from_beta(0.8)),
        SFunctionSpec::mixture(k, MassPair(1.0, 2.0)),
        SFunctionSpec::mixture(k, MassPair(2.0, 1.0)),
        SFunctionSpec::elastic(k),
    };
    for (const auto& s : specs) {
      const SFunction S(s);
      CHECK(S.S1() > 0.0);
      CHECK(S.S1() == doctest::Approx(S1_tanh_sinh(s)).epsilon(1e-7));
      CHECK(S(2.0) / S(1.0) == doctest::Approx(std::pow(2.0, k.gamma)).epsilon(1e-14));
    }
  }
}

TEST_CASE("S elastic limits") {
  for (const KernelSpec& k : {spec3(), spec2()}) {
    const double el = SFunction(SFunctionSpec::elastic(k)).S1();
    const double in = SFunction(SFunctionSpec::inelastic(k, RestitutionParams::from_beta(1 - 1e-6))).S1();
    CHECK(std::abs(in / el - 1) < 1e-3);
    for (double r : {1 - 1e-6, 1 + 1e-6}) {
      const double mx = SFunction(SFunctionSpec::mixture(k, MassPair(r, 1.0))).S1();
      CHECK(std::abs(mx / el - 1) < 1e-3);
    }
    // convergence: the gap shrinks with the asymmetry
    double prev = INFINITY;
    for (double e : {1e-1, 1e-2, 1e-3}) {
      const double gap =
          std::abs(SFunction(SFunctionSpec::mixture(k, MassPair(1 - e, 1.0))).S1() / el - 1);
      CHECK(gap < prev);
      prev = gap;
    }
  }
}

TEST_CASE("divergent angular profile is reported") {
  KernelSpec k = spec3();
  k.btilde = [](double c) { return std::pow(std::max(1.0 - c, 1e-300), -0.6); };
  try {
    SFunction S(SFunctionSpec::elastic(k));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DivergentIntegral);
  }
}

TEST_CASE("nonsingular part") {
  const KernelSpec k = spec3();
  const SFunction S(SFunctionSpec::inelastic(k, RestitutionParams::from_beta(0.8)));
  GaussianDensity f(3, 1.0, 1.0);
  CHECK(Q_ns_apply(f, 0.0, Vec{1, 2, 3}, S) == 0.0);
  CounterRng g(3, streams::kGeometry, 9, 0);
  for (int i = 0; i < 100; ++i) {
    const Vec v{2 * g.normal(), 2 * g.normal(), 2 * g.normal()};
    const double q = Q_ns_apply(f, 0.5, v, S);
    CHECK(q > 0.0);
    CHECK(std::isfinite(q));
    // gamma = -1: int f / |v - v*| = erf(|v| / sqrt 2) / |v|
    const double r = norm(v);
    CHECK(q == doctest::Approx(0.5 * S.S1() * std::erf(r / std::sqrt(2.0)) / r).epsilon(1e-9));
  }
  const Vec shift{0.7, -1.2, 3.0}, v{0.4, 0.1, -0.9};
  GaussianDensity fs(3, 1.0, 1.0, shift);
  CHECK(Q_ns_apply(fs, 1.0, v + shift, S) == doctest::Approx(Q_ns_apply(f, 1.0, v, S)).epsilon(1e-9));
}
